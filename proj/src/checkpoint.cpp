#include "gap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gap/error.hpp"

namespace gap {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'G', 'A', 'P', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated checkpoint " + path);
  return v;
}

void put_array(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_array(std::istream& in, std::size_t n, const std::string& path) {
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw FormatError("truncated checkpoint " + path);
  }
  return v;
}

const char* padding_name(Padding p) { return p == Padding::zero ? "zero" : "reflect"; }

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto& a = ckpt.architecture;
  nlohmann::json header = {
      {"architecture",
       {{"levels", a.levels},
        {"base_channels", a.base_channels},
        {"encoding_frequencies", a.encoding_frequencies},
        {"padding", padding_name(a.padding)}}},
      {"parameter_count", ckpt.parameters.size()},
      {"adam_count", ckpt.adam_m.size()},
      {"adam_step", ckpt.adam_step},
      {"epoch", ckpt.epoch},
      {"learning_rate", ckpt.learning_rate},
      {"psnr_range", {ckpt.psnr_range.lo, ckpt.psnr_range.hi}},
  };
  if (ckpt.adam_m.size() != ckpt.adam_v.size()) throw ShapeError("Adam moments differ in size");
  PredictorModel(a, ckpt.parameters);  // throws ShapeError on a count mismatch
  const std::string text = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_array(out, ckpt.parameters);
    put_array(out, ckpt.adam_m);
    put_array(out, ckpt.adam_v);
    if (!out) throw FormatError("write failed for " + path);
  }
  // Readers never see a half-written checkpoint.
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw FormatError("cannot replace " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw FormatError(path + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get<std::uint64_t>(in, path);
  if (length > (std::uint64_t{1} << 24)) throw FormatError(path + ": header too large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw FormatError("truncated checkpoint " + path);

  Checkpoint ckpt;
  try {
    const auto h = nlohmann::json::parse(text);
    const auto& a = h.at("architecture");
    ckpt.architecture.levels = a.at("levels").get<int>();
    ckpt.architecture.base_channels = a.at("base_channels").get<int>();
    ckpt.architecture.encoding_frequencies = a.at("encoding_frequencies").get<int>();
    const auto pad = a.at("padding").get<std::string>();
    if (pad != "zero" && pad != "reflect") throw FormatError(path + ": unknown padding " + pad);
    ckpt.architecture.padding = pad == "zero" ? Padding::zero : Padding::reflect;
    ckpt.adam_step = h.at("adam_step").get<std::int64_t>();
    ckpt.epoch = h.at("epoch").get<int>();
    ckpt.learning_rate = h.at("learning_rate").get<double>();
    const auto range = h.at("psnr_range");
    ckpt.psnr_range = PsnrRange(range.at(0).get<double>(), range.at(1).get<double>());
    const auto np = h.at("parameter_count").get<std::size_t>();
    const auto na = h.at("adam_count").get<std::size_t>();
    ckpt.parameters = get_array(in, np, path);
    ckpt.adam_m = get_array(in, na, path);
    ckpt.adam_v = get_array(in, na, path);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  } catch (const RangeError& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }
  try {
    ckpt.architecture.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ckpt;
}

PredictorModel load_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  try {
    return PredictorModel(ckpt.architecture, std::move(ckpt.parameters));
  } catch (const ShapeError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace gap
