#include "gap/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "gap/error.hpp"

namespace gap {
namespace {

enum Tag : std::uint16_t {
  kWidth = 256,
  kLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kSampleFormat = 339,
};

enum FieldType : std::uint16_t { kByte = 1, kShort = 3, kLong = 4 };
enum SampleFormat : std::uint32_t { kUnsigned = 1, kSigned = 2, kFloat = 3 };

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string path)
      : b_(std::move(bytes)), path_(std::move(path)) {
    if (b_.size() < 8) fail("file too short");
    if (b_[0] == 'I' && b_[1] == 'I') {
      little_ = true;
    } else if (b_[0] == 'M' && b_[1] == 'M') {
      little_ = false;
    } else {
      fail("not a TIFF file");
    }
    if (u16(2) == 43) fail("BigTIFF is not supported");
    if (u16(2) != 42) fail("bad TIFF magic");
  }

  std::uint64_t uint(std::size_t at, int bytes) const {
    if (at + bytes > b_.size()) fail("offset past end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const std::uint64_t byte = b_[at + i];
      v |= little_ ? byte << (8 * i) : byte << (8 * (bytes - 1 - i));
    }
    return v;
  }
  std::uint32_t u16(std::size_t at) const { return static_cast<std::uint32_t>(uint(at, 2)); }
  std::uint32_t u32(std::size_t at) const { return static_cast<std::uint32_t>(uint(at, 4)); }

  [[noreturn]] void fail(const std::string& why) const { throw FormatError(path_ + ": " + why); }

  std::vector<RealGrid> pages() const {
    std::vector<RealGrid> out;
    std::set<std::uint32_t> seen;
    std::uint32_t ifd = u32(4);
    while (ifd != 0) {
      if (!seen.insert(ifd).second) fail("IFD chain loops");
      out.push_back(page(ifd));
      const std::uint32_t n = u16(ifd);
      ifd = u32(ifd + 2 + 12 * n);
    }
    if (out.empty()) fail("no image pages");
    return out;
  }

 private:
  struct Field {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::size_t value_at = 0;  // where the values start
  };

  std::vector<std::uint32_t> values(const Field& f) const {
    const int size = f.type == kShort ? 2 : f.type == kLong ? 4 : f.type == kByte ? 1 : 0;
    if (size == 0) fail("unsupported field type " + std::to_string(f.type));
    std::vector<std::uint32_t> out(f.count);
    for (std::uint32_t i = 0; i < f.count; ++i) {
      out[i] = static_cast<std::uint32_t>(uint(f.value_at + static_cast<std::size_t>(i) * size, size));
    }
    return out;
  }

  RealGrid page(std::uint32_t ifd) const {
    const std::uint32_t n = u16(ifd);
    std::map<std::uint16_t, Field> fields;
    for (std::uint32_t e = 0; e < n; ++e) {
      const std::size_t at = ifd + 2 + 12 * e;
      Field f;
      const auto tag = static_cast<std::uint16_t>(u16(at));
      f.type = static_cast<std::uint16_t>(u16(at + 2));
      f.count = u32(at + 4);
      const int size = f.type == kShort ? 2 : f.type == kLong ? 4 : 1;
      f.value_at = static_cast<std::size_t>(size) * f.count <= 4 ? at + 8 : u32(at + 8);
      fields[tag] = f;
    }
    auto scalar = [&](std::uint16_t tag, std::uint32_t fallback) -> std::uint32_t {
      const auto it = fields.find(tag);
      if (it == fields.end()) return fallback;
      const auto v = values(it->second);
      if (v.empty()) fail("empty field " + std::to_string(tag));
      return v.front();
    };
    const std::uint32_t width = scalar(kWidth, 0), height = scalar(kLength, 0);
    if (width == 0 || height == 0) fail("missing image dimensions");
    if (scalar(kCompression, 1) != 1) fail("compressed TIFF is not supported");
    if (scalar(kSamplesPerPixel, 1) != 1) fail("only single-channel images are supported");
    if (scalar(kPlanarConfig, 1) != 1) fail("unsupported planar configuration");
    const std::uint32_t bits = scalar(kBitsPerSample, 1);
    const std::uint32_t format = scalar(kSampleFormat, kUnsigned);
    const bool ok_bits = bits == 8 || bits == 16 || bits == 32 || (bits == 64);
    if (!ok_bits || (format == kFloat && bits != 32 && bits != 64) || format < 1 || format > 3) {
      fail("unsupported sample layout (" + std::to_string(bits) + " bits, format " + std::to_string(format) + ")");
    }
    if (!fields.count(kStripOffsets) || !fields.count(kStripByteCounts)) fail("missing strip tables");
    const auto offsets = values(fields.at(kStripOffsets));
    const auto counts = values(fields.at(kStripByteCounts));
    if (offsets.size() != counts.size()) fail("strip tables differ in length");

    const std::size_t bytes = bits / 8;
    const std::size_t needed = static_cast<std::size_t>(width) * height * bytes;
    std::vector<unsigned char> raw;
    raw.reserve(needed);
    for (std::size_t s = 0; s < offsets.size() && raw.size() < needed; ++s) {
      if (static_cast<std::size_t>(offsets[s]) + counts[s] > b_.size()) fail("strip past end of file");
      raw.insert(raw.end(), b_.begin() + offsets[s], b_.begin() + offsets[s] + counts[s]);
    }
    if (raw.size() < needed) fail("pixel data truncated");

    RealGrid img(height, width);
    for (std::size_t i = 0; i < img.size(); ++i) {
      std::uint64_t v = 0;
      for (std::size_t k = 0; k < bytes; ++k) {
        const std::uint64_t byte = raw[i * bytes + k];
        v |= little_ ? byte << (8 * k) : byte << (8 * (bytes - 1 - k));
      }
      double x = 0.0;
      if (format == kFloat) {
        x = bits == 32 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(v)))
                       : std::bit_cast<double>(v);
      } else if (format == kSigned) {
        const int shift = 64 - static_cast<int>(bits);
        x = static_cast<double>(static_cast<std::int64_t>(v << shift) >> shift);
      } else {
        x = static_cast<double>(v);
      }
      img[i] = x;
    }
    return img;
  }

  std::vector<unsigned char> b_;
  std::string path_;
  bool little_ = true;
};

struct PageSpec {
  std::uint32_t width, height, bits, format;
  std::vector<unsigned char> data;  // little-endian samples
};

template <class T>
void append_le(std::vector<unsigned char>& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

void write_pages(const std::string& path, const std::vector<PageSpec>& pages) {
  constexpr std::uint16_t kEntries = 11;
  constexpr std::uint32_t kIfdBytes = 2 + 12 * kEntries + 4;
  std::vector<unsigned char> out{'I', 'I', 42, 0};
  append_le<std::uint32_t>(out, 8);
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const auto& pg = pages[p];
    const auto ifd = static_cast<std::uint32_t>(out.size());
    const std::uint32_t data_at = ifd + kIfdBytes;
    std::uint32_t next = data_at + static_cast<std::uint32_t>(pg.data.size());
    next += next % 2;
    auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t value) {
      append_le<std::uint16_t>(out, tag);
      append_le<std::uint16_t>(out, type);
      append_le<std::uint32_t>(out, 1);
      if (type == kShort) {
        append_le<std::uint16_t>(out, static_cast<std::uint16_t>(value));
        append_le<std::uint16_t>(out, 0);
      } else {
        append_le<std::uint32_t>(out, value);
      }
    };
    append_le<std::uint16_t>(out, kEntries);
    entry(kWidth, kLong, pg.width);
    entry(kLength, kLong, pg.height);
    entry(kBitsPerSample, kShort, pg.bits);
    entry(kCompression, kShort, 1);
    entry(kPhotometric, kShort, 1);
    entry(kStripOffsets, kLong, data_at);
    entry(kSamplesPerPixel, kShort, 1);
    entry(kRowsPerStrip, kLong, pg.height);
    entry(kStripByteCounts, kLong, static_cast<std::uint32_t>(pg.data.size()));
    entry(kPlanarConfig, kShort, 1);
    entry(kSampleFormat, kShort, pg.format);
    append_le<std::uint32_t>(out, p + 1 < pages.size() ? next : 0);
    out.insert(out.end(), pg.data.begin(), pg.data.end());
    if (out.size() % 2) out.push_back(0);
  }
  if (out.size() > 0xFFFFFFFFull) throw FormatError(path + ": image too large for baseline TIFF");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write failed for " + path);
}

PageSpec photon_page(const PhotonImage& img) {
  std::uint64_t max = 0;
  for (auto v : img) max = std::max(max, v);
  if (max > 0xFFFFFFFFull) throw FormatError("photon count exceeds 32 bits");
  PageSpec pg{static_cast<std::uint32_t>(img.shape().cols), static_cast<std::uint32_t>(img.shape().rows),
              max < 65536 ? 16u : 32u, kUnsigned, {}};
  for (auto v : img) {
    if (pg.bits == 16) {
      append_le<std::uint16_t>(pg.data, static_cast<std::uint16_t>(v));
    } else {
      append_le<std::uint32_t>(pg.data, static_cast<std::uint32_t>(v));
    }
  }
  return pg;
}

PageSpec real_page(const RealGrid& img) {
  PageSpec pg{static_cast<std::uint32_t>(img.shape().cols), static_cast<std::uint32_t>(img.shape().rows), 32,
              kFloat, {}};
  for (double v : img) append_le<std::uint32_t>(pg.data, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return pg;
}

}  // namespace

std::vector<RealGrid> read_tiff(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), path).pages();
}

std::vector<PhotonImage> read_photon_tiff(const std::string& path) {
  std::vector<PhotonImage> out;
  for (const auto& page : read_tiff(path)) {
    PhotonImage img(page.shape());
    for (std::size_t i = 0; i < page.size(); ++i) {
      const double v = page[i];
      if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
        throw FormatError(path + ": pixel values must be non-negative integer photon counts");
      }
      img[i] = static_cast<std::uint64_t>(v);
    }
    out.push_back(std::move(img));
  }
  return out;
}

void write_tiff(const std::string& path, const PhotonImage& img) {
  write_pages(path, {photon_page(img)});
}

void write_tiff(const std::string& path, const std::vector<PhotonImage>& stack) {
  if (stack.empty()) throw FormatError("cannot write an empty stack to " + path);
  std::vector<PageSpec> pages;
  for (const auto& img : stack) pages.push_back(photon_page(img));
  write_pages(path, pages);
}

void write_tiff(const std::string& path, const RealGrid& img) {
  write_pages(path, {real_page(img)});
}

void write_tiff(const std::string& path, const std::vector<RealGrid>& stack) {
  if (stack.empty()) throw FormatError("cannot write an empty stack to " + path);
  std::vector<PageSpec> pages;
  for (const auto& img : stack) pages.push_back(real_page(img));
  write_pages(path, pages);
}

}  // namespace gap
