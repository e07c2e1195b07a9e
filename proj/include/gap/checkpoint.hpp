#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gap/model.hpp"
#include "gap/noise.hpp"

namespace gap {

// On-disk layout (little-endian):
//   8 bytes  magic "GAPCKPT\0"
//   u32      format version
//   u64      header length, then that many bytes of JSON
//   f64[]    parameters, Adam first moment, Adam second moment; the array
//            lengths are recorded in the header
// Readers accept any file with the same major version; unknown header keys
// are ignored.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ArchitectureConfig architecture;
  std::vector<double> parameters;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t adam_step = 0;
  int epoch = 0;
  double learning_rate = 0.0;
  PsnrRange psnr_range;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws FormatError on a malformed or incompatible file.
Checkpoint load_checkpoint(const std::string& path);
PredictorModel load_model(const std::string& path);

}  // namespace gap
