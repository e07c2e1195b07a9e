#pragma once

#include <string>
#include <vector>

#include "gap/core.hpp"

namespace gap {

// Baseline TIFF: uncompressed, one sample per pixel, any strip layout, either
// byte order; 8/16/32/64-bit unsigned, signed or floating-point samples.
// Multi-page files read as stacks.
std::vector<RealGrid> read_tiff(const std::string& path);
// Pages must hold non-negative integers; FormatError otherwise.
std::vector<PhotonImage> read_photon_tiff(const std::string& path);

// Photon images are written as uint16 when every count fits, else uint32.
void write_tiff(const std::string& path, const PhotonImage& img);
void write_tiff(const std::string& path, const std::vector<PhotonImage>& stack);
// Real grids are written as 32-bit float.
void write_tiff(const std::string& path, const RealGrid& img);
void write_tiff(const std::string& path, const std::vector<RealGrid>& stack);

}  // namespace gap
