#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vtd {

// 8-bit RGB image buffer, row-major, 3 bytes per pixel.
struct ImageRgb8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;
};

// Minimal PNG support for the lossless frame cache: 8-bit RGB (color type 2),
// non-interlaced. write emits filter-0 rows; read handles all five row filters.
void write_png_rgb8(const std::string& path, const ImageRgb8& img);
ImageRgb8 read_png_rgb8(const std::string& path);

}  // namespace vtd
