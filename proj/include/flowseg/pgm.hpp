#pragma once

#include "flowseg/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace flowseg {

// Binary (P5) 8-bit PGM, the project's only image format.
struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, size width*height
};

void write_pgm(const std::filesystem::path& path, const PgmImage& image);

// Throws std::runtime_error naming the path on any malformed input; the
// maxval is required to be 255.
PgmImage read_pgm(const std::filesystem::path& path);

// [H,W] tensor -> 8-bit grayscale with values clamped to [0,1] then scaled.
PgmImage to_pgm(const Tensor& grid, double scale = 1.0);

// 8-bit grayscale -> [H,W] tensor in [0,1] (pixel/255).
Tensor pgm_to_unit_tensor(const PgmImage& image);

// 8-bit grayscale -> binary [H,W] mask (pixel >= 128 -> 1).
Tensor pgm_to_mask(const PgmImage& image);

}  // namespace flowseg
