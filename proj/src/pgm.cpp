#include "flowseg/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace flowseg {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("PGM " + path.string() + ": " + what);
}

// next integer token, skipping whitespace and '#' comment lines
int read_header_int(std::istream& in) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) return -1;
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > 1 << 20) return -1;
    c = in.get();
  }
  if (c != EOF && !std::isspace(c)) return -1;
  return value;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const PgmImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw std::invalid_argument("write_pgm: pixel buffer does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) fail(path, "write failed");
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') fail(path, "not a P5 PGM");
  const int width = read_header_int(in);
  const int height = read_header_int(in);
  const int maxval = read_header_int(in);
  if (width <= 0 || height <= 0) fail(path, "bad dimensions");
  if (maxval != 255) fail(path, "unsupported maxval " + std::to_string(maxval));
  PgmImage image;
  image.width = width;
  image.height = height;
  image.pixels.resize(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
    fail(path, "truncated pixel data");
  }
  return image;
}

PgmImage to_pgm(const Tensor& grid, double scale) {
  if (grid.rank() != 2) {
    throw std::invalid_argument("to_pgm: need a rank-2 tensor, got " + shape_str(grid.shape));
  }
  PgmImage image;
  image.height = static_cast<int>(grid.dim(0));
  image.width = static_cast<int>(grid.dim(1));
  image.pixels.resize(static_cast<std::size_t>(grid.numel()));
  for (Eigen::Index i = 0; i < grid.numel(); ++i) {
    const double v = std::clamp(grid.data[i] * scale, 0.0, 1.0);
    image.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return image;
}

Tensor pgm_to_unit_tensor(const PgmImage& image) {
  Tensor t = Tensor::zeros({image.height, image.width});
  for (Eigen::Index i = 0; i < t.numel(); ++i) {
    t.data[i] = image.pixels[static_cast<std::size_t>(i)] / 255.0;
  }
  return t;
}

Tensor pgm_to_mask(const PgmImage& image) {
  Tensor t = Tensor::zeros({image.height, image.width});
  for (Eigen::Index i = 0; i < t.numel(); ++i) {
    t.data[i] = image.pixels[static_cast<std::size_t>(i)] >= 128 ? 1.0 : 0.0;
  }
  return t;
}

}  // namespace flowseg
