#pragma once

#include "flowseg/rng.hpp"
#include "flowseg/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace flowseg {

// One image with its set of expert annotations.
struct MultiAnnotatedSample {
  std::string id;
  Tensor image;               // [C_X,H,W], values in [0,1]
  std::vector<Tensor> masks;  // E binary [H,W] masks
};

struct SynthConfig {
  int n_samples = 200;
  int size = 32;  // H = W
  int annotators = 4;
  double p_empty = 0.5;       // chance an annotator reports no lesion
  double radius_jitter = 1.0;  // sigma of the per-annotator radius offset, px
  double noise = 0.05;        // image pixel noise sigma
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

struct Ellipse {
  double cx = 0, cy = 0;  // center, pixel units
  double rx = 0, ry = 0;  // radii
  double theta = 0;       // orientation, radians
};

struct SynthSample {
  Tensor image;               // [1,H,W]
  std::vector<Tensor> masks;  // E binary [H,W]
  Ellipse ellipse;
};

// Normalized elliptic radius of a pixel center; <= 1 means inside.
double elliptic_radius(const Ellipse& e, double px, double py);

// The mask annotator e would draw after perturbing both radii by delta.
Tensor render_annotator_mask(const Ellipse& e, double delta, int size);

// Draw order per sample: ellipse (resampled whole if a radius degenerates
// below 1 px), then per annotator an empty-mask coin and a radius offset
// (both always consumed), then one noise value per image pixel.
SynthSample make_synth_sample(const SynthConfig& config, Rng& rng);

// Writes n_samples PGM image/mask files plus manifest.json into out_dir.
// Byte-identical for equal configs.
void synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir);

// Reads manifest.json and every referenced PGM; images are normalized by
// 1/255, masks binarized at pixel >= 128. Any missing or malformed file is
// rejected with its path.
std::vector<MultiAnnotatedSample> load_dataset(const std::filesystem::path& dir);

}  // namespace flowseg
