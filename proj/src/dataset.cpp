#include "flowseg/dataset.hpp"

#include "flowseg/pgm.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace flowseg {

namespace {

using nlohmann::json;

constexpr int kManifestSchemaVersion = 1;

std::string index_name(const char* stem, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", stem, i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_samples < 0) throw std::invalid_argument("SynthConfig: n_samples must be >= 0");
  if (size < 4) throw std::invalid_argument("SynthConfig: size must be >= 4");
  if (annotators < 1) throw std::invalid_argument("SynthConfig: annotators must be >= 1");
  if (!(p_empty >= 0.0 && p_empty <= 1.0)) {
    throw std::invalid_argument("SynthConfig: p_empty must lie in [0,1]");
  }
  if (radius_jitter < 0.0) throw std::invalid_argument("SynthConfig: radius_jitter must be >= 0");
  if (noise < 0.0) throw std::invalid_argument("SynthConfig: noise must be >= 0");
}

double elliptic_radius(const Ellipse& e, double px, double py) {
  const double dx = px - e.cx;
  const double dy = py - e.cy;
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double u = dx * c + dy * s;
  const double v = -dx * s + dy * c;
  return std::sqrt((u / e.rx) * (u / e.rx) + (v / e.ry) * (v / e.ry));
}

Tensor render_annotator_mask(const Ellipse& e, double delta, int size) {
  Ellipse jittered = e;
  jittered.rx = std::max(0.5, e.rx + delta);
  jittered.ry = std::max(0.5, e.ry + delta);
  Tensor mask = Tensor::zeros({size, size});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (elliptic_radius(jittered, x + 0.5, y + 0.5) <= 1.0) mask(y, x) = 1.0;
    }
  }
  return mask;
}

SynthSample make_synth_sample(const SynthConfig& config, Rng& rng) {
  const int n = config.size;
  SynthSample sample;
  do {
    sample.ellipse.cx = rng.uniform(0.3, 0.7) * n;
    sample.ellipse.cy = rng.uniform(0.3, 0.7) * n;
    sample.ellipse.rx = rng.uniform(0.15, 0.30) * n;
    sample.ellipse.ry = rng.uniform(0.15, 0.30) * n;
    sample.ellipse.theta = rng.uniform(0.0, M_PI);
  } while (std::min(sample.ellipse.rx, sample.ellipse.ry) < 1.0);

  for (int e = 0; e < config.annotators; ++e) {
    const bool empty = rng.uniform() < config.p_empty;
    const double delta = rng.normal() * config.radius_jitter;
    sample.masks.push_back(empty ? Tensor::zeros({n, n})
                                 : render_annotator_mask(sample.ellipse, delta, n));
  }

  sample.image = Tensor::zeros({1, n, n});
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double rho = elliptic_radius(sample.ellipse, x + 0.5, y + 0.5);
      const double blob = 1.0 / (1.0 + std::exp((rho - 1.0) / 0.1));
      const double v = 0.15 + 0.7 * blob + config.noise * rng.normal();
      sample.image(0, y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return sample;
}

void synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  json manifest;
  manifest["schema_version"] = kManifestSchemaVersion;
  manifest["channels"] = 1;
  manifest["height"] = config.size;
  manifest["width"] = config.size;
  manifest["annotators"] = config.annotators;
  manifest["samples"] = json::array();

  Rng master(config.seed);
  for (int i = 0; i < config.n_samples; ++i) {
    Rng rng = master.split(static_cast<std::uint64_t>(i));
    SynthSample sample = make_synth_sample(config, rng);
    const std::string id = index_name("sample", i);

    json record;
    record["id"] = id;
    const std::string image_name = id + "_img_c0.pgm";
    write_pgm(out_dir / image_name, to_pgm(sample.image.reshaped({config.size, config.size})));
    record["image"] = json::array({image_name});
    record["masks"] = json::array();
    for (int e = 0; e < config.annotators; ++e) {
      const std::string mask_name = id + "_mask_" + std::to_string(e) + ".pgm";
      write_pgm(out_dir / mask_name, to_pgm(sample.masks[static_cast<std::size_t>(e)]));
      record["masks"].push_back(mask_name);
    }
    record["ellipse"] = {{"cx", sample.ellipse.cx},
                         {"cy", sample.ellipse.cy},
                         {"rx", sample.ellipse.rx},
                         {"ry", sample.ellipse.ry},
                         {"theta", sample.ellipse.theta}};
    manifest["samples"].push_back(std::move(record));
  }

  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error("synth_generate: cannot write " +
                                     (out_dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

std::vector<MultiAnnotatedSample> load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("load_dataset: missing " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_dataset: malformed " + manifest_path.string() + ": " + e.what());
  }

  if (!manifest.contains("schema_version") ||
      manifest["schema_version"].get<int>() != kManifestSchemaVersion) {
    throw std::runtime_error("load_dataset: unknown schema version in " + manifest_path.string());
  }
  const int channels = manifest.at("channels").get<int>();
  const int height = manifest.at("height").get<int>();
  const int width = manifest.at("width").get<int>();
  if (channels < 1 || height < 1 || width < 1) {
    throw std::runtime_error("load_dataset: bad dimensions in " + manifest_path.string());
  }

  auto load_plane = [&](const std::string& name, auto&& convert) {
    const std::filesystem::path path = dir / name;
    PgmImage img = read_pgm(path);
    if (img.height != height || img.width != width) {
      throw std::runtime_error("load_dataset: " + path.string() + " is " +
                               std::to_string(img.width) + "x" + std::to_string(img.height) +
                               ", manifest says " + std::to_string(width) + "x" +
                               std::to_string(height));
    }
    return convert(img);
  };

  std::vector<MultiAnnotatedSample> samples;
  for (const json& record : manifest.at("samples")) {
    MultiAnnotatedSample sample;
    sample.id = record.at("id").get<std::string>();

    const auto& image_names = record.at("image");
    if (static_cast<int>(image_names.size()) != channels) {
      throw std::runtime_error("load_dataset: sample " + sample.id + " lists " +
                               std::to_string(image_names.size()) + " image planes, manifest says " +
                               std::to_string(channels));
    }
    sample.image = Tensor::zeros({channels, height, width});
    for (int c = 0; c < channels; ++c) {
      Tensor plane = load_plane(image_names[static_cast<std::size_t>(c)].get<std::string>(),
                                pgm_to_unit_tensor);
      sample.image.data.segment(static_cast<Eigen::Index>(c) * height * width, height * width) =
          plane.data;
    }

    const auto& mask_names = record.at("masks");
    if (mask_names.empty()) {
      throw std::runtime_error("load_dataset: sample " + sample.id + " has no masks");
    }
    for (const json& name : mask_names) {
      sample.masks.push_back(load_plane(name.get<std::string>(), pgm_to_mask));
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace flowseg
