// flowseg: generate synthetic multi-annotator data, train the flow matching
// velocity field, sample segmentation masks, and evaluate distribution
// metrics. Every command is deterministic given its flags and seed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "flowseg/checkpoint.hpp"
#include "flowseg/dataset.hpp"
#include "flowseg/flow.hpp"
#include "flowseg/metrics.hpp"
#include "flowseg/parallel.hpp"
#include "flowseg/pgm.hpp"
#include "flowseg/run_config.hpp"
#include "flowseg/sampler.hpp"
#include "flowseg/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace flowseg;

namespace {

struct CommonArgs {
  std::optional<std::string> config_path;
};

RunConfig resolve_config(const CommonArgs& args) {
  return args.config_path ? load_run_config(*args.config_path) : RunConfig{};
}

void write_loss_csv(const fs::path& path, const LossHistory& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, history.values[i]);
    out << buf;
  }
}

std::string padded(const char* stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.pgm", stem, i);
  return buf;
}

int run_synth(const CommonArgs& common, const fs::path& out_dir, std::optional<int> n,
              std::optional<int> size, std::optional<int> annotators,
              std::optional<double> p_empty, std::optional<std::uint64_t> seed) {
  RunConfig config = resolve_config(common);
  if (n) config.synth.n_samples = *n;
  if (size) config.synth.size = *size;
  if (annotators) config.synth.annotators = *annotators;
  if (p_empty) config.synth.p_empty = *p_empty;
  if (seed) config.synth.seed = *seed;
  config.synth.validate();

  synth_generate(config.synth, out_dir);
  write_resolved_config(config, out_dir / "resolved.json");
  std::cout << "wrote " << config.synth.n_samples << " samples to " << out_dir.string() << "\n";
  return 0;
}

int run_train(const CommonArgs& common, const fs::path& data_dir, const fs::path& out_path,
              std::optional<int> iters, std::optional<std::uint64_t> seed) {
  RunConfig config = resolve_config(common);
  if (iters) config.training.iterations = *iters;
  if (seed) config.training.seed = *seed;
  config.network.validate();
  config.training.validate();

  const std::vector<MultiAnnotatedSample> data = load_dataset(data_dir);
  TrainResult result = train(data, config.network, config.training, [&](int it, double loss) {
    if ((it + 1) % 100 == 0 || it + 1 == config.training.iterations) {
      std::fprintf(stderr, "iter %d/%d loss %.6f\n", it + 1, config.training.iterations, loss);
    }
  });

  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_checkpoint(out_path, result.params, config.training, config.training.iterations);
  write_loss_csv(out_path.string() + ".loss.csv", result.history);
  write_resolved_config(config, (out_path.has_parent_path() ? out_path.parent_path() : fs::path("."))
                                    / "resolved.json");
  std::cout << "checkpoint " << out_path.string() << "\n";
  return 0;
}

const MultiAnnotatedSample& find_sample(const std::vector<MultiAnnotatedSample>& data,
                                        const std::string& id) {
  for (const auto& s : data) {
    if (s.id == id) return s;
  }
  throw std::invalid_argument("image id '" + id + "' not found in the dataset manifest");
}

int run_sample(const CommonArgs& common, const fs::path& ckpt_path, const fs::path& data_dir,
               const std::string& image_id, const fs::path& out_dir, std::optional<int> num,
               std::optional<double> guidance, std::optional<double> step,
               std::optional<std::uint64_t> seed) {
  RunConfig config = resolve_config(common);
  if (num) config.sampling.num = *num;
  if (guidance) config.integrator.guidance = *guidance;
  if (step) config.integrator.step = *step;
  if (seed) config.sampling.seed = *seed;
  config.sampling.validate();
  config.integrator.validate();

  Checkpoint ckpt = load_checkpoint(ckpt_path);
  config.network = ckpt.params.config;
  config.training = ckpt.training;
  const std::vector<MultiAnnotatedSample> data = load_dataset(data_dir);
  const MultiAnnotatedSample& sample = find_sample(data, image_id);

  SampleSet set = sample_many(ckpt.params, sample.image, config.sampling.num, config.integrator,
                              config.sampling.seed);

  fs::create_directories(out_dir);
  const Eigen::Index h = config.network.image_size, w = config.network.image_size;
  std::vector<Tensor> masks2d;
  for (int i = 0; i < config.sampling.num; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    masks2d.push_back(set.masks[idx].reshaped({h, w}));
    write_pgm(out_dir / padded("mask", i), to_pgm(masks2d.back()));
    write_pgm(out_dir / padded("field", i), to_pgm(set.fields[idx].reshaped({h, w})));
  }
  UncertaintyMap map = pixelwise_stats(masks2d);
  write_pgm(out_dir / "mean.pgm", to_pgm(map.mean));
  write_pgm(out_dir / "variance.pgm", to_pgm(map.variance, 4.0));  // [0,0.25] -> [0,1]
  write_resolved_config(config, out_dir / "resolved.json");
  std::cout << "wrote " << config.sampling.num << " masks for " << image_id << " to "
            << out_dir.string() << "\n";
  return 0;
}

int run_eval(const CommonArgs& common, const fs::path& ckpt_path, const fs::path& data_dir,
             const fs::path& out_csv, std::optional<int> num, std::optional<double> guidance,
             std::optional<double> step, std::optional<std::uint64_t> seed, bool oracle) {
  RunConfig config = resolve_config(common);
  if (num) config.sampling.num = *num;
  if (guidance) config.integrator.guidance = *guidance;
  if (step) config.integrator.step = *step;
  if (seed) config.sampling.seed = *seed;
  config.sampling.validate();
  config.integrator.validate();

  Checkpoint ckpt = load_checkpoint(ckpt_path);
  config.network = ckpt.params.config;
  config.training = ckpt.training;
  const std::vector<MultiAnnotatedSample> data = load_dataset(data_dir);
  if (data.empty()) throw std::runtime_error("eval: dataset in " + data_dir.string() + " is empty");

  const Eigen::Index h = config.network.image_size, w = config.network.image_size;
  std::vector<MetricsReport> reports(data.size());
  // per-image seeds are split by manifest index, so scheduling cannot change
  // any row
  parallel_for(static_cast<int>(data.size()), [&](int i) {
    const auto& sample = data[static_cast<std::size_t>(i)];
    std::vector<Tensor> pred;
    if (oracle) {
      pred = sample.masks;
    } else {
      SampleSet set = sample_many(ckpt.params, sample.image, config.sampling.num, config.integrator,
                                  Rng::derive_seed(config.sampling.seed, static_cast<std::uint64_t>(i)));
      for (Tensor& m : set.masks) pred.push_back(m.reshaped({h, w}));
    }
    reports[static_cast<std::size_t>(i)] = evaluate_sample_set(pred, sample.masks);
  });

  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv.string());
  out << metrics_csv_header() << "\n";
  MetricsReport mean;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const MetricsReport& r = reports[i];
    out << metrics_csv_row(data[i].id, r) << "\n";
    mean.ged += r.ged;
    mean.s_ncc += r.s_ncc;
    mean.d_max += r.d_max;
    mean.dice += r.dice;
  }
  const double n = static_cast<double>(data.size());
  mean.ged /= n;
  mean.s_ncc /= n;
  mean.d_max /= n;
  mean.dice /= n;
  mean.num_pred = oracle ? reports.front().num_pred : config.sampling.num;
  mean.num_gt = reports.front().num_gt;
  out << metrics_csv_row("MEAN", mean) << "\n";
  write_resolved_config(config, (out_csv.has_parent_path() ? out_csv.parent_path() : fs::path("."))
                                    / "resolved.json");
  std::cout << metrics_csv_header() << "\n" << metrics_csv_row("MEAN", mean) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional flow matching for multi-annotator segmentation"};
  app.require_subcommand(1);

  CommonArgs common;
  fs::path out_dir, data_dir, ckpt_path, out_path;
  std::string image_id;
  std::optional<int> n, size, annotators, num, iters;
  std::optional<double> p_empty, guidance, step;
  std::optional<std::uint64_t> seed;
  bool oracle = false;

  auto add_config_flag = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "JSON run config; flags override its values");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic multi-annotator dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--n", n, "number of samples");
  synth->add_option("--size", size, "image side length");
  synth->add_option("--annotators", annotators, "experts per image");
  synth->add_option("--p-empty", p_empty, "probability an annotator reports no lesion");
  synth->add_option("--seed", seed, "generator seed");
  add_config_flag(synth);

  CLI::App* train_cmd = app.add_subcommand("train", "train the velocity field");
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--out", out_path, "checkpoint output path")->required();
  train_cmd->add_option("--iters", iters, "training iterations");
  train_cmd->add_option("--seed", seed, "training seed");
  add_config_flag(train_cmd);

  CLI::App* sample_cmd = app.add_subcommand("sample", "sample segmentation masks for one image");
  sample_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  sample_cmd->add_option("--data", data_dir, "dataset directory")->required();
  sample_cmd->add_option("--image-id", image_id, "sample id from the manifest")->required();
  sample_cmd->add_option("--out", out_dir, "output directory")->required();
  sample_cmd->add_option("--num", num, "number of masks");
  sample_cmd->add_option("--guidance", guidance, "classifier-free guidance scale");
  sample_cmd->add_option("--step", step, "integrator step size");
  sample_cmd->add_option("--seed", seed, "sampling seed");
  add_config_flag(sample_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate distribution metrics on a dataset");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--out", out_path, "metrics CSV path")->required();
  eval_cmd->add_option("--num", num, "samples per image");
  eval_cmd->add_option("--guidance", guidance, "classifier-free guidance scale");
  eval_cmd->add_option("--step", step, "integrator step size");
  eval_cmd->add_option("--seed", seed, "sampling seed");
  eval_cmd->add_flag("--oracle", oracle, "score the expert masks against themselves");
  add_config_flag(eval_cmd);

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return run_synth(common, out_dir, n, size, annotators, p_empty, seed);
    if (train_cmd->parsed()) return run_train(common, data_dir, out_path, iters, seed);
    if (sample_cmd->parsed()) {
      return run_sample(common, ckpt_path, data_dir, image_id, out_dir, num, guidance, step, seed);
    }
    if (eval_cmd->parsed()) {
      return run_eval(common, ckpt_path, data_dir, out_path, num, guidance, step, seed, oracle);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage or the error message
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
