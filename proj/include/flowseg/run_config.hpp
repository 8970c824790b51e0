#pragma once

#include "flowseg/dataset.hpp"
#include "flowseg/flow.hpp"
#include "flowseg/net.hpp"
#include "flowseg/sampler.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>

namespace flowseg {

struct SamplingConfig {
  int num = 15;  // masks per image
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

// Union of every knob the CLI understands. JSON sections mirror the struct
// names; unknown keys anywhere are rejected so typos cannot silently fall
// back to defaults. A resolved.json dump of this struct reproduces a run.
struct RunConfig {
  NetworkConfig network;
  TrainingConfig training;
  IntegratorConfig integrator;
  SynthConfig synth;
  SamplingConfig sampling;
};

nlohmann::json to_json(const NetworkConfig& c);
nlohmann::json to_json(const TrainingConfig& c);
nlohmann::json to_json(const IntegratorConfig& c);
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const SamplingConfig& c);
nlohmann::json to_json(const RunConfig& c);

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void write_resolved_config(const RunConfig& config, const std::filesystem::path& path);

NetworkConfig network_config_from_json(const nlohmann::json& j);
TrainingConfig training_config_from_json(const nlohmann::json& j);

}  // namespace flowseg
