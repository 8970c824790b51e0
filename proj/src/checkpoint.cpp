#include "flowseg/checkpoint.hpp"

#include "flowseg/run_config.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace flowseg {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blob is little-endian; big-endian hosts need a byte swap here");

constexpr char kMagic[8] = {'F', 'M', 'C', 'K', 'P', 'T', '1', '\0'};
constexpr int kFormatVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const VelocityNetParams& params,
                     const TrainingConfig& training, std::int64_t iteration) {
  std::uint64_t blob_bytes = 0;
  json manifest = json::array();
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    json entry;
    entry["name"] = params.names[i];
    entry["shape"] = params.tensors[i].shape;
    manifest.push_back(std::move(entry));
    blob_bytes += static_cast<std::uint64_t>(params.tensors[i].numel()) * sizeof(double);
  }

  json header;
  header["format"] = kFormatVersion;
  header["network"] = to_json(params.config);
  header["training"] = to_json(training);
  header["iteration"] = iteration;
  header["params"] = std::move(manifest);
  header["blob_bytes"] = blob_bytes;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const Tensor& t : params.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) fail(path, "write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) fail(path, "bad magic");

  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len == 0 || header_len > (1u << 24)) fail(path, "bad header length");

  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (in.gcount() != static_cast<std::streamsize>(header_len)) fail(path, "truncated header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    fail(path, std::string("malformed header: ") + e.what());
  }
  if (!header.contains("format") || header["format"].get<int>() != kFormatVersion) {
    fail(path, "unsupported format version");
  }

  Checkpoint ckpt;
  try {
    ckpt.params.config = network_config_from_json(header.at("network"));
    ckpt.training = training_config_from_json(header.at("training"));
    ckpt.params.config.validate();
    ckpt.training.validate();
  } catch (const std::exception& e) {
    fail(path, std::string("bad config: ") + e.what());
  }
  ckpt.iteration = header.at("iteration").get<std::int64_t>();

  std::uint64_t expected_bytes = 0;
  std::vector<std::pair<std::string, Shape>> stored;
  for (const json& entry : header.at("params")) {
    Shape shape = entry.at("shape").get<Shape>();
    stored.emplace_back(entry.at("name").get<std::string>(), shape);
    expected_bytes += static_cast<std::uint64_t>(shape_numel(shape)) * sizeof(double);
  }
  if (expected_bytes != header.at("blob_bytes").get<std::uint64_t>()) {
    fail(path, "parameter manifest does not match the declared blob length");
  }
  if (stored != param_layout(ckpt.params.config)) {
    fail(path, "parameter manifest does not match the network config");
  }

  for (const auto& [name, shape] : stored) {
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(double))) {
      fail(path, "truncated blob at tensor " + name);
    }
    ckpt.params.names.push_back(name);
    ckpt.params.tensors.push_back(std::move(t));
  }
  if (in.peek() != EOF) fail(path, "trailing bytes after blob");
  if (!ckpt.params.all_finite()) fail(path, "non-finite parameter values");
  return ckpt;
}

}  // namespace flowseg
