#include "acmf/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "acmf/tensor_io.hpp"
#include "json.hpp"

namespace acmf {

namespace {

using Json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "payload is copied as little-endian");

constexpr const char* kMagicPrefix = "ACMF-CKPT";
constexpr const char* kMagic = "ACMF-CKPT v1";

Json config_to_json(const ModelConfig& c) {
  Json j;
  j["channels"] = c.channels;
  j["input_size"] = c.input_size;
  j["stem_channels"] = c.stem_channels;
  j["block1_channels"] = c.block1_channels;
  j["block2_channels"] = c.block2_channels;
  j["classes"] = ModelConfig::kClasses;
  return j;
}

ModelConfig config_from_json(const Json& j) {
  ModelConfig c;
  c.channels = j.at("channels").get<std::size_t>();
  c.input_size = j.at("input_size").get<std::size_t>();
  c.stem_channels = j.at("stem_channels").get<std::size_t>();
  c.block1_channels = j.at("block1_channels").get<std::size_t>();
  c.block2_channels = j.at("block2_channels").get<std::size_t>();
  if (j.at("classes").get<std::size_t>() != ModelConfig::kClasses) {
    throw FormatError(FormatErrorKind::kShapeMismatch, "checkpoint: class count must be 2");
  }
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto specs = param_specs(ckpt.config);
  if (specs.size() != ckpt.params.size()) {
    throw FormatError(FormatErrorKind::kShapeMismatch, "checkpoint: parameter count does not match config");
  }
  Json header;
  header["format_version"] = Checkpoint::kFormatVersion;
  header["config"] = config_to_json(ckpt.config);
  Json meta;
  meta["seed"] = ckpt.metadata.seed;
  meta["epochs"] = ckpt.metadata.epochs;
  meta["cutoff"] = ckpt.metadata.cutoff;
  meta["patch_size"] = ckpt.metadata.patch_size;
  meta["mask_ratio"] = ckpt.metadata.mask_ratio;
  meta["mfr_enabled"] = ckpt.metadata.mfr_enabled;
  header["metadata"] = meta;
  if (!ckpt.run_config.empty()) header["run_config"] = Json::parse(ckpt.run_config);

  Json dir = Json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& [name, t] = ckpt.params[i];
    if (name != specs[i].name || t.shape() != specs[i].shape) {
      throw FormatError(FormatErrorKind::kShapeMismatch, "checkpoint: tensor '" + name + "' " + to_string(t.shape()) +
                                                             " does not match config entry '" + specs[i].name + "' " +
                                                             to_string(specs[i].shape));
    }
    Json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    e["bytes"] = t.size() * sizeof(float);
    dir.push_back(e);
    offset += t.size() * sizeof(float);
  }
  header["tensors"] = dir;

  std::string out = std::string(kMagic) + "\n" + header.dump() + "\n";
  const std::size_t payload_start = out.size();
  out.resize(payload_start + offset);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = ckpt.params[i].second;
    std::memcpy(out.data() + payload_start + dir[i]["offset"].get<std::size_t>(), t.data().data(), t.size() * sizeof(float));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::size_t magic_end = bytes.find('\n');
  const std::string magic = bytes.substr(0, magic_end);
  if (magic.rfind(kMagicPrefix, 0) != 0) throw FormatError(FormatErrorKind::kBadMagic, "checkpoint: bad magic");
  if (magic != kMagic) throw FormatError(FormatErrorKind::kVersionMismatch, "checkpoint: unsupported version '" + magic + "'");
  if (magic_end == std::string::npos) throw FormatError(FormatErrorKind::kTruncated, "checkpoint: truncated before header");

  const std::size_t header_end = bytes.find('\n', magic_end + 1);
  if (header_end == std::string::npos) throw FormatError(FormatErrorKind::kTruncated, "checkpoint: truncated inside header");
  Json header;
  try {
    header = Json::parse(bytes.substr(magic_end + 1, header_end - magic_end - 1));
  } catch (const Json::exception& e) {
    throw FormatError(FormatErrorKind::kMalformed, std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (header.at("format_version").get<int>() != Checkpoint::kFormatVersion) {
      throw FormatError(FormatErrorKind::kVersionMismatch,
                        "checkpoint: header format_version " + header.at("format_version").dump());
    }
    ckpt.config = config_from_json(header.at("config"));
    const Json& meta = header.at("metadata");
    ckpt.metadata.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.metadata.epochs = meta.at("epochs").get<std::size_t>();
    ckpt.metadata.cutoff = meta.at("cutoff").get<std::size_t>();
    ckpt.metadata.patch_size = meta.at("patch_size").get<std::size_t>();
    ckpt.metadata.mask_ratio = meta.at("mask_ratio").get<double>();
    ckpt.metadata.mfr_enabled = meta.at("mfr_enabled").get<bool>();
    if (header.contains("run_config")) ckpt.run_config = header.at("run_config").dump();

    std::vector<ParamSpec> specs;
    try {
      specs = param_specs(ckpt.config);
    } catch (const ConfigError& e) {
      throw FormatError(FormatErrorKind::kShapeMismatch, std::string("checkpoint: ") + e.what());
    }
    const Json& dir = header.at("tensors");
    if (dir.size() != specs.size()) {
      throw FormatError(FormatErrorKind::kShapeMismatch, "checkpoint: tensor directory has " + std::to_string(dir.size()) +
                                                             " entries, config needs " + std::to_string(specs.size()));
    }
    const std::size_t payload_start = header_end + 1;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const Json& e = dir[i];
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<Shape>();
      if (name != specs[i].name || shape != specs[i].shape) {
        throw FormatError(FormatErrorKind::kShapeMismatch, "checkpoint: tensor '" + name + "' " + to_string(shape) +
                                                               " vs config '" + specs[i].name + "' " +
                                                               to_string(specs[i].shape));
      }
      const auto offset = e.at("offset").get<std::size_t>();
      const auto nbytes = e.at("bytes").get<std::size_t>();
      if (nbytes != numel(shape) * sizeof(float)) {
        throw FormatError(FormatErrorKind::kShapeMismatch, "checkpoint: byte count for '" + name + "' disagrees with shape");
      }
      if (payload_start + offset + nbytes > bytes.size()) {
        throw FormatError(FormatErrorKind::kTruncated, "checkpoint: payload truncated in tensor '" + name + "'");
      }
      std::vector<float> data(numel(shape));
      std::memcpy(data.data(), bytes.data() + payload_start + offset, nbytes);
      ckpt.params.emplace_back(name, Tensor<float>(shape, std::move(data)));
    }
  } catch (const Json::exception& e) {
    throw FormatError(FormatErrorKind::kMalformed, std::string("checkpoint: malformed header: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace acmf
