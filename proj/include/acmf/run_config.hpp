#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "acmf/evaluate.hpp"
#include "acmf/model.hpp"
#include "acmf/refine.hpp"
#include "acmf/synth.hpp"
#include "acmf/train.hpp"
#include "json.hpp"

namespace acmf {

// Flat `key = value` configuration with dotted keys and `#` comments.
//
//   seed                       master seed; synth.seed, train.seed,
//                              refine.reference_seed and eval.perturb_seed
//                              default to it
//   synth.*, model.*, train.*, refine.*, eval.*
//
// Unknown keys and unparsable values raise ConfigError naming the key.
class RunConfig {
 public:
  RunConfig();

  void set(std::string_view key, std::string_view value);
  // `key=value`
  void apply_override(std::string_view assignment);
  void parse(std::string_view text, std::string_view origin = "config");
  void load_file(const std::filesystem::path& path);

  bool has(std::string_view key) const { return explicit_.count(std::string(key)) > 0; }
  void require(std::string_view key) const;

  static std::vector<std::string> keys();

  std::uint64_t seed() const { return seed_; }
  SynthConfig synth() const;
  ModelConfig model(std::size_t channels, std::size_t input_size) const;
  TrainConfig train() const;
  // Empty when refinement is disabled or runs zero rounds.
  std::optional<RefineConfig> refine() const;
  EvalOptions eval() const;
  bool timing() const { return timing_; }

  // Every key with its effective value, in registry order. refine.* keys
  // other than refine.enabled are left out while refinement is inactive.
  nlohmann::ordered_json resolved() const;

 private:
  friend struct RunConfigAccess;

  std::uint64_t seed_ = 1;
  std::optional<std::uint64_t> synth_seed_, train_seed_, reference_seed_, perturb_seed_;
  SynthConfig synth_;
  std::size_t stem_ = 16, block1_ = 32, block2_ = 64;
  TrainConfig train_;
  bool refine_enabled_ = false;
  RefineConfig refine_;
  std::vector<PerturbKind> perturbations_;
  bool timing_ = false;
  std::set<std::string> explicit_;
};

}  // namespace acmf
