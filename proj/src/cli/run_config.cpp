#include "acmf/run_config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "acmf/tensor_io.hpp"

namespace acmf {

namespace {

using Json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(expected));
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "an unsigned integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<Family> parse_families(std::string_view key, std::string_view v) {
  std::vector<Family> out;
  for (auto item : split_list(v)) {
    try {
      const Family f = parse_family(item);
      if (f == Family::kNone) bad_value(key, v, "a list of artifact families");
      out.push_back(f);
    } catch (const ConfigError&) {
      bad_value(key, v, "a list of artifact families");
    }
  }
  if (out.empty()) bad_value(key, v, "a non-empty list of artifact families");
  return out;
}

Json families_json(const std::vector<Family>& fs) {
  std::string s;
  for (std::size_t i = 0; i < fs.size(); ++i) s += (i ? "," : "") + std::string(family_name(fs[i]));
  return s;
}

}  // namespace

struct RunConfigAccess {
  struct Entry {
    const char* key;
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<Json(const RunConfig&)> get;
  };

  static const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = build();
    return entries;
  }

  template <typename Member>
  static Entry size_entry(const char* key, Member member) {
    return {key, [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_u64(k, v); },
            [member](const RunConfig& c) { return Json(member(const_cast<RunConfig&>(c))); }};
  }
  template <typename Member>
  static Entry double_entry(const char* key, Member member) {
    return {key, [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); },
            [member](const RunConfig& c) { return Json(member(const_cast<RunConfig&>(c))); }};
  }
  template <typename Member>
  static Entry bool_entry(const char* key, Member member) {
    return {key, [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); },
            [member](const RunConfig& c) { return Json(member(const_cast<RunConfig&>(c))); }};
  }
  static Entry seed_entry(const char* key, std::optional<std::uint64_t> RunConfig::*member) {
    return {key, [member](RunConfig& c, std::string_view k, std::string_view v) { c.*member = parse_u64(k, v); },
            [member](const RunConfig& c) { return Json((c.*member).value_or(c.seed_)); }};
  }

  static std::vector<Entry> build() {
    std::vector<Entry> e;
    e.push_back(size_entry("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed_; }));

    e.push_back(seed_entry("synth.seed", &RunConfig::synth_seed_));
    e.push_back(size_entry("synth.train_videos_per_class",
                           [](RunConfig& c) -> std::size_t& { return c.synth_.train_videos_per_class; }));
    e.push_back(size_entry("synth.test_videos_per_class",
                           [](RunConfig& c) -> std::size_t& { return c.synth_.test_videos_per_class; }));
    e.push_back(size_entry("synth.frames_per_video", [](RunConfig& c) -> std::size_t& { return c.synth_.frames_per_video; }));
    e.push_back(size_entry("synth.image_size", [](RunConfig& c) -> std::size_t& { return c.synth_.image_size; }));
    e.push_back(size_entry("synth.channels", [](RunConfig& c) -> std::size_t& { return c.synth_.channels; }));
    e.push_back({"synth.train_families",
                 [](RunConfig& c, std::string_view k, std::string_view v) { c.synth_.train_families = parse_families(k, v); },
                 [](const RunConfig& c) { return families_json(c.synth_.train_families); }});
    e.push_back({"synth.test_families",
                 [](RunConfig& c, std::string_view k, std::string_view v) { c.synth_.test_families = parse_families(k, v); },
                 [](const RunConfig& c) { return families_json(c.synth_.test_families); }});
    e.push_back(double_entry("synth.grid_amplitude", [](RunConfig& c) -> double& { return c.synth_.grid_amplitude; }));
    e.push_back(double_entry("synth.blend_strength", [](RunConfig& c) -> double& { return c.synth_.blend_strength; }));
    e.push_back(double_entry("synth.blend_offset", [](RunConfig& c) -> double& { return c.synth_.blend_offset; }));
    e.push_back(double_entry("synth.grid_family_blend_strength",
                             [](RunConfig& c) -> double& { return c.synth_.grid_family_blend_strength; }));

    e.push_back(size_entry("model.stem_channels", [](RunConfig& c) -> std::size_t& { return c.stem_; }));
    e.push_back(size_entry("model.block1_channels", [](RunConfig& c) -> std::size_t& { return c.block1_; }));
    e.push_back(size_entry("model.block2_channels", [](RunConfig& c) -> std::size_t& { return c.block2_; }));

    e.push_back(seed_entry("train.seed", &RunConfig::train_seed_));
    e.push_back(size_entry("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train_.epochs; }));
    e.push_back(size_entry("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train_.batch_size; }));
    e.push_back(size_entry("train.cutoff", [](RunConfig& c) -> std::size_t& { return c.train_.cutoff; }));
    e.push_back(size_entry("train.patch_size", [](RunConfig& c) -> std::size_t& { return c.train_.patch_size; }));
    e.push_back(double_entry("train.mask_ratio", [](RunConfig& c) -> double& { return c.train_.mask_ratio; }));
    e.push_back(bool_entry("train.mfr_enabled", [](RunConfig& c) -> bool& { return c.train_.mfr_enabled; }));
    e.push_back(double_entry("train.lr", [](RunConfig& c) -> double& { return c.train_.adam.lr; }));
    e.push_back(double_entry("train.beta1", [](RunConfig& c) -> double& { return c.train_.adam.beta1; }));
    e.push_back(double_entry("train.beta2", [](RunConfig& c) -> double& { return c.train_.adam.beta2; }));
    e.push_back(double_entry("train.epsilon", [](RunConfig& c) -> double& { return c.train_.adam.epsilon; }));

    e.push_back({"refine.enabled",
                 [](RunConfig& c, std::string_view k, std::string_view v) { c.refine_enabled_ = parse_bool(k, v); },
                 [](const RunConfig& c) { return Json(c.refine_enabled_ && c.refine_.rounds > 0); }});
    e.push_back(size_entry("refine.rounds", [](RunConfig& c) -> std::size_t& { return c.refine_.rounds; }));
    e.push_back(double_entry("refine.lr", [](RunConfig& c) -> double& { return c.refine_.lr; }));
    e.push_back(size_entry("refine.reference_frames", [](RunConfig& c) -> std::size_t& { return c.refine_.reference_frames; }));
    e.push_back(seed_entry("refine.reference_seed", &RunConfig::reference_seed_));
    e.push_back({"refine.scope",
                 [](RunConfig& c, std::string_view, std::string_view v) { c.refine_.scope = parse_scope(v); },
                 [](const RunConfig& c) { return Json(std::string(scope_name(c.refine_.scope))); }});
    e.push_back(bool_entry("refine.recompute_reference",
                           [](RunConfig& c) -> bool& { return c.refine_.recompute_reference; }));

    e.push_back({"eval.perturbations",
                 [](RunConfig& c, std::string_view, std::string_view v) {
                   c.perturbations_.clear();
                   for (auto item : split_list(v)) c.perturbations_.push_back(parse_perturb(item));
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.perturbations_.size(); ++i)
                     s += (i ? "," : "") + std::string(perturb_name(c.perturbations_[i]));
                   return Json(s.empty() ? "none" : s);
                 }});
    e.push_back(seed_entry("eval.perturb_seed", &RunConfig::perturb_seed_));
    e.push_back(bool_entry("eval.timing", [](RunConfig& c) -> bool& { return c.timing_; }));
    return e;
  }
};

RunConfig::RunConfig() = default;

void RunConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& entry : RunConfigAccess::registry()) {
    if (key == entry.key) {
      entry.set(*this, key, value);
      explicit_.insert(std::string(key));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::parse(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      set(line.substr(0, eq), line.substr(eq + 1));
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  parse(text, path.string());
}

void RunConfig::require(std::string_view key) const {
  if (!has(key)) throw ConfigError("missing required config key '" + std::string(key) + "'");
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& e : RunConfigAccess::registry()) out.emplace_back(e.key);
  return out;
}

SynthConfig RunConfig::synth() const {
  SynthConfig s = synth_;
  s.seed = synth_seed_.value_or(seed_);
  s.validate();
  return s;
}

ModelConfig RunConfig::model(std::size_t channels, std::size_t input_size) const {
  ModelConfig m;
  m.channels = channels;
  m.input_size = input_size;
  m.stem_channels = stem_;
  m.block1_channels = block1_;
  m.block2_channels = block2_;
  m.validate();
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t = train_;
  t.seed = train_seed_.value_or(seed_);
  t.validate();
  return t;
}

std::optional<RefineConfig> RunConfig::refine() const {
  if (!refine_enabled_ || refine_.rounds == 0) return std::nullopt;
  RefineConfig r = refine_;
  r.reference_seed = reference_seed_.value_or(seed_);
  r.validate();
  return r;
}

EvalOptions RunConfig::eval() const {
  EvalOptions o;
  o.refine = refine();
  o.perturbations = perturbations_;
  o.perturb_seed = perturb_seed_.value_or(seed_);
  return o;
}

nlohmann::ordered_json RunConfig::resolved() const {
  // Inactive refinement settings have no effect on any output, so they are not echoed.
  const bool refining = refine().has_value();
  Json j = Json::object();
  for (const auto& e : RunConfigAccess::registry()) {
    const std::string_view key = e.key;
    if (!refining && key.starts_with("refine.") && key != "refine.enabled") continue;
    j[e.key] = e.get(*this);
  }
  return j;
}

}  // namespace acmf
