#include "acmf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "acmf/spectral.hpp"

namespace acmf {

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kNone: return "none";
    case Family::kHiFreqGrid: return "hi-freq-grid";
    case Family::kLoFreqBlend: return "lo-freq-blend";
  }
  return "none";
}

Family parse_family(std::string_view name) {
  if (name == "none") return Family::kNone;
  if (name == "hi-freq-grid") return Family::kHiFreqGrid;
  if (name == "lo-freq-blend") return Family::kLoFreqBlend;
  throw ConfigError("unknown artifact family '" + std::string(name) + "'");
}

void VideoClip::validate() const {
  if (frames.empty() || frames.size() > 50) {
    throw ShapeError("video " + video_id + ": frame count " + std::to_string(frames.size()) + " outside [1, 50]");
  }
  for (const auto& f : frames) {
    if (f.shape() != frames.front().shape()) throw ShapeError("video " + video_id + ": frames have mixed extents");
  }
  if (label != 0 && label != 1) throw ShapeError("video " + video_id + ": label must be 0 or 1");
}

void SynthConfig::validate() const {
  if (frames_per_video == 0 || frames_per_video > 50) throw ConfigError("synth: frames_per_video must be in [1, 50]");
  if (!spectral::is_power_of_two(image_size) || image_size < 8) throw ConfigError("synth: image_size must be a power of two >= 8");
  if (channels != 1 && channels != 3) throw ConfigError("synth: channels must be 1 or 3");
  if (train_videos_per_class == 0 || test_videos_per_class == 0) throw ConfigError("synth: videos per class must be positive");
  if (train_families.empty() || test_families.empty()) throw ConfigError("synth: every split needs at least one family");
  for (Family f : train_families)
    if (f == Family::kNone) throw ConfigError("synth: 'none' is not an artifact family");
  for (Family f : test_families)
    if (f == Family::kNone) throw ConfigError("synth: 'none' is not an artifact family");
}

namespace {

struct Wave {
  double fx, fy, amp, phase;
};

struct Scene {
  std::vector<Wave> waves;
  std::vector<double> texture;  // unit std
  double texture_amp = 0.0;
  std::vector<double> channel_gain;
};

struct Ellipse {
  double cx, cy, rx, ry;
};

constexpr double kMean = 0.5;
constexpr double kStd = 0.15;
constexpr double kFeather = 1.0;
constexpr double kFineNoise = 0.004;

std::vector<double> box_blur(const std::vector<double>& src, std::size_t n) {
  std::vector<double> out(src.size());
  auto clampi = [n](std::ptrdiff_t i) { return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, std::ptrdiff_t(n) - 1)); };
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      double acc = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) acc += src[clampi(std::ptrdiff_t(y) + dy) * n + clampi(std::ptrdiff_t(x) + dx)];
      out[y * n + x] = acc / 9.0;
    }
  return out;
}

void standardize(std::vector<double>& v, double mean, double stddev) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - m) * (x - m);
  const double s = std::sqrt(var / static_cast<double>(v.size()));
  for (double& x : v) x = mean + stddev * (x - m) / (s > 0 ? s : 1.0);
}

Scene make_scene(std::size_t size, std::size_t channels, Rng& rng) {
  Scene s;
  const std::size_t count = 1 + rng.below(8);
  for (std::size_t k = 0; k < count; ++k) {
    Wave w{};
    do {
      w.fx = static_cast<double>(rng.below(5)) - 2.0;
      w.fy = static_cast<double>(rng.below(5)) - 2.0;
    } while (w.fx == 0.0 && w.fy == 0.0);
    w.amp = rng.uniform(0.3, 1.0);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.waves.push_back(w);
  }
  std::vector<double> noise(size * size);
  for (double& v : noise) v = rng.normal();
  noise = box_blur(box_blur(noise, size), size);
  standardize(noise, 0.0, 1.0);
  s.texture = std::move(noise);
  s.texture_amp = rng.uniform(0.2, 0.3);
  s.channel_gain.assign(channels, 1.0);
  for (std::size_t c = 1; c < channels; ++c) s.channel_gain[c] = rng.uniform(0.8, 1.2);
  return s;
}

Ellipse make_ellipse(std::size_t size, Rng& rng) {
  const double n = static_cast<double>(size);
  return {n / 2 + rng.uniform(-n / 10, n / 10), n / 2 + rng.uniform(-n / 10, n / 10), n * rng.uniform(0.18, 0.26),
          n * rng.uniform(0.22, 0.30)};
}

// Single-plane rendering of one frame of a scene.
std::vector<double> render(const Scene& s, std::size_t size, Rng& frame_rng) {
  std::vector<double> jitter(s.waves.size());
  for (double& j : jitter) j = 0.1 * frame_rng.normal();
  std::vector<double> v(size * size);
  const double n = static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double acc = s.texture_amp * s.texture[y * size + x];
      for (std::size_t k = 0; k < s.waves.size(); ++k) {
        const Wave& w = s.waves[k];
        acc += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * double(x) + w.fy * double(y)) / n + w.phase + jitter[k]);
      }
      v[y * size + x] = acc;
    }
  standardize(v, kMean, kStd);
  for (double& x : v) x += kFineNoise * frame_rng.normal();
  return v;
}

std::vector<double> ellipse_weight(const Ellipse& e, std::size_t size) {
  std::vector<double> w(size * size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = (double(x) - e.cx) / e.rx, dy = (double(y) - e.cy) / e.ry;
      const double rho = std::sqrt(dx * dx + dy * dy);
      const double t = std::clamp((rho - (1.0 - kFeather)) / (2.0 * kFeather), 0.0, 1.0);
      w[y * size + x] = 1.0 - t * t * (3.0 - 2.0 * t);
    }
  return w;
}

Tensor<float> to_frame(const std::vector<double>& plane, const Scene& s, std::size_t size) {
  const std::size_t C = s.channel_gain.size();
  Tensor<float> t(Shape{C, size, size});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < size * size; ++i) {
      const double v = kMean + s.channel_gain[c] * (plane[i] - kMean);
      t[c * size * size + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return t;
}

struct FakeRecipe {
  Scene donor;
  Ellipse ellipse;
};

std::vector<double> apply_artifact(const SynthConfig& cfg, Family family, const std::vector<double>& host,
                                   const std::vector<double>& donor, const std::vector<double>& weight) {
  const std::size_t n = cfg.image_size;
  std::vector<double> out = host;
  const double strength = family == Family::kHiFreqGrid ? cfg.grid_family_blend_strength : cfg.blend_strength;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += strength * weight[i] * (donor[i] + cfg.blend_offset - host[i]);
  }
  if (family == Family::kHiFreqGrid) {
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double sign = ((x + y) % 2 == 0) ? 1.0 : -1.0;
        out[y * n + x] += cfg.grid_amplitude * weight[y * n + x] * sign;
      }
  }
  return out;
}

VideoClip make_clip(const SynthConfig& cfg, std::string video_id, int label, Family family, Rng rng) {
  const std::size_t n = cfg.image_size;
  VideoClip clip;
  clip.video_id = std::move(video_id);
  clip.label = label;
  clip.family = label ? family : Family::kNone;
  clip.subset = std::string(family_name(family));

  const Scene host = make_scene(n, cfg.channels, rng);
  const Scene donor = make_scene(n, cfg.channels, rng);
  const Ellipse ellipse = make_ellipse(n, rng);
  const auto weight = ellipse_weight(ellipse, n);
  for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
    Rng frame_rng = Rng::derive(rng.next_u64(), "frame", f);
    auto plane = render(host, n, frame_rng);
    if (label == 1) {
      const auto donor_plane = render(donor, n, frame_rng);
      plane = apply_artifact(cfg, family, plane, donor_plane, weight);
    }
    clip.frames.push_back(to_frame(plane, host, n));
  }
  return clip;
}

std::vector<VideoClip> make_split(const SynthConfig& cfg, std::string_view split, std::size_t per_class,
                                  const std::vector<Family>& families) {
  struct Job {
    std::string id;
    int label;
    Family family;
    Rng rng;
  };
  std::vector<Job> jobs;
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    for (int label = 0; label < 2; ++label) {
      for (std::size_t v = 0; v < per_class; ++v) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.*s-%.*s-%s-%03zu", int(split.size()), split.data(),
                      int(family_name(families[fi]).size()), family_name(families[fi]).data(), label ? "fake" : "real", v);
        const std::string stream = std::string(split) + "/" + std::string(family_name(families[fi]));
        jobs.push_back({buf, label, families[fi], Rng::derive(cfg.seed, stream, std::uint64_t(label), v)});
      }
    }
  }
  std::vector<VideoClip> clips(jobs.size());
  const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    clips[i] = make_clip(cfg, jobs[i].id, jobs[i].label, jobs[i].family, jobs[i].rng);
  }
  return clips;
}

}  // namespace

Dataset synth_dataset(const SynthConfig& config) {
  config.validate();
  Dataset d;
  d.train = make_split(config, "train", config.train_videos_per_class, config.train_families);
  d.test = make_split(config, "test", config.test_videos_per_class, config.test_families);
  return d;
}

FramePair synth_pair(const SynthConfig& cfg, Family family, std::uint64_t stream) {
  cfg.validate();
  const std::size_t n = cfg.image_size;
  Rng rng = Rng::derive(cfg.seed, "pair", stream);
  const Scene host = make_scene(n, cfg.channels, rng);
  const Scene donor = make_scene(n, cfg.channels, rng);
  const auto weight = ellipse_weight(make_ellipse(n, rng), n);
  Rng frame_rng = Rng::derive(rng.next_u64(), "frame", 0);
  const auto plane = render(host, n, frame_rng);
  const auto donor_plane = render(donor, n, frame_rng);
  return {to_frame(plane, host, n), to_frame(apply_artifact(cfg, family, plane, donor_plane, weight), host, n)};
}

FrameSet flatten(const std::vector<VideoClip>& clips) {
  FrameSet fs;
  for (const auto& c : clips)
    for (const auto& f : c.frames) {
      fs.frames.push_back(f);
      fs.labels.push_back(c.label);
    }
  return fs;
}

}  // namespace acmf
