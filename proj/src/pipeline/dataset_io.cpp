#include "acmf/dataset_io.hpp"

#include <cstdio>
#include <map>

#include "acmf/tensor_io.hpp"

namespace acmf {

namespace {

using Json = nlohmann::ordered_json;

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame-%03zu.tensor", index);
  return buf;
}

void append_split(Json& frames, const std::filesystem::path& dir, const char* split,
                  const std::vector<VideoClip>& clips) {
  for (const auto& clip : clips) {
    clip.validate();
    const std::filesystem::path rel_dir = std::filesystem::path(split) / clip.video_id;
    std::error_code ec;
    std::filesystem::create_directories(dir / rel_dir, ec);
    if (ec) throw FormatError(FormatErrorKind::kIo, "cannot create " + (dir / rel_dir).string() + ": " + ec.message());
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      const auto rel = rel_dir / frame_name(f);
      save_tensor(clip.frames[f], dir / rel);
      Json e;
      e["split"] = split;
      e["video_id"] = clip.video_id;
      e["frame_index"] = f;
      e["frame_path"] = rel.generic_string();
      e["label"] = clip.label;
      e["family"] = std::string(family_name(clip.family));
      e["subset"] = clip.subset;
      frames.push_back(std::move(e));
    }
  }
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, const nlohmann::ordered_json& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError(FormatErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  Json manifest;
  manifest["format"] = "acmf-dataset";
  manifest["version"] = 1;
  manifest["config"] = config;
  Json frames = Json::array();
  append_split(frames, dir, "train", dataset.train);
  append_split(frames, dir, "test", dataset.test);
  manifest["frames"] = std::move(frames);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  Json manifest;
  try {
    manifest = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw FormatError(FormatErrorKind::kMalformed, path.string() + ": " + e.what());
  }

  LoadedDataset out;
  try {
    if (manifest.at("format").get<std::string>() != "acmf-dataset") {
      throw FormatError(FormatErrorKind::kBadMagic, path.string() + ": not an acmf-dataset manifest");
    }
    if (manifest.at("version").get<int>() != 1) {
      throw FormatError(FormatErrorKind::kVersionMismatch,
                        path.string() + ": unsupported manifest version " + manifest.at("version").dump());
    }
    out.config = manifest.at("config");
    std::map<std::string, std::size_t> index;  // "split/video_id" -> position in its split
    for (const auto& e : manifest.at("frames")) {
      const auto split = e.at("split").get<std::string>();
      if (split != "train" && split != "test") {
        throw FormatError(FormatErrorKind::kMalformed, path.string() + ": unknown split '" + split + "'");
      }
      auto& clips = split == "train" ? out.dataset.train : out.dataset.test;
      const auto id = e.at("video_id").get<std::string>();
      const auto key = split + "/" + id;
      auto it = index.find(key);
      if (it == index.end()) {
        VideoClip clip;
        clip.video_id = id;
        clip.label = e.at("label").get<int>();
        try {
          clip.family = parse_family(e.at("family").get<std::string>());
        } catch (const ConfigError& err) {
          throw FormatError(FormatErrorKind::kMalformed, path.string() + ": " + err.what());
        }
        clip.subset = e.at("subset").get<std::string>();
        clips.push_back(std::move(clip));
        it = index.emplace(key, clips.size() - 1).first;
      }
      VideoClip& clip = clips[it->second];
      if (e.at("frame_index").get<std::size_t>() != clip.frames.size()) {
        throw FormatError(FormatErrorKind::kMalformed, path.string() + ": frames of " + id + " out of order");
      }
      clip.frames.push_back(load_tensor<float>(dir / e.at("frame_path").get<std::string>()));
    }
  } catch (const Json::exception& e) {
    throw FormatError(FormatErrorKind::kMalformed, path.string() + ": " + e.what());
  }
  for (const auto* clips : {&out.dataset.train, &out.dataset.test}) {
    for (const auto& clip : *clips) {
      try {
        clip.validate();
      } catch (const ShapeError& e) {
        throw FormatError(FormatErrorKind::kShapeMismatch, path.string() + ": " + e.what());
      }
    }
  }
  return out;
}

}  // namespace acmf
