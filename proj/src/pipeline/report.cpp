#include "acmf/report.hpp"

namespace acmf {

namespace {

using Json = nlohmann::ordered_json;

Json auc_json(const AucSummary& s) {
  Json j;
  j["auc"] = s.overall;
  Json fam = Json::object();
  for (const auto& [name, value] : s.by_family) fam[name] = value;
  j["auc_by_family"] = std::move(fam);
  return j;
}

}  // namespace

nlohmann::ordered_json report_to_json(const EvalReport& report, const nlohmann::ordered_json& config,
                                      bool include_timing) {
  Json j;
  j["format"] = "acmf-eval-report";
  j["version"] = 1;
  j["config"] = config;
  if (report.refine) {
    Json r;
    r["rounds"] = report.refine->rounds;
    r["lr"] = report.refine->lr;
    r["reference_frames"] = report.refine->reference_frames;
    r["reference_seed"] = report.refine->reference_seed;
    r["scope"] = std::string(scope_name(report.refine->scope));
    r["recompute_reference"] = report.refine->recompute_reference;
    j["refine"] = std::move(r);
  } else {
    j["refine"] = nullptr;
  }
  j["video_count"] = report.videos.size();
  const Json summary = auc_json(report.auc);
  j["auc"] = summary["auc"];
  j["auc_by_family"] = summary["auc_by_family"];

  std::size_t failures = 0, decreased = 0;
  Json videos = Json::array();
  for (const auto& v : report.videos) {
    Json e;
    e["video_id"] = v.video_id;
    e["subset"] = v.subset;
    e["family"] = std::string(family_name(v.family));
    e["label"] = v.label;
    e["probability"] = v.probability;
    if (report.refine) {
      e["fac_before"] = v.fac_trace.empty() ? Json(nullptr) : Json(v.fac_trace.front());
      e["fac_after"] = v.fac_trace.empty() ? Json(nullptr) : Json(v.fac_trace.back());
      e["fac_trace"] = v.fac_trace;
      e["refine_failed"] = v.refine_failed;
      if (v.refine_failed) e["failure"] = v.failure;
    }
    failures += v.refine_failed;
    decreased += v.fac_trace.size() > 1 && v.fac_trace.back() < v.fac_trace.front();
    videos.push_back(std::move(e));
  }
  if (report.refine) {
    j["refine_failures"] = failures;
    j["fac_decreased"] = decreased;
  }
  j["videos"] = std::move(videos);

  Json perturbations = Json::object();
  for (const auto& [name, s] : report.perturbations) perturbations[name] = auc_json(s);
  j["perturbations"] = std::move(perturbations);
  if (include_timing) j["wall_clock_seconds"] = report.wall_clock_seconds;
  return j;
}

}  // namespace acmf
