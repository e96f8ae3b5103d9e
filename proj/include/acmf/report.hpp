#pragma once

#include "acmf/evaluate.hpp"
#include "json.hpp"

namespace acmf {

// Stable field order. Wall-clock is included only when asked for, so
// reports are byte-identical across re-runs by default.
nlohmann::ordered_json report_to_json(const EvalReport& report, const nlohmann::ordered_json& config,
                                      bool include_timing = false);

}  // namespace acmf
