#pragma once

#include <compare>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svmpc/records.hpp"

namespace svmpc {

struct ConfigId {
  Variant variant = Variant::SafetyValue;
  int horizon = 20;
  int controls_per_plan = 1;

  auto operator<=>(const ConfigId&) const = default;
  /// "safety-value:20", with ":h_c" appended when h_c != 1.
  std::string label() const;
};

ConfigId config_of(const RolloutSummary& row);
/// Parses "variant:h" or "variant:h:h_c". Throws ContractViolation.
ConfigId parse_config_id(std::string_view text);

/// Rollouts whose min l is within this of zero still count as safe; the slack
/// absorbs the trajectory optimizer's feasibility tolerance.
inline constexpr double kSafetyTolerance = 1e-3;

struct ConfigMetrics {
  ConfigId id;
  int n = 0;
  double success_rate = 0.0;  // % with min l >= -safety_tolerance
  double goal_rate = 0.0;     // % goal reached
  // % of comparable trials whose cost is strictly higher than the reference;
  // NaN when no trial is comparable. Trials where either rollout is unsafe
  // (by the same tolerance) are excluded.
  double higher_cost_rate = 0.0;
  int comparable = 0;
  int excluded = 0;
  double mean_cost = 0.0;
  double median_cost = 0.0;
  int fallback_total = 0;
  int rollouts_with_fallback = 0;
};

struct MetricsReport {
  ConfigId reference;
  double safety_tolerance = kSafetyTolerance;
  std::vector<ConfigMetrics> rows;  // sorted by (variant, h, h_c)

  const ConfigMetrics& at(const ConfigId& id) const;
};

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws MetricsError when the reference is missing, a seed repeats within a
/// configuration, or two configurations cover different seeds.
MetricsReport compute_metrics(const std::vector<RolloutSummary>& rows, const ConfigId& reference,
                              double safety_tolerance = kSafetyTolerance);

std::string format_table(const MetricsReport& report);
std::string report_json(const MetricsReport& report);

}  // namespace svmpc
