#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svmpc/mpc.hpp"

namespace svmpc {

/// One row of the records CSV.
struct RolloutSummary {
  std::uint64_t seed = 0;
  Variant variant = Variant::SafetyValue;
  int horizon = 0;
  int controls_per_plan = 1;
  bool safe = false;
  bool goal_reached = false;
  double cost = 0.0;
  double min_l = 0.0;
  int fallback_count = 0;

  bool operator==(const RolloutSummary&) const = default;
};

RolloutSummary summarize(const RolloutRecord& record);

class RecordsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kRecordsHeader =
    "seed,variant,h,h_c,safe,goal_reached,cost,min_l,fallback_count";

/// Header plus one line per row; floats use %.17g, flags 0/1.
std::string records_csv(const std::vector<RolloutSummary>& rows);
/// Throws RecordsError with the offending line number on malformed input.
std::vector<RolloutSummary> parse_records_csv(std::string_view text);

std::vector<RolloutSummary> load_records(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// k, t, x, y, theta, v, u_turn, u_accel, l, V_s. The control columns of the
/// last row (k = K) are empty.
std::string trajectory_csv(const RolloutRecord& record, double dt);
/// <variant>_h<h>_hc<h_c>_seed<seed>.csv
std::string trajectory_file_name(const RolloutRecord& record);

}  // namespace svmpc
