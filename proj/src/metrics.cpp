#include "svmpc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace svmpc {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string percent(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string ConfigId::label() const {
  std::string out = to_string(variant) + ":" + std::to_string(horizon);
  if (controls_per_plan != 1) out += ":" + std::to_string(controls_per_plan);
  return out;
}

ConfigId config_of(const RolloutSummary& row) {
  return {row.variant, row.horizon, row.controls_per_plan};
}

ConfigId parse_config_id(std::string_view text) {
  const std::size_t a = text.find(':');
  if (a == std::string_view::npos) {
    throw ContractViolation("config id '" + std::string(text) + "' must look like variant:h");
  }
  ConfigId id;
  id.variant = parse_variant(text.substr(0, a));
  std::string_view rest = text.substr(a + 1);
  const std::size_t b = rest.find(':');
  auto to_int = [&](std::string_view s, int& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || out < 1) {
      throw ContractViolation("config id '" + std::string(text) + "' has a bad number");
    }
  };
  to_int(rest.substr(0, b), id.horizon);
  if (b != std::string_view::npos) to_int(rest.substr(b + 1), id.controls_per_plan);
  return id;
}

const ConfigMetrics& MetricsReport::at(const ConfigId& id) const {
  for (const ConfigMetrics& m : rows) {
    if (m.id == id) return m;
  }
  throw MetricsError("no rows for configuration " + id.label());
}

MetricsReport compute_metrics(const std::vector<RolloutSummary>& rows, const ConfigId& reference,
                              double safety_tolerance) {
  if (!(safety_tolerance >= 0.0)) throw MetricsError("safety tolerance must be >= 0");
  const auto is_safe = [safety_tolerance](const RolloutSummary& r) { return r.min_l >= -safety_tolerance; };
  std::map<ConfigId, std::map<std::uint64_t, const RolloutSummary*>> by_config;
  for (const RolloutSummary& r : rows) {
    auto& seeds = by_config[config_of(r)];
    if (!seeds.emplace(r.seed, &r).second) {
      throw MetricsError("seed " + std::to_string(r.seed) + " repeats in " + config_of(r).label());
    }
  }
  const auto ref_it = by_config.find(reference);
  if (ref_it == by_config.end()) throw MetricsError("reference " + reference.label() + " has no rows");
  const auto& ref = ref_it->second;

  MetricsReport report;
  report.reference = reference;
  report.safety_tolerance = safety_tolerance;
  for (const auto& [id, seeds] : by_config) {
    if (seeds.size() != ref.size() ||
        !std::equal(seeds.begin(), seeds.end(), ref.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw MetricsError(id.label() + " and " + reference.label() + " cover different seeds");
    }
    ConfigMetrics m;
    m.id = id;
    m.n = static_cast<int>(seeds.size());
    int safe = 0, goal = 0, higher = 0;
    double cost_sum = 0.0;
    std::vector<double> costs;
    for (const auto& [seed, r] : seeds) {
      safe += is_safe(*r);
      goal += r->goal_reached;
      cost_sum += r->cost;
      costs.push_back(r->cost);
      m.fallback_total += r->fallback_count;
      m.rollouts_with_fallback += r->fallback_count > 0;
      const RolloutSummary* other = ref.at(seed);
      if (is_safe(*r) && is_safe(*other)) {
        ++m.comparable;
        higher += r->cost > other->cost;
      } else {
        ++m.excluded;
      }
    }
    m.success_rate = 100.0 * safe / m.n;
    m.goal_rate = 100.0 * goal / m.n;
    m.higher_cost_rate = m.comparable > 0 ? 100.0 * higher / m.comparable
                                          : std::numeric_limits<double>::quiet_NaN();
    m.mean_cost = cost_sum / m.n;
    m.median_cost = median(std::move(costs));
    report.rows.push_back(m);
  }
  return report;
}

std::string format_table(const MetricsReport& report) {
  const std::vector<std::string> head = {"config", "n", "success %", "goal %",
                                         "higher cost % vs " + report.reference.label(),
                                         "comparable", "excluded", "mean cost", "median cost",
                                         "fallbacks"};
  std::vector<std::vector<std::string>> cells;
  for (const ConfigMetrics& m : report.rows) {
    cells.push_back({m.id.label(), std::to_string(m.n), percent(m.success_rate), percent(m.goal_rate),
                     percent(m.higher_cost_rate), std::to_string(m.comparable),
                     std::to_string(m.excluded), number(m.mean_cost), number(m.median_cost),
                     std::to_string(m.fallback_total)});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += "  ";
      const std::string pad(width[c] - row[c].size(), ' ');
      out += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(head);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& row : cells) out += line(row);
  return out;
}

std::string report_json(const MetricsReport& report) {
  using nlohmann::json;
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json rows = json::array();
  for (const ConfigMetrics& m : report.rows) {
    rows.push_back({{"config", m.id.label()},
                    {"variant", to_string(m.id.variant)},
                    {"h", m.id.horizon},
                    {"h_c", m.id.controls_per_plan},
                    {"n", m.n},
                    {"success_rate", m.success_rate},
                    {"goal_rate", m.goal_rate},
                    {"higher_cost_rate", num(m.higher_cost_rate)},
                    {"comparable", m.comparable},
                    {"excluded", m.excluded},
                    {"mean_cost", m.mean_cost},
                    {"median_cost", num(m.median_cost)},
                    {"fallback_total", m.fallback_total},
                    {"rollouts_with_fallback", m.rollouts_with_fallback}});
  }
  return json{{"reference", report.reference.label()}, {"safety_tolerance", report.safety_tolerance}, {"rows", rows}}.dump();
}

}  // namespace svmpc
