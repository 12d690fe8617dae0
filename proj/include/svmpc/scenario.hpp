#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svmpc/dynamics.hpp"
#include "svmpc/grid.hpp"
#include "svmpc/mpc.hpp"
#include "svmpc/obstacles.hpp"
#include "svmpc/reachability.hpp"

namespace svmpc {

inline constexpr int kScenarioSchema = 1;

/// Thrown for unreadable, malformed or invalid scenario documents. what()
/// lists every problem found, one per line.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dubins car task in a box with circular obstacles. The member defaults are
/// the default scenario. Every field is written out by to_json so that a
/// scenario file is self-describing.
struct Scenario {
  std::string name = "default";

  Dubins4D::Params car;  // control bounds, speed range, simulation box
  std::vector<Circle> obstacles{{-1.2, 0.8, 0.6}, {0.3, -0.5, 0.6}, {1.5, 1.2, 0.6}};
  double goal_x = 2.5;
  double goal_y = 2.5;
  double goal_tolerance = 0.2;

  double duration = 2.0;  // T [s]
  double dt = 0.01;
  double control_weight = 1e-3;

  double margin = 0.02;        // terminal constraint V_s >= margin
  double start_margin = 0.05;  // sampled starts satisfy V_s >= start_margin

  // Value grid over x, y, heading [-pi, pi) and speed [speed_lo, speed_hi].
  std::array<double, 2> grid_x{-4.0, 4.0};
  std::array<double, 2> grid_y{-4.0, 4.0};
  std::array<int, 4> grid_counts{41, 41, 41, 21};
  std::array<int, 4> paper_grid_counts{50, 50, 50, 30};

  ReachabilityOptions reachability{1e-4, 2000, 0.5, 1, Dissipation::Local};

  /// Number of closed-loop steps K = T / dt.
  int steps() const;
};

/// Problems with the scenario, empty when it is valid.
std::vector<std::string> validate_scenario(const Scenario& scenario);

/// Parses and validates. Missing keys keep the defaults of Scenario; unknown
/// keys are errors.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);
std::string to_json(const Scenario& scenario);

std::shared_ptr<const Dubins4D> make_model(const Scenario& scenario);
ObstacleSet make_obstacles(const Scenario& scenario);
Grid make_grid(const Scenario& scenario, bool paper_scale = false);
Task make_task(const Scenario& scenario);

}  // namespace svmpc
