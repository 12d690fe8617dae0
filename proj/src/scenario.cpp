#include "svmpc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace svmpc {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed,
                std::vector<std::string>& problems) {
  if (!obj.is_object()) {
    problems.push_back(where + ": expected an object");
    return;
  }
  std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!known.count(item.key())) problems.push_back(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_range(const json& obj, const char* key, double& lo, double& hi) {
  if (!obj.contains(key)) return;
  const auto r = obj.at(key).get<std::vector<double>>();
  if (r.size() != 2) throw ScenarioError(std::string("'") + key + "' must be [lo, hi]");
  lo = r[0];
  hi = r[1];
}

void read_counts(const json& obj, const char* key, std::array<int, 4>& out) {
  if (!obj.contains(key)) return;
  const auto c = obj.at(key).get<std::vector<int>>();
  if (c.size() != 4) throw ScenarioError(std::string("'") + key + "' must list 4 counts");
  std::copy(c.begin(), c.end(), out.begin());
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

}  // namespace

int Scenario::steps() const { return static_cast<int>(std::lround(duration / dt)); }

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  const Dubins4D::Params& c = s.car;
  require(c.turn_rate_max > 0.0, "model.turn_rate_max must be positive");
  require(c.accel_max > 0.0, "model.accel_max must be positive");
  require(c.speed_lo >= 0.0 && c.speed_lo < c.speed_hi, "model speed range must satisfy 0 <= lo < hi");
  require(c.x_lo < c.x_hi && c.y_lo < c.y_hi, "box ranges must satisfy lo < hi");

  const ObstacleSet obstacles(s.obstacles);
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const Circle& o = s.obstacles[i];
    const std::string tag = "obstacle " + std::to_string(i);
    require(std::isfinite(o.cx) && std::isfinite(o.cy) && o.radius > 0.0,
            tag + ": needs a finite center and a positive radius");
    require(o.cx >= c.x_lo && o.cx <= c.x_hi && o.cy >= c.y_lo && o.cy <= c.y_hi,
            tag + ": center lies outside the box");
  }
  require(s.goal_x >= c.x_lo && s.goal_x <= c.x_hi && s.goal_y >= c.y_lo && s.goal_y <= c.y_hi,
          "goal lies outside the box");
  require(s.obstacles.empty() || obstacles.signed_distance(s.goal_x, s.goal_y) > 0.0,
          "goal lies inside an obstacle");
  require(s.goal_tolerance > 0.0, "goal.tolerance must be positive");

  require(s.duration > 0.0 && s.dt > 0.0, "task.duration and task.dt must be positive");
  if (s.duration > 0.0 && s.dt > 0.0) {
    const double ratio = s.duration / s.dt;
    require(std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio && ratio >= 1.0,
            "task.duration / task.dt must be a positive integer");
  }
  require(s.control_weight >= 0.0, "task.control_weight must be >= 0");
  require(std::isfinite(s.margin) && std::isfinite(s.start_margin), "safety margins must be finite");

  require(s.grid_x[0] <= c.x_lo && s.grid_x[1] >= c.x_hi && s.grid_y[0] <= c.y_lo &&
              s.grid_y[1] >= c.y_hi,
          "grid box is smaller than the simulation box");
  for (int i = 0; i < 4; ++i) {
    require(s.grid_counts[i] >= 2 && s.paper_grid_counts[i] >= 2, "grid counts must be >= 2");
  }
  const ReachabilityOptions& r = s.reachability;
  require(r.tol > 0.0, "reachability.tol must be positive");
  require(r.max_iters >= 1, "reachability.max_iters must be >= 1");
  require(r.cfl > 0.0 && r.cfl <= kCflLimit, "reachability.cfl must be in (0, 1]");
  return problems;
}

Scenario parse_scenario(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }

  Scenario s;
  std::vector<std::string> problems;
  check_keys(doc, "scenario",
             {"schema", "name", "model", "box", "obstacles", "goal", "task", "safety", "grid",
              "reachability"},
             problems);
  if (!problems.empty()) throw ScenarioError(join(problems));
  try {
    if (!doc.contains("schema")) throw ScenarioError("scenario: missing 'schema'");
    const int schema = doc.at("schema").get<int>();
    if (schema != kScenarioSchema) {
      throw ScenarioError("scenario: unsupported schema " + std::to_string(schema));
    }
    read(doc, "name", s.name);
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      check_keys(m, "model", {"name", "turn_rate_max", "accel_max", "speed_lo", "speed_hi"}, problems);
      std::string name = "dubins4d";
      read(m, "name", name);
      if (name != "dubins4d") problems.push_back("model: unsupported model '" + name + "'");
      read(m, "turn_rate_max", s.car.turn_rate_max);
      read(m, "accel_max", s.car.accel_max);
      read(m, "speed_lo", s.car.speed_lo);
      read(m, "speed_hi", s.car.speed_hi);
    }
    if (doc.contains("box")) {
      const json& b = doc.at("box");
      check_keys(b, "box", {"x", "y"}, problems);
      read_range(b, "x", s.car.x_lo, s.car.x_hi);
      read_range(b, "y", s.car.y_lo, s.car.y_hi);
    }
    if (doc.contains("obstacles")) {
      s.obstacles.clear();
      for (const json& o : doc.at("obstacles")) {
        check_keys(o, "obstacle", {"cx", "cy", "radius"}, problems);
        s.obstacles.push_back({o.at("cx").get<double>(), o.at("cy").get<double>(),
                               o.at("radius").get<double>()});
      }
    }
    if (doc.contains("goal")) {
      const json& g = doc.at("goal");
      check_keys(g, "goal", {"x", "y", "tolerance"}, problems);
      read(g, "x", s.goal_x);
      read(g, "y", s.goal_y);
      read(g, "tolerance", s.goal_tolerance);
    }
    if (doc.contains("task")) {
      const json& t = doc.at("task");
      check_keys(t, "task", {"duration", "dt", "control_weight"}, problems);
      read(t, "duration", s.duration);
      read(t, "dt", s.dt);
      read(t, "control_weight", s.control_weight);
    }
    if (doc.contains("safety")) {
      const json& m = doc.at("safety");
      check_keys(m, "safety", {"margin", "start_margin"}, problems);
      read(m, "margin", s.margin);
      read(m, "start_margin", s.start_margin);
    }
    if (doc.contains("grid")) {
      const json& g = doc.at("grid");
      check_keys(g, "grid", {"x", "y", "counts", "paper_scale_counts"}, problems);
      read_range(g, "x", s.grid_x[0], s.grid_x[1]);
      read_range(g, "y", s.grid_y[0], s.grid_y[1]);
      read_counts(g, "counts", s.grid_counts);
      read_counts(g, "paper_scale_counts", s.paper_grid_counts);
    }
    if (doc.contains("reachability")) {
      const json& r = doc.at("reachability");
      check_keys(r, "reachability", {"tol", "max_iters", "cfl", "dissipation"}, problems);
      read(r, "tol", s.reachability.tol);
      read(r, "max_iters", s.reachability.max_iters);
      read(r, "cfl", s.reachability.cfl);
      if (r.contains("dissipation")) {
        s.reachability.dissipation = parse_dissipation(r.at("dissipation").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    problems.push_back(std::string("scenario: ") + e.what());
  } catch (const ContractViolation& e) {
    problems.push_back(std::string("scenario: ") + e.what());
  }
  if (problems.empty()) problems = validate_scenario(s);
  if (!problems.empty()) throw ScenarioError(join(problems));
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string to_json(const Scenario& s) {
  using ojson = nlohmann::ordered_json;
  ojson obstacles = ojson::array();
  for (const Circle& o : s.obstacles) obstacles.push_back({{"cx", o.cx}, {"cy", o.cy}, {"radius", o.radius}});
  const ojson doc = {
      {"schema", kScenarioSchema},
      {"name", s.name},
      {"model",
       {{"name", "dubins4d"},
        {"turn_rate_max", s.car.turn_rate_max},
        {"accel_max", s.car.accel_max},
        {"speed_lo", s.car.speed_lo},
        {"speed_hi", s.car.speed_hi}}},
      {"box", {{"x", {s.car.x_lo, s.car.x_hi}}, {"y", {s.car.y_lo, s.car.y_hi}}}},
      {"obstacles", obstacles},
      {"goal", {{"x", s.goal_x}, {"y", s.goal_y}, {"tolerance", s.goal_tolerance}}},
      {"task", {{"duration", s.duration}, {"dt", s.dt}, {"control_weight", s.control_weight}}},
      {"safety", {{"margin", s.margin}, {"start_margin", s.start_margin}}},
      {"grid",
       {{"x", s.grid_x}, {"y", s.grid_y}, {"counts", s.grid_counts},
        {"paper_scale_counts", s.paper_grid_counts}}},
      {"reachability",
       {{"tol", s.reachability.tol},
        {"max_iters", s.reachability.max_iters},
        {"cfl", s.reachability.cfl},
        {"dissipation", to_string(s.reachability.dissipation)}}},
  };
  return doc.dump(2) + "\n";
}

std::shared_ptr<const Dubins4D> make_model(const Scenario& s) { return std::make_shared<Dubins4D>(s.car); }

ObstacleSet make_obstacles(const Scenario& s) { return ObstacleSet(s.obstacles); }

Grid make_grid(const Scenario& s, bool paper_scale) {
  const std::array<int, 4>& n = paper_scale ? s.paper_grid_counts : s.grid_counts;
  return Grid({{s.grid_x[0], s.grid_x[1], n[0], false},
               {s.grid_y[0], s.grid_y[1], n[1], false},
               {-std::numbers::pi, std::numbers::pi, n[2], true},
               {s.car.speed_lo, s.car.speed_hi, n[3], false}});
}

Task make_task(const Scenario& s) {
  Task task;
  task.model = make_model(s);
  task.obstacles = make_obstacles(s);
  task.goal_x = s.goal_x;
  task.goal_y = s.goal_y;
  task.dt = s.dt;
  task.steps = s.steps();
  task.control_weight = s.control_weight;
  task.goal_tolerance = s.goal_tolerance;
  return task;
}

}  // namespace svmpc
