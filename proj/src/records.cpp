#include "svmpc/records.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace svmpc {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_flag(std::string_view text, bool& out) {
  if (text == "0" || text == "1") {
    out = text == "1";
    return true;
  }
  return false;
}

}  // namespace

RolloutSummary summarize(const RolloutRecord& r) {
  RolloutSummary s;
  s.seed = r.seed;
  s.variant = r.variant;
  s.horizon = r.horizon;
  s.controls_per_plan = r.controls_per_plan;
  s.safe = r.safe;
  s.goal_reached = r.goal_reached;
  s.cost = r.cost;
  s.min_l = r.min_constraint;
  s.fallback_count = r.fallback_count;
  return s;
}

std::string records_csv(const std::vector<RolloutSummary>& rows) {
  std::string out = kRecordsHeader;
  out += '\n';
  for (const RolloutSummary& r : rows) {
    out += std::to_string(r.seed) + ',' + to_string(r.variant) + ',' + std::to_string(r.horizon) + ',' +
           std::to_string(r.controls_per_plan) + ',' + (r.safe ? '1' : '0') + ',' +
           (r.goal_reached ? '1' : '0') + ',' + fmt(r.cost) + ',' + fmt(r.min_l) + ',' +
           std::to_string(r.fallback_count) + '\n';
  }
  return out;
}

std::vector<RolloutSummary> parse_records_csv(std::string_view text) {
  std::vector<RolloutSummary> rows;
  int line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return RecordsError("records line " + std::to_string(line_no) + ": " + why);
    };
    if (!header_seen) {
      if (line != kRecordsHeader) throw fail("expected header '" + std::string(kRecordsHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 9) throw fail("expected 9 fields, got " + std::to_string(f.size()));
    RolloutSummary r;
    try {
      r.variant = parse_variant(f[1]);
    } catch (const ContractViolation& e) {
      throw fail(e.what());
    }
    if (!parse_number(f[0], r.seed)) throw fail("bad seed");
    if (!parse_number(f[2], r.horizon) || r.horizon < 1) throw fail("bad h");
    if (!parse_number(f[3], r.controls_per_plan) || r.controls_per_plan < 1) throw fail("bad h_c");
    if (!parse_flag(f[4], r.safe)) throw fail("bad safe flag");
    if (!parse_flag(f[5], r.goal_reached)) throw fail("bad goal_reached flag");
    if (!parse_number(f[6], r.cost)) throw fail("bad cost");
    if (!parse_number(f[7], r.min_l)) throw fail("bad min_l");
    if (!parse_number(f[8], r.fallback_count) || r.fallback_count < 0) throw fail("bad fallback_count");
    rows.push_back(r);
  }
  if (!header_seen) throw RecordsError("records: empty file");
  return rows;
}

std::vector<RolloutSummary> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RecordsError("cannot open records file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_records_csv(text.str());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string trajectory_csv(const RolloutRecord& r, double dt) {
  std::string out = "k,t,x,y,theta,v,u_turn,u_accel,l,V_s\n";
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    const State& x = r.states[k];
    out += std::to_string(k) + ',' + fmt(static_cast<double>(k) * dt);
    for (int i = 0; i < x.size(); ++i) out += ',' + fmt(x[i]);
    if (k < r.controls.size()) {
      for (int j = 0; j < r.controls[k].size(); ++j) out += ',' + fmt(r.controls[k][j]);
    } else {
      out += ",,";
    }
    out += ',' + fmt(r.constraint_values[k]) + ',' + fmt(r.safety_values[k]) + '\n';
  }
  return out;
}

std::string trajectory_file_name(const RolloutRecord& r) {
  return to_string(r.variant) + "_h" + std::to_string(r.horizon) + "_hc" +
         std::to_string(r.controls_per_plan) + "_seed" + std::to_string(r.seed) + ".csv";
}

}  // namespace svmpc
