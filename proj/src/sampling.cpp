#include "svmpc/sampling.hpp"

#include <numbers>
#include <string>

namespace svmpc {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxBlock philox4x32(PhiloxBlock c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

double uniform_from_bits(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;
}

State draw_state(const Scenario& s, std::uint64_t stream, std::uint64_t draw) {
  const PhiloxKey key{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  const auto lo = static_cast<std::uint32_t>(draw);
  const auto hi = static_cast<std::uint32_t>(draw >> 32);
  const PhiloxBlock a = philox4x32({lo, hi, 0, 0}, key);
  const PhiloxBlock b = philox4x32({lo, hi, 1, 0}, key);
  auto lerp = [](double lo_v, double hi_v, double u) { return lo_v + (hi_v - lo_v) * u; };
  const Dubins4D::Params& c = s.car;
  State x(4);
  x << lerp(c.x_lo, c.x_hi, uniform_from_bits(a[0], a[1])),
      lerp(c.y_lo, c.y_hi, uniform_from_bits(a[2], a[3])),
      lerp(-std::numbers::pi, std::numbers::pi, uniform_from_bits(b[0], b[1])),
      lerp(c.speed_lo, c.speed_hi, uniform_from_bits(b[2], b[3]));
  return x;
}

std::vector<State> sample_initial_states(const Scenario& scenario, const SafetyOracle& oracle, int n,
                                         std::uint64_t seed, double min_value) {
  if (n < 1) throw ContractViolation("sample_initial_states: n must be >= 1");
  std::vector<State> starts;
  starts.reserve(n);
  std::uint64_t total = 0;
  auto give_up = [&] {
    return total >= kRejectionWindow &&
           static_cast<double>(starts.size()) < kMinAcceptance * static_cast<double>(total);
  };
  for (int i = 0; i < n; ++i) {
    for (std::uint64_t draw = 0;; ++draw) {
      State x = draw_state(scenario, seed + static_cast<std::uint64_t>(i), draw);
      ++total;
      if (oracle.value(x) >= min_value) {
        starts.push_back(std::move(x));
        break;
      }
      if (give_up()) {
        throw SamplingError("scenario infeasible: " + std::to_string(starts.size()) + " of " +
                            std::to_string(total) + " draws have V_s >= " + std::to_string(min_value));
      }
    }
  }
  return starts;
}

}  // namespace svmpc
