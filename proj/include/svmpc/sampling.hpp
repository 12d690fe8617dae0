#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "svmpc/scenario.hpp"
#include "svmpc/valuefn.hpp"

namespace svmpc {

/// Philox4x32-10 counter-based generator.
using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxBlock philox4x32(PhiloxBlock counter, PhiloxKey key);

/// Uniform double in [0, 1) from the top 53 bits of (hi, lo).
double uniform_from_bits(std::uint32_t hi, std::uint32_t lo);

/// Draw number `draw` of stream `stream`: uniform over the box x [x_lo, x_hi],
/// y [y_lo, y_hi], heading [-pi, pi) and speed [speed_lo, speed_hi].
State draw_state(const Scenario& scenario, std::uint64_t stream, std::uint64_t draw);

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kRejectionWindow = 1000000;
inline constexpr double kMinAcceptance = 1e-3;

/// Start i is the first draw of stream seed + i with V_s >= min_value, so the
/// list for n is a prefix of the list for any larger n. Throws SamplingError
/// once 1e6 draws have been made with fewer than 0.1% accepted.
std::vector<State> sample_initial_states(const Scenario& scenario, const SafetyOracle& oracle, int n,
                                         std::uint64_t seed, double min_value = 0.05);

}  // namespace svmpc
