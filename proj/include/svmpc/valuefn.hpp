#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "svmpc/grid.hpp"

namespace svmpc {

struct Interpolation {
  double value = 0.0;
  bool extrapolated = false;  // a non-periodic coordinate was clamped onto the grid box
};

struct ValueAndGradient {
  double value = 0.0;
  Costate gradient;
  bool extrapolated = false;
};

/// Multilinear interpolation over the 2^n nodes of the cell containing x.
/// Periodic axes wrap; out-of-box coordinates on other axes are clamped.
/// Throws ContractViolation on NaN input or dimension mismatch.
Interpolation interpolate_ex(const ValueField& field, std::span<const double> x);
double interpolate(const ValueField& field, const State& x);

/// Value and gradient of the multilinear interpolant. The gradient is constant
/// along each axis within a cell; on a cell face the lower-index cell is used.
/// Clamped axes report the slope of the boundary cell.
ValueAndGradient value_and_gradient(const ValueField& field, std::span<const double> x);
Costate gradient(const ValueField& field, const State& x);

/// Read-only view of a safety value function with a safety margin.
class SafetyOracle {
 public:
  SafetyOracle(std::shared_ptr<const ValueField> field, double margin = 0.0);

  const ValueField& field() const { return *field_; }
  double margin() const { return margin_; }

  double value(const State& x) const { return interpolate(*field_, x); }
  ValueAndGradient value_and_gradient(const State& x) const;
  /// V(x) >= margin.
  bool is_safe(const State& x) const { return value(x) >= margin_; }

 private:
  std::shared_ptr<const ValueField> field_;
  double margin_;
};

// ---------------------------------------------------------------------------
// HJVF value files: "HJVF", u32 version, u32 ndims, per axis
// {f64 lo, f64 hi, u32 count, u8 periodic}, then f64 values (row-major, last
// axis fastest). Everything little-endian.

inline constexpr std::uint32_t kValueFileVersion = 1;

class ValueFileError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, VersionMismatch, Truncated, BadHeader };

  ValueFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string encode_value_field(const ValueField& field);
ValueField decode_value_field(std::string_view bytes);

void save_value_field(const ValueField& field, const std::filesystem::path& path);
ValueField load_value_field(const std::filesystem::path& path);

}  // namespace svmpc
