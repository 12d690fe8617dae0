#pragma once

#include <cstddef>
#include <vector>

#include "svmpc/types.hpp"

namespace svmpc {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;
  bool periodic = false;
};

/// Rectilinear grid. Non-periodic axes place nodes at lo + i * (hi - lo) / (count - 1);
/// periodic axes at lo + i * (hi - lo) / count, with hi identified with lo.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes);

  int ndims() const { return static_cast<int>(axes_.size()); }
  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(int i) const { return axes_[i]; }

  double spacing(int i) const { return spacing_[i]; }
  double coordinate(int axis, int index) const { return axes_[axis].lo + index * spacing_[axis]; }

  std::size_t node_count() const { return node_count_; }
  /// Flat-index stride of each axis (row-major, last axis fastest).
  std::size_t stride(int i) const { return strides_[i]; }

  std::size_t flat_index(const std::vector<int>& index) const;
  std::vector<int> multi_index(std::size_t flat) const;
  State node(std::size_t flat) const;

  bool operator==(const Grid& other) const;

 private:
  std::vector<Axis> axes_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t node_count_ = 0;
};

/// Node values over a grid.
struct ValueField {
  Grid grid;
  std::vector<double> values;

  ValueField() = default;
  ValueField(Grid g, std::vector<double> v);
  explicit ValueField(Grid g, double fill = 0.0);

  bool operator==(const ValueField& other) const = default;
};

}  // namespace svmpc
