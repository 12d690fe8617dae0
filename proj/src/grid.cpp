#include "svmpc/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace svmpc {

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || static_cast<int>(axes_.size()) > kMaxStateDim) {
    throw ContractViolation("grid: dimension must be in [1, " + std::to_string(kMaxStateDim) + "]");
  }
  const std::size_t nd = axes_.size();
  spacing_.resize(nd);
  strides_.resize(nd);
  node_count_ = 1;
  for (std::size_t i = 0; i < nd; ++i) {
    const Axis& a = axes_[i];
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || !(a.lo < a.hi)) {
      throw ContractViolation("grid: axis " + std::to_string(i) + " requires finite lo < hi");
    }
    if (a.count < 2) {
      throw ContractViolation("grid: axis " + std::to_string(i) + " requires count >= 2");
    }
    spacing_[i] = a.periodic ? (a.hi - a.lo) / a.count : (a.hi - a.lo) / (a.count - 1);
    if (node_count_ > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(a.count)) {
      throw ContractViolation("grid: node count overflows");
    }
    node_count_ *= static_cast<std::size_t>(a.count);
  }
  std::size_t stride = 1;
  for (std::size_t i = nd; i-- > 0;) {
    strides_[i] = stride;
    stride *= static_cast<std::size_t>(axes_[i].count);
  }
}

std::size_t Grid::flat_index(const std::vector<int>& index) const {
  std::size_t flat = 0;
  for (int i = 0; i < ndims(); ++i) flat += static_cast<std::size_t>(index[i]) * strides_[i];
  return flat;
}

std::vector<int> Grid::multi_index(std::size_t flat) const {
  std::vector<int> index(axes_.size());
  for (int i = 0; i < ndims(); ++i) {
    index[i] = static_cast<int>(flat / strides_[i]);
    flat %= strides_[i];
  }
  return index;
}

State Grid::node(std::size_t flat) const {
  State x(ndims());
  for (int i = 0; i < ndims(); ++i) {
    x[i] = coordinate(i, static_cast<int>(flat / strides_[i]));
    flat %= strides_[i];
  }
  return x;
}

bool Grid::operator==(const Grid& other) const {
  if (axes_.size() != other.axes_.size()) return false;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    const Axis& a = axes_[i];
    const Axis& b = other.axes_[i];
    if (a.lo != b.lo || a.hi != b.hi || a.count != b.count || a.periodic != b.periodic) return false;
  }
  return true;
}

ValueField::ValueField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.node_count()) {
    throw ContractViolation("value field: values length does not match grid node count");
  }
}

ValueField::ValueField(Grid g, double fill) : grid(std::move(g)), values(grid.node_count(), fill) {}

}  // namespace svmpc
