#pragma once

#include <span>
#include <vector>

namespace svmpc {

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

/// Union of circular obstacles in the x-y plane. The constraint function is the
/// signed distance to the union: positive outside, negative inside. Only the
/// first two state components (x, y) are read.
class ObstacleSet {
 public:
  ObstacleSet() = default;
  explicit ObstacleSet(std::vector<Circle> circles);

  const std::vector<Circle>& circles() const { return circles_; }
  bool empty() const { return circles_.empty(); }

  /// l(x) = min over circles of (|p - c| - r). +inf when there are no obstacles.
  double signed_distance(double px, double py) const;

  /// Signed distance and its (x, y) gradient; the gradient is taken from the
  /// closest circle. At a circle center the gradient is (1, 0).
  double signed_distance(double px, double py, double& gx, double& gy) const;

 private:
  std::vector<Circle> circles_;
};

}  // namespace svmpc
