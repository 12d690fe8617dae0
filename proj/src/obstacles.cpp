#include "svmpc/obstacles.hpp"

#include <cmath>
#include <limits>

#include "svmpc/types.hpp"

namespace svmpc {

ObstacleSet::ObstacleSet(std::vector<Circle> circles) : circles_(std::move(circles)) {
  for (const Circle& c : circles_) {
    if (!(c.radius > 0.0) || !std::isfinite(c.cx) || !std::isfinite(c.cy)) {
      throw ContractViolation("obstacle radius must be positive and center finite");
    }
  }
}

double ObstacleSet::signed_distance(double px, double py) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Circle& c : circles_) {
    const double d = std::hypot(px - c.cx, py - c.cy) - c.radius;
    if (d < best) best = d;
  }
  return best;
}

double ObstacleSet::signed_distance(double px, double py, double& gx, double& gy) const {
  double best = std::numeric_limits<double>::infinity();
  gx = 0.0;
  gy = 0.0;
  for (const Circle& c : circles_) {
    const double dx = px - c.cx;
    const double dy = py - c.cy;
    const double rho = std::hypot(dx, dy);
    const double d = rho - c.radius;
    if (d < best) {
      best = d;
      if (rho > 0.0) {
        gx = dx / rho;
        gy = dy / rho;
      } else {
        gx = 1.0;
        gy = 0.0;
      }
    }
  }
  return best;
}

}  // namespace svmpc
