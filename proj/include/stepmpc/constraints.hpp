#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "stepmpc/centroidal_model.hpp"

namespace stepmpc {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Rectangular foot support area, half extents along x and y.
struct FootGeometry {
  double half_length{0.0}; // x
  double half_width{0.0};  // y

  void validate() const {
    if (!(half_length > 0.0) || !(half_width > 0.0))
      throw std::invalid_argument("FootGeometry: half extents must be > 0");
  }
};

/// Linearized friction cone parameters. The pyramid is an inner
/// approximation of the cone |f_t| <= mu * f_z.
struct FrictionModel {
  double mu{0.0};
  int num_facets{4};

  void validate() const {
    if (!(mu > 0.0)) throw std::invalid_argument("FrictionModel: mu must be > 0");
    if (num_facets < 4 || num_facets % 2 != 0)
      throw std::invalid_argument("FrictionModel: num_facets must be even and >= 4");
  }
};

/// Per-foot wrench feasibility polytope {f in R^6 : A f <= b}.
struct WrenchConstraintSet {
  MatX a_mat;
  VecX b_vec;

  int rows() const { return static_cast<int>(a_mat.rows()); }
  bool contains(const Vec6& f, double tol = 0.0) const {
    return ((a_mat * f - b_vec).array() <= tol).all();
  }
};

/// Predicted impact index within the controller horizon. k_impact > N
/// means the impact does not occur inside the horizon.
struct ImpactSchedule {
  int k_impact{0};
  int horizon_n{1};

  void validate() const {
    if (k_impact < 0 || horizon_n < 1)
      throw std::invalid_argument("ImpactSchedule: k_impact >= 0 and N >= 1 required");
  }
};

/// H-representation {p in R^2 : A p <= b} of the support convex hull.
struct HullConstraint {
  MatX a_mat; // h x 2
  VecX b_vec;

  int rows() const { return static_cast<int>(a_mat.rows()); }
  bool contains(const Vec2& p, double tol = 0.0) const {
    return ((a_mat * p - b_vec).array() <= tol).all();
  }
};

/// Swing-foot constraint regime at one control step.
enum class SwingConstraintKind { ZeroWrench, Feasible };

/// Friction pyramid rows: cos(t_j) f_x + sin(t_j) f_y <= mu*cos(pi/M) f_z
/// for M equally spaced directions. Inner approximation: every feasible
/// wrench satisfies the exact cone.
inline std::pair<MatX, VecX> friction_pyramid(const FrictionModel& fm) {
  fm.validate();
  const int m = fm.num_facets;
  const double mu_inner = fm.mu * std::cos(std::numbers::pi / m);
  MatX a = MatX::Zero(m, 6);
  for (int j = 0; j < m; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / m;
    a(j, 0) = std::cos(theta);
    a(j, 1) = std::sin(theta);
    a(j, 2) = -mu_inner;
  }
  return {a, VecX::Zero(m)};
}

/// Center-of-pressure box: CoP = (-tau_y / f_z, tau_x / f_z) inside the
/// foot rectangle, as four linear rows with zero right-hand side.
inline std::pair<MatX, VecX> cop_constraints(const FootGeometry& geom) {
  geom.validate();
  MatX a = MatX::Zero(4, 6);
  // tau_x <= d_y f_z ; -tau_x <= d_y f_z
  a(0, 3) = 1.0;  a(0, 2) = -geom.half_width;
  a(1, 3) = -1.0; a(1, 2) = -geom.half_width;
  // tau_y <= d_x f_z ; -tau_y <= d_x f_z
  a(2, 4) = 1.0;  a(2, 2) = -geom.half_length;
  a(3, 4) = -1.0; a(3, 2) = -geom.half_length;
  return {a, VecX::Zero(4)};
}

/// Unilaterality of the normal force: f_z >= f_min.
inline std::pair<MatX, VecX> normal_positivity(double f_min) {
  if (f_min < 0.0) throw std::invalid_argument("normal_positivity: f_min must be >= 0");
  MatX a = MatX::Zero(1, 6);
  a(0, 2) = -1.0;
  VecX b(1);
  b(0) = -f_min;
  return {a, b};
}

/// Full per-foot feasibility set: friction pyramid + CoP box + normal
/// positivity, checked nonempty at a strictly feasible vertical wrench.
inline WrenchConstraintSet stance_constraint_set(const FootGeometry& geom,
                                                 const FrictionModel& fm,
                                                 double f_min = 0.0) {
  const auto [a_fr, b_fr] = friction_pyramid(fm);
  const auto [a_cop, b_cop] = cop_constraints(geom);
  const auto [a_n, b_n] = normal_positivity(f_min);

  WrenchConstraintSet set;
  const int rows = static_cast<int>(a_fr.rows() + a_cop.rows() + a_n.rows());
  set.a_mat.resize(rows, 6);
  set.b_vec.resize(rows);
  set.a_mat << a_fr, a_cop, a_n;
  set.b_vec << b_fr, b_cop, b_n;

  Vec6 probe = Vec6::Zero();
  probe(2) = f_min + 1.0;
  if (!set.contains(probe))
    throw std::runtime_error("stance_constraint_set: constructed set is empty");
  return set;
}

/// Hybrid swing-foot rule: the wrench is null strictly before the impact
/// index and feasible from it on. An impact outside the horizon forces
/// the wrench to null for the whole horizon.
inline SwingConstraintKind swing_constraint_kind(const ImpactSchedule& schedule, int k) {
  schedule.validate();
  if (k < 0 || k > schedule.horizon_n - 1)
    throw std::invalid_argument("swing_constraint_kind: k out of [0, N-1]");
  return (k < schedule.k_impact) ? SwingConstraintKind::ZeroWrench
                                 : SwingConstraintKind::Feasible;
}

/// Receding-horizon impact index update: decrement by one per controller
/// execution, saturated from below at 1 until the impact occurs, then 0.
inline ImpactSchedule update_impact_index(const ImpactSchedule& schedule, bool impact_occurred) {
  schedule.validate();
  ImpactSchedule next = schedule;
  next.k_impact = impact_occurred ? 0 : std::max(1, schedule.k_impact - 1);
  return next;
}

/// H-representation of the 2D convex hull of a point set, rows with
/// outward normals, each tight at a hull edge. Rejects degenerate
/// (collinear) inputs.
inline HullConstraint convex_hull_inequalities(const std::vector<Vec2>& vertices) {
  if (vertices.size() < 3) throw std::invalid_argument("convex_hull_inequalities: need >= 3 points");

  // Andrew monotone chain, counter-clockwise hull.
  std::vector<Vec2> pts = vertices;
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());

  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };

  const int n = static_cast<int>(pts.size());
  std::vector<Vec2> hull(2 * n + 1);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);

  if (hull.size() < 3)
    throw std::invalid_argument("convex_hull_inequalities: degenerate (collinear) point set");

  HullConstraint hc;
  const int h = static_cast<int>(hull.size());
  hc.a_mat.resize(h, 2);
  hc.b_vec.resize(h);
  for (int i = 0; i < h; ++i) {
    const Vec2& p = hull[i];
    const Vec2& q = hull[(i + 1) % h];
    const Vec2 edge = q - p;
    Vec2 normal(edge.y(), -edge.x()); // outward for a CCW polygon
    normal.normalize();
    hc.a_mat.row(i) = normal.transpose();
    hc.b_vec(i) = normal.dot(p);
  }
  return hc;
}

} // namespace stepmpc
