#pragma once

#include <Eigen/Core>

#include <stdexcept>

#include "stepmpc/centroidal_model.hpp"

namespace stepmpc {

/// Linear-inverted-pendulum natural frequency omega0 = sqrt(g / z_bar).
struct IcpParams {
  double omega0{0.0};

  void validate() const {
    if (!(omega0 > 0.0)) throw std::invalid_argument("IcpParams: omega0 must be > 0");
  }

  static IcpParams from_height(double gravity_accel, double com_height) {
    if (!(com_height > 0.0)) throw std::invalid_argument("IcpParams: com height must be > 0");
    return IcpParams{std::sqrt(gravity_accel / com_height)};
  }
};

/// Instantaneous capture point x_icp = com_xy + comdot_xy / omega0.
inline Vec2 compute_icp(const State& state, const IcpParams& p) {
  p.validate();
  return state.com_pos.head<2>() + state.com_vel.head<2>() / p.omega0;
}

/// Matrix C in R^{2x9} with C * gamma == compute_icp(gamma); keeps the
/// hull constraint and the ICP cost linear/quadratic in the decision
/// vector.
inline Eigen::Matrix<double, 2, 9> icp_extraction_matrix(const IcpParams& p) {
  p.validate();
  Eigen::Matrix<double, 2, 9> c = Eigen::Matrix<double, 2, 9>::Zero();
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  c(0, 3) = 1.0 / p.omega0;
  c(1, 4) = 1.0 / p.omega0;
  return c;
}

} // namespace stepmpc
