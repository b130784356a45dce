#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace stepmpc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat9x12 = Eigen::Matrix<double, 9, 12>;

/// Robot mass, gravity and the (fixed) foot positions in the inertial
/// frame. The right foot position is the post-step target, known in
/// advance.
struct ModelParams {
  double mass{0.0};           // kg
  double gravity_accel{9.81}; // m/s^2, acts along -z
  Vec3 left_foot_pos{Vec3::Zero()};
  Vec3 right_foot_pos{Vec3::Zero()};

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("ModelParams: mass must be > 0");
    if (!(gravity_accel > 0.0)) throw std::invalid_argument("ModelParams: gravity_accel must be > 0");
  }
};

/// Controller state gamma = [com_pos; com_vel; ang_mom] in R^9.
struct State {
  Vec3 com_pos{Vec3::Zero()};
  Vec3 com_vel{Vec3::Zero()};
  Vec3 ang_mom{Vec3::Zero()};

  Vec9 stack() const {
    Vec9 g;
    g << com_pos, com_vel, ang_mom;
    return g;
  }
  static State unstack(const Vec9& g) {
    State s;
    s.com_pos = g.segment<3>(0);
    s.com_vel = g.segment<3>(3);
    s.ang_mom = g.segment<3>(6);
    return s;
  }
};

/// 6D contact wrench (force, torque) in a frame fixed with the contact
/// surface.
struct Wrench {
  Vec3 force{Vec3::Zero()};
  Vec3 torque{Vec3::Zero()};

  Vec6 stack() const {
    Vec6 w;
    w << force, torque;
    return w;
  }
  static Wrench unstack(const Vec6& w) {
    return Wrench{w.head<3>(), w.tail<3>()};
  }
};

/// The control input f = [f_left; f_right] in R^12.
struct ContactWrenches {
  Wrench left;
  Wrench right;

  Vec12 stack() const {
    Vec12 f;
    f << left.stack(), right.stack();
    return f;
  }
  static ContactWrenches unstack(const Vec12& f) {
    return ContactWrenches{Wrench::unstack(f.head<6>()), Wrench::unstack(f.tail<6>())};
  }
};

/// Expansion point of the angular-momentum Taylor linearization: CoM
/// position and contact forces from the last feedback.
struct LinearizationPoint {
  Vec3 com_pos0{Vec3::Zero()};
  Vec3 left_force0{Vec3::Zero()};
  Vec3 right_force0{Vec3::Zero()};
};

/// Continuous-time affine model gdot = Ev~ g + F~ f + G~ + S0~.
struct ContinuousModel {
  Mat9 ev_tilde{Mat9::Zero()};
  Mat9x12 f_tilde{Mat9x12::Zero()};
  Vec9 g_tilde{Vec9::Zero()};
  Vec9 s0_tilde{Vec9::Zero()};
};

/// Forward-Euler discretization of ContinuousModel:
/// g(k+1) = Ev g(k) + F f(k) + G + S0.
struct DiscreteModel {
  Mat9 ev{Mat9::Identity()};
  Mat9x12 f_mat{Mat9x12::Zero()};
  Vec9 g_vec{Vec9::Zero()};
  Vec9 s0_vec{Vec9::Zero()};
  double dt{0.0};
};

/// Skew-symmetric matrix such that skew(v) * y == v x y.
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

/// Wrench transform from a contact frame to a frame centered at the CoM
/// and oriented as the inertial frame:
/// [[I, 0], [skew(x_contact - x_com), I]].
inline Mat6 adjoint_transform(const Vec3& contact_pos, const Vec3& com_pos) {
  Mat6 x = Mat6::Identity();
  x.block<3, 3>(3, 0) = skew(contact_pos - com_pos);
  return x;
}

/// Exact (bilinear) centroidal rates; serves as the simulation plant and
/// the linearization oracle.
inline Vec9 exact_dynamics(const ModelParams& params, const State& state,
                           const ContactWrenches& wrenches) {
  params.validate();
  Vec9 rate;
  rate.segment<3>(0) = state.com_vel;
  rate.segment<3>(3) =
      (wrenches.left.force + wrenches.right.force) / params.mass +
      Vec3(0.0, 0.0, -params.gravity_accel);
  rate.segment<3>(6) =
      skew(params.left_foot_pos - state.com_pos) * wrenches.left.force + wrenches.left.torque +
      skew(params.right_foot_pos - state.com_pos) * wrenches.right.force + wrenches.right.torque;
  return rate;
}

/// First-order Taylor expansion of the angular-momentum rate around lp,
/// producing the affine continuous model. Gravity enters only the
/// velocity-rate rows.
inline ContinuousModel linearize(const ModelParams& params, const LinearizationPoint& lp) {
  params.validate();
  ContinuousModel cm;

  cm.ev_tilde.block<3, 3>(0, 3) = Mat3::Identity();
  const Vec3 f_sum0 = lp.left_force0 + lp.right_force0;
  cm.ev_tilde.block<3, 3>(6, 0) = skew(f_sum0);

  const double inv_m = 1.0 / params.mass;
  cm.f_tilde.block<3, 3>(3, 0) = inv_m * Mat3::Identity();
  cm.f_tilde.block<3, 3>(3, 6) = inv_m * Mat3::Identity();
  cm.f_tilde.block<3, 3>(6, 0) = skew(params.left_foot_pos - lp.com_pos0);
  cm.f_tilde.block<3, 3>(6, 3) = Mat3::Identity();
  cm.f_tilde.block<3, 3>(6, 6) = skew(params.right_foot_pos - lp.com_pos0);
  cm.f_tilde.block<3, 3>(6, 9) = Mat3::Identity();

  cm.g_tilde.segment<3>(3) = Vec3(0.0, 0.0, -params.gravity_accel);

  cm.s0_tilde.segment<3>(6) = -skew(f_sum0) * lp.com_pos0;
  return cm;
}

/// Forward-Euler one-step matrices. dt == 0 is admitted to obtain the
/// identity map (used by tests); negative dt is rejected.
inline DiscreteModel discretize(const ContinuousModel& cm, double dt) {
  if (dt < 0.0 || !std::isfinite(dt)) throw std::invalid_argument("discretize: dt must be >= 0");
  DiscreteModel dm;
  dm.ev = Mat9::Identity() + dt * cm.ev_tilde;
  dm.f_mat = dt * cm.f_tilde;
  dm.g_vec = dt * cm.g_tilde;
  dm.s0_vec = dt * cm.s0_tilde;
  dm.dt = dt;
  return dm;
}

/// One discrete step g(k+1) = Ev g(k) + F f(k) + G + S0.
inline Vec9 step(const DiscreteModel& dm, const Vec9& gamma, const Vec12& f) {
  return dm.ev * gamma + dm.f_mat * f + dm.g_vec + dm.s0_vec;
}

} // namespace stepmpc
