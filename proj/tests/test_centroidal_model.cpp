#include <catch2/catch_amalgamated.hpp>

#include "stepmpc/centroidal_model.hpp"
#include "test_utils.hpp"

using namespace stepmpc;
using test_utils::make_rng;
using test_utils::random_vec3;
using test_utils::test_model;

TEST_CASE("skew matches the cross product") {
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK(skew(Vec3(1, 0, 0)).isApprox(expected));
  CHECK(skew(Vec3::Zero()).isZero());

  auto rng = make_rng(7);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = random_vec3(rng, 5.0);
    const Vec3 y = random_vec3(rng, 5.0);
    CHECK((skew(v) * y - v.cross(y)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((skew(v).transpose() + skew(v)).isZero(0.0));
    // anticommutativity
    CHECK((skew(v) * y + skew(y) * v).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("adjoint_transform structure") {
  const Vec3 p = Vec3(0.3, -0.2, 0.1);
  CHECK(adjoint_transform(p, p).isIdentity(1e-15));

  Mat6 x = adjoint_transform(Vec3(0, 0, -1), Vec3::Zero());
  CHECK(x.block<3, 3>(3, 0).isApprox(skew(Vec3(0, 0, -1))));

  auto rng = make_rng(11);
  for (int i = 0; i < 50; ++i) {
    const Vec3 contact = random_vec3(rng);
    const Vec3 com = random_vec3(rng);
    const Vec3 f = random_vec3(rng, 100.0);
    Vec6 pure_force;
    pure_force << f, Vec3::Zero();
    const Vec6 transformed = adjoint_transform(contact, com) * pure_force;
    CHECK((transformed.tail<3>() - (contact - com).cross(f)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(transformed.head<3>().isApprox(f));
  }
}

TEST_CASE("exact_dynamics free fall and static equilibrium") {
  const ModelParams params = test_model();
  State s;
  s.com_pos = Vec3(0, 0.05, 0.5);

  const Vec9 free_fall = exact_dynamics(params, s, {});
  CHECK(free_fall.segment<3>(0).isZero());
  CHECK(free_fall.segment<3>(3).isApprox(Vec3(0, 0, -params.gravity_accel)));
  CHECK(free_fall.segment<3>(6).isZero());

  // vertical force through the CoM ground projection balances gravity on z
  ContactWrenches f;
  f.left.force = Vec3(0, 0, params.mass * params.gravity_accel);
  const Vec9 rate = exact_dynamics(params, s, f);
  CHECK(std::abs(rate(5)) <= 1e-12);
}

TEST_CASE("exact_dynamics angular rate matches direct cross-product sum") {
  const ModelParams params = test_model();
  auto rng = make_rng(23);
  for (int i = 0; i < 200; ++i) {
    State s;
    s.com_pos = random_vec3(rng);
    s.com_vel = random_vec3(rng);
    ContactWrenches f;
    f.left = {random_vec3(rng, 200.0), random_vec3(rng, 20.0)};
    f.right = {random_vec3(rng, 200.0), random_vec3(rng, 20.0)};

    const Vec3 expected = (params.left_foot_pos - s.com_pos).cross(f.left.force) +
                          f.left.torque +
                          (params.right_foot_pos - s.com_pos).cross(f.right.force) +
                          f.right.torque;
    const Vec9 rate = exact_dynamics(params, s, f);
    CHECK((rate.segment<3>(6) - expected).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("linearize block structure") {
  const ModelParams params = test_model();
  LinearizationPoint lp;
  lp.com_pos0 = Vec3(0.1, 0.0, 0.5);
  lp.left_force0 = Vec3(5, -3, 150);
  lp.right_force0 = Vec3(0, 2, 140);

  const ContinuousModel cm = linearize(params, lp);
  CHECK(cm.ev_tilde.block<3, 3>(0, 3).isIdentity());
  CHECK(cm.ev_tilde.middleRows<3>(3).isZero());
  CHECK(cm.ev_tilde.block<3, 3>(6, 0).isApprox(skew(lp.left_force0 + lp.right_force0)));
  CHECK(cm.f_tilde.topRows<3>().isZero());
  CHECK(cm.f_tilde.block<3, 3>(6, 0).isApprox(skew(params.left_foot_pos - lp.com_pos0)));
  CHECK(cm.f_tilde.block<3, 3>(6, 3).isIdentity());
  CHECK(cm.f_tilde.block<3, 3>(6, 6).isApprox(skew(params.right_foot_pos - lp.com_pos0)));
  CHECK(cm.f_tilde.block<3, 3>(6, 9).isIdentity());
  CHECK(cm.g_tilde.segment<3>(3).isApprox(Vec3(0, 0, -params.gravity_accel)));
  CHECK(std::abs(cm.g_tilde.head<3>().cwiseAbs().sum()) == 0.0);
  CHECK(cm.g_tilde.tail<3>().isZero());
  CHECK(cm.s0_tilde.head<6>().isZero());
  CHECK(cm.s0_tilde.tail<3>().isApprox(
      -skew(lp.left_force0 + lp.right_force0) * lp.com_pos0));

  // zero expansion forces
  const ContinuousModel cm0 =
      linearize(params, LinearizationPoint{lp.com_pos0, Vec3::Zero(), Vec3::Zero()});
  CHECK(cm0.ev_tilde.block<3, 3>(6, 0).isZero());
  CHECK(cm0.s0_tilde.isZero());
}

TEST_CASE("linearization is exact at the expansion point") {
  const ModelParams params = test_model();
  auto rng = make_rng(31);
  for (int i = 0; i < 200; ++i) {
    LinearizationPoint lp{random_vec3(rng), random_vec3(rng, 200.0),
                          random_vec3(rng, 200.0)};
    const ContinuousModel cm = linearize(params, lp);

    State s;
    s.com_pos = lp.com_pos0;
    s.com_vel = random_vec3(rng);
    s.ang_mom = random_vec3(rng);
    ContactWrenches f;
    f.left = {lp.left_force0, random_vec3(rng, 20.0)};
    f.right = {lp.right_force0, random_vec3(rng, 20.0)};

    const Vec9 linear = cm.ev_tilde * s.stack() + cm.f_tilde * f.stack() + cm.g_tilde +
                        cm.s0_tilde;
    const Vec9 exact = exact_dynamics(params, s, f);
    CHECK((linear - exact).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("linearization residual is the bilinear cross term only") {
  const ModelParams params = test_model();
  auto rng = make_rng(37);
  for (int i = 0; i < 200; ++i) {
    LinearizationPoint lp{random_vec3(rng), random_vec3(rng, 150.0),
                          random_vec3(rng, 150.0)};
    const ContinuousModel cm = linearize(params, lp);

    State s;
    s.com_pos = lp.com_pos0 + random_vec3(rng, 0.2);
    s.com_vel = random_vec3(rng);
    ContactWrenches f;
    f.left = {lp.left_force0 + random_vec3(rng, 30.0), random_vec3(rng, 10.0)};
    f.right = {lp.right_force0 + random_vec3(rng, 30.0), random_vec3(rng, 10.0)};

    const Vec9 linear = cm.ev_tilde * s.stack() + cm.f_tilde * f.stack() + cm.g_tilde +
                        cm.s0_tilde;
    const Vec9 exact = exact_dynamics(params, s, f);
    const Vec9 residual = exact - linear;
    CHECK(residual.head<6>().cwiseAbs().maxCoeff() <= 1e-12);

    // perturbing only the CoM position keeps the model exact
    ContactWrenches f0;
    f0.left = {lp.left_force0, f.left.torque};
    f0.right = {lp.right_force0, f.right.torque};
    const Vec9 lin_pos = cm.ev_tilde * s.stack() + cm.f_tilde * f0.stack() + cm.g_tilde +
                         cm.s0_tilde;
    CHECK((lin_pos - exact_dynamics(params, s, f0)).cwiseAbs().maxCoeff() <= 1e-12);

    // the neglected term is exactly -(x - x0) x (f_sum - f_sum0)
    const Vec3 df = (f.left.force + f.right.force) - (lp.left_force0 + lp.right_force0);
    const Vec3 dx = s.com_pos - lp.com_pos0;
    const Vec3 expected = -skew(dx) * df;
    CHECK((residual.tail<3>() - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("discretize forward Euler") {
  const ModelParams params = test_model();
  const ContinuousModel cm =
      linearize(params, {Vec3(0, 0, 0.5), Vec3(0, 0, 150), Vec3(0, 0, 140)});

  const DiscreteModel id = discretize(cm, 0.0);
  CHECK(id.ev.isIdentity());
  CHECK(id.f_mat.isZero());
  CHECK(id.g_vec.isZero());
  CHECK(id.s0_vec.isZero());

  const DiscreteModel dm = discretize(cm, 0.01);
  CHECK(dm.ev.isApprox(Mat9::Identity() + 0.01 * cm.ev_tilde));
  CHECK(dm.f_mat.isApprox(0.01 * cm.f_tilde));
  CHECK(dm.g_vec.isApprox(0.01 * cm.g_tilde));
  CHECK(dm.s0_vec.isApprox(0.01 * cm.s0_tilde));

  CHECK_THROWS_AS(discretize(cm, -0.01), std::invalid_argument);
}

TEST_CASE("forward Euler rollout converges at first order") {
  const ModelParams params = test_model();
  const ContinuousModel cm =
      linearize(params, {Vec3(0.02, 0.01, 0.5), Vec3(3, -2, 160), Vec3(1, 4, 130)});
  Vec9 gamma0;
  gamma0 << 0.01, 0.02, 0.5, 0.1, -0.05, 0.0, 0.01, 0.0, -0.01;
  Vec12 f = Vec12::Zero();
  f << 3, -2, 160, 0.5, -0.5, 0, 1, 4, 130, 0, 0.2, 0;

  const double horizon = 1.0;
  // fine-grid reference for the linear ODE under constant input
  auto integrate = [&](double h) {
    const int steps = static_cast<int>(std::llround(horizon / h));
    const DiscreteModel dm = discretize(cm, h);
    Vec9 g = gamma0;
    for (int i = 0; i < steps; ++i) g = step(dm, g, f);
    return g;
  };
  const Vec9 reference = integrate(1e-5);

  const double err_coarse = (integrate(1e-2) - reference).cwiseAbs().maxCoeff();
  const double err_fine = (integrate(5e-3) - reference).cwiseAbs().maxCoeff();
  CHECK(err_fine < err_coarse);
  // halving dt halves the error, within 20%
  const double ratio = err_coarse / err_fine;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("step affine update") {
  DiscreteModel id; // dt = 0 identity map
  auto rng = make_rng(41);
  const Vec9 gamma = test_utils::random_vec(rng, 9);
  const Vec12 f = test_utils::random_vec(rng, 12);
  CHECK(step(id, gamma, f).isApprox(gamma));

  const ModelParams params = test_model();
  const DiscreteModel dm =
      discretize(linearize(params, {Vec3(0, 0, 0.5), Vec3(0, 0, 150), Vec3::Zero()}), 0.01);
  CHECK(step(dm, Vec9::Zero(), Vec12::Zero()).isApprox(dm.g_vec + dm.s0_vec));
}
