#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

#include "stepmpc/capture_point.hpp"
#include "stepmpc/centroidal_model.hpp"
#include "stepmpc/constraints.hpp"

namespace stepmpc {

namespace detail {

inline void check_psd(const Eigen::Ref<const MatX>& m, const char* name,
                      double tol = 1e-9) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-12))
    throw std::invalid_argument(std::string(name) + ": weight must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatX> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol)
    throw std::invalid_argument(std::string(name) + ": weight must be PSD");
}

} // namespace detail

/// Gains of the five cost terms. K_gamma weighs only the z-component of
/// the CoM position pre-impact; the transverse components are weighed by
/// K_gamma_imp after the impact and in the terminal term.
struct Weights {
  Mat9 k_gamma{Mat9::Zero()};
  Mat9 k_gamma_imp{Mat9::Zero()};
  Eigen::Matrix<double, 12, 12> k_f{Eigen::Matrix<double, 12, 12>::Zero()};
  Eigen::Matrix2d k_icp{Eigen::Matrix2d::Zero()};
  Eigen::Matrix<double, 12, 12> k_df{Eigen::Matrix<double, 12, 12>::Zero()};

  void validate() const {
    detail::check_psd(k_gamma, "k_gamma");
    detail::check_psd(k_gamma_imp, "k_gamma_imp");
    detail::check_psd(k_f, "k_f");
    detail::check_psd(k_icp, "k_icp");
    detail::check_psd(k_df, "k_df");
    if (k_gamma.row(0).cwiseAbs().sum() != 0.0 || k_gamma.col(0).cwiseAbs().sum() != 0.0 ||
        k_gamma.row(1).cwiseAbs().sum() != 0.0 || k_gamma.col(1).cwiseAbs().sum() != 0.0)
      throw std::invalid_argument("k_gamma: transverse CoM position weights must be zero");
  }
};

/// Tracking references: per-step state reference gamma_des[k-1] for
/// k = 1..N, capture point reference, and the previously applied wrench
/// f(-1) seeding the force-difference term.
struct References {
  std::vector<Vec9> gamma_des;
  Vec2 icp_des{Vec2::Zero()};
  Vec12 f_prev{Vec12::Zero()};
};

/// Gate indices of the impact-dependent cost terms: the state-impact term
/// always keeps at least the terminal entry, while the ICP term vanishes
/// when the impact lies outside the horizon.
inline std::pair<int, int> impact_gate_indices(const ImpactSchedule& schedule) {
  schedule.validate();
  const int k_eff = std::max(schedule.k_impact, 1);
  const int k_bar_imp = std::min(schedule.horizon_n, k_eff);
  const int k_bar_icp = std::min(schedule.horizon_n + 1, k_eff);
  return {k_bar_imp, k_bar_icp};
}

/// Quadratic cost 1/2 x' H x + x' g + c0 over the decision vector
/// chi = [gamma(1); f(0); ...; gamma(N); f(N-1)], summing the state,
/// impact-gated state, force, impact-gated ICP, and force-difference
/// terms.
struct CostTerms {
  MatX hessian;
  VecX gradient;
  double constant{0.0};
};

inline CostTerms assemble_cost(const Weights& w, const References& r,
                               const ImpactSchedule& schedule,
                               const Eigen::Matrix<double, 2, 9>& icp_map, int n) {
  w.validate();
  if (n < 1 || schedule.horizon_n != n)
    throw std::invalid_argument("assemble_cost: horizon mismatch");
  if (static_cast<int>(r.gamma_des.size()) != n)
    throw std::invalid_argument("assemble_cost: gamma_des must have N entries");

  const int dim = 21 * n;
  CostTerms c;
  c.hessian = MatX::Zero(dim, dim);
  c.gradient = VecX::Zero(dim);
  c.constant = 0.0;

  auto gamma_off = [](int k) { return 21 * (k - 1); };    // k = 1..N
  auto force_off = [](int k) { return 21 * k + 9; };      // k = 0..N-1

  const auto [k_bar_imp, k_bar_icp] = impact_gate_indices(schedule);

  // state tracking, k = 1..N
  for (int k = 1; k <= n; ++k) {
    const Vec9& gd = r.gamma_des[k - 1];
    c.hessian.block<9, 9>(gamma_off(k), gamma_off(k)) += w.k_gamma;
    c.gradient.segment<9>(gamma_off(k)) -= w.k_gamma * gd;
    c.constant += 0.5 * gd.dot(w.k_gamma * gd);
  }

  // impact-gated state tracking (doubles as terminal cost), k = k_bar_imp..N
  for (int k = k_bar_imp; k <= n; ++k) {
    const Vec9& gd = r.gamma_des[k - 1];
    c.hessian.block<9, 9>(gamma_off(k), gamma_off(k)) += w.k_gamma_imp;
    c.gradient.segment<9>(gamma_off(k)) -= w.k_gamma_imp * gd;
    c.constant += 0.5 * gd.dot(w.k_gamma_imp * gd);
  }

  // force magnitude, k = 0..N-1
  for (int k = 0; k < n; ++k)
    c.hessian.block<12, 12>(force_off(k), force_off(k)) += w.k_f;

  // impact-gated capture point tracking, k = k_bar_icp..N
  const Eigen::Matrix<double, 9, 9> icp_quad = icp_map.transpose() * w.k_icp * icp_map;
  const Vec9 icp_lin = icp_map.transpose() * (w.k_icp * r.icp_des);
  for (int k = k_bar_icp; k <= n; ++k) {
    c.hessian.block<9, 9>(gamma_off(k), gamma_off(k)) += icp_quad;
    c.gradient.segment<9>(gamma_off(k)) -= icp_lin;
    c.constant += 0.5 * r.icp_des.dot(w.k_icp * r.icp_des);
  }

  // force rate, k = 0..N-1, seeded with f(-1)
  for (int k = 0; k < n; ++k) {
    c.hessian.block<12, 12>(force_off(k), force_off(k)) += w.k_df;
    if (k == 0) {
      c.gradient.segment<12>(force_off(0)) -= w.k_df * r.f_prev;
      c.constant += 0.5 * r.f_prev.dot(w.k_df * r.f_prev);
    } else {
      c.hessian.block<12, 12>(force_off(k - 1), force_off(k - 1)) += w.k_df;
      c.hessian.block<12, 12>(force_off(k), force_off(k - 1)) -= w.k_df;
      c.hessian.block<12, 12>(force_off(k - 1), force_off(k)) -= w.k_df;
    }
  }

  return c;
}

} // namespace stepmpc
