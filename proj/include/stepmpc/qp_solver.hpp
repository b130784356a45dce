#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stepmpc/transcription.hpp"

namespace stepmpc {

struct SolverConfig {
  double abs_tol{1e-8};
  double rel_tol{1e-8};
  int max_iterations{4000};
  double infeasibility_tol{1e-7};

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iterations <= 0 ||
        !(infeasibility_tol > 0.0))
      throw std::invalid_argument("SolverConfig: all parameters must be positive");
  }
};

enum class SolveStatus { Optimal, PrimalInfeasible, IterationLimit };

struct QpSolution {
  VecX x_star;
  VecX eq_duals;
  VecX ineq_duals;
  SolveStatus status{SolveStatus::IterationLimit};
  int iterations{0};
  double objective{0.0};
};

/// Optional initial guess, e.g. the previous MPC tick's solution shifted
/// by one stage.
struct WarmStart {
  VecX x;
  VecX eq_duals;
  VecX ineq_duals;
};

namespace detail {

struct KktResiduals {
  double primal{0.0};
  double dual{0.0};
  double comp{0.0};
  double dual_sign{0.0}; // most negative inequality dual, as a positive magnitude
};

inline KktResiduals kkt_residuals(const QpProblem& qp, const VecX& x, const VecX& nu,
                                  const VecX& lambda) {
  KktResiduals r;
  if (qp.a_eq.rows() > 0) r.primal = (qp.a_eq * x - qp.b_eq).cwiseAbs().maxCoeff();
  VecX slack;
  if (qp.a_leq.rows() > 0) {
    slack = qp.a_leq * x - qp.b_leq;
    r.primal = std::max(r.primal, slack.maxCoeff());
    r.comp = (lambda.array() * slack.array()).abs().maxCoeff();
    r.dual_sign = std::max(0.0, -lambda.minCoeff());
  }
  VecX stat = qp.hessian * x + qp.gradient;
  if (qp.a_eq.rows() > 0) stat += qp.a_eq.transpose() * nu;
  if (qp.a_leq.rows() > 0) stat += qp.a_leq.transpose() * lambda;
  r.dual = stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

inline bool kkt_ok(const KktResiduals& r, const QpProblem& qp, const SolverConfig& cfg) {
  const double g_inf = qp.gradient.size() > 0 ? qp.gradient.cwiseAbs().maxCoeff() : 0.0;
  return r.primal <= cfg.abs_tol && r.dual <= cfg.abs_tol * (1.0 + g_inf) &&
         r.comp <= cfg.abs_tol && r.dual_sign <= cfg.abs_tol;
}

} // namespace detail

/// Dense convex QP solver: Ruiz-equilibrated ADMM operator splitting on
/// the two-sided form l <= Ax <= u (equalities as l == u) with adaptive
/// penalty, followed by an active-set polish solving the reduced KKT
/// system with iterative refinement. The KKT residuals that gate the
/// Optimal status are always measured against the original problem data.
class QpSolver {
public:
  explicit QpSolver(SolverConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  QpSolution solve(const QpProblem& qp, const std::optional<WarmStart>& warm = std::nullopt) const {
    const int n = qp.num_vars();
    const int me = static_cast<int>(qp.a_eq.rows());
    const int mi = static_cast<int>(qp.a_leq.rows());
    const int m = me + mi;
    check_problem(qp, n, me, mi);

    const double inf = std::numeric_limits<double>::infinity();

    // Stack constraints as l <= Ax <= u in the original data.
    MatX a0(m, n);
    if (me > 0) a0.topRows(me) = qp.a_eq;
    if (mi > 0) a0.bottomRows(mi) = qp.a_leq;
    VecX lo0(m), up0(m);
    if (me > 0) {
      lo0.head(me) = qp.b_eq;
      up0.head(me) = qp.b_eq;
    }
    if (mi > 0) {
      lo0.tail(mi).setConstant(-inf);
      up0.tail(mi) = qp.b_leq;
    }

    // Fast path: polish the warm start's active set directly. In
    // steady-state MPC the shifted previous plan is already optimal, so
    // this skips equilibration and the splitting loop entirely.
    if (warm && warm->x.size() == n && warm->eq_duals.size() == me &&
        warm->ineq_duals.size() == mi) {
      const VecX ones_n = VecX::Ones(n);
      const VecX ones_m = VecX::Ones(m);
      VecX yw(m);
      yw.head(me) = warm->eq_duals;
      yw.tail(mi) = warm->ineq_duals;
      int fast_budget = 3;
      QpSolution fast;
      if (try_finish(qp, a0, up0, ones_n, ones_m, 1.0, warm->x, yw, me, mi, fast_budget,
                     fast)) {
        fast.iterations = 0;
        return fast;
      }
    }

    // Ruiz equilibration: P^ = c D P D, q^ = c D q, A^ = E A D.
    MatX p = qp.hessian;
    VecX q = qp.gradient;
    MatX a = a0;
    VecX d = VecX::Ones(n);
    VecX e = VecX::Ones(m);
    double c_scale = 1.0;
    equilibrate(p, q, a, d, e, c_scale);
    VecX lo(m), up(m);
    for (int i = 0; i < m; ++i) {
      lo(i) = std::isfinite(lo0(i)) ? e(i) * lo0(i) : lo0(i);
      up(i) = std::isfinite(up0(i)) ? e(i) * up0(i) : up0(i);
    }

    // Per-row penalty, stiffer on equality rows.
    double rho_base = 0.1;
    auto rho_vec = [&](double base) {
      VecX r(m);
      r.head(me).setConstant(base * 1e3);
      r.tail(mi).setConstant(base);
      return r;
    };
    VecX rho = rho_vec(rho_base);

    // Scaled iterates (x = D x^, y = E y^ / c).
    VecX x = VecX::Zero(n);
    VecX y = VecX::Zero(m);
    if (warm) {
      if (warm->x.size() == n) x = warm->x.cwiseQuotient(d);
      if (warm->eq_duals.size() == me && warm->ineq_duals.size() == mi) {
        y.head(me) = c_scale * warm->eq_duals.cwiseQuotient(e.head(me));
        y.tail(mi) = c_scale * warm->ineq_duals.cwiseQuotient(e.tail(mi));
      }
    }
    VecX z = (m > 0) ? clamp(a * x, lo, up) : VecX();

    Eigen::LLT<MatX> llt;
    factorize(llt, p, a, rho, n);

    QpSolution sol;
    sol.x_star = d.cwiseProduct(x);
    const int check_every = 25;
    VecX y_prev_iter = y;
    int polish_backoff = 0;
    int polish_budget = 160; // total working-set passes allowed per solve

    for (int it = 1; it <= cfg_.max_iterations; ++it) {
      y_prev_iter = y;
      // x update through the SPD normal equations of the ADMM KKT system.
      VecX rhs = sigma_ * x - q;
      if (m > 0) rhs += a.transpose() * (rho.cwiseProduct(z) - y);
      const VecX x_tilde = llt.solve(rhs);
      const VecX z_tilde = (m > 0) ? VecX(a * x_tilde) : VecX();

      x = alpha_ * x_tilde + (1.0 - alpha_) * x;
      if (m > 0) {
        const VecX z_relaxed = alpha_ * z_tilde + (1.0 - alpha_) * z;
        const VecX z_new = clamp(z_relaxed + y.cwiseQuotient(rho), lo, up);
        y += rho.cwiseProduct(z_relaxed - z_new);
        z = z_new;
      }

      if (it % check_every == 0 || it == cfg_.max_iterations) {
        sol.iterations = it;

        // Scaled ADMM residuals decide when the (expensive) polish and
        // the adaptive-rho update run.
        double r_prim = 0.0, r_dual = 0.0, prim_ref = 1.0, dual_ref = 1.0;
        if (m > 0) {
          const VecX ax = a * x;
          r_prim = (ax - z).cwiseAbs().maxCoeff();
          prim_ref = std::max({ax.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff(), 1e-30});
        }
        {
          const VecX px = p * x;
          VecX stat = px + q;
          double aty_inf = 0.0;
          if (m > 0) {
            const VecX aty = a.transpose() * y;
            stat += aty;
            aty_inf = aty.cwiseAbs().maxCoeff();
          }
          r_dual = stat.cwiseAbs().maxCoeff();
          dual_ref = std::max({px.cwiseAbs().maxCoeff(), aty_inf,
                               q.size() > 0 ? q.cwiseAbs().maxCoeff() : 0.0, 1e-30});
        }
        const bool near = r_prim <= 1e-4 * prim_ref + 1e-6 && r_dual <= 1e-4 * dual_ref + 1e-6;
        const bool forced = (it % (check_every * 8) == 0) || it == cfg_.max_iterations;
        if ((near || forced) && polish_backoff == 0) {
          if (try_finish(qp, a0, up0, d, e, c_scale, x, y, me, mi, polish_budget, sol))
            return sol;
          polish_backoff = near ? 0 : 2;
        } else if (polish_backoff > 0) {
          --polish_backoff;
        }

        if (m > 0) {
          const VecX dy = y - y_prev_iter;
          if (is_primal_infeasibility_certificate(a, lo, up, dy)) {
            sol.status = SolveStatus::PrimalInfeasible;
            sol.x_star = d.cwiseProduct(x);
            sol.eq_duals = e.head(me).cwiseProduct(dy.head(me)) / c_scale;
            sol.ineq_duals = e.tail(mi).cwiseProduct(dy.tail(mi)) / c_scale;
            sol.objective = std::numeric_limits<double>::quiet_NaN();
            return sol;
          }

          // OSQP-style penalty adaptation with refactorization.
          const double ratio =
              std::sqrt((r_prim / prim_ref) / std::max(r_dual / dual_ref, 1e-30));
          if (ratio > 5.0 || ratio < 0.2) {
            rho_base = std::clamp(rho_base * ratio, 1e-6, 1e6);
            rho = rho_vec(rho_base);
            factorize(llt, p, a, rho, n);
          }
        }
      }
    }

    sol.status = SolveStatus::IterationLimit;
    sol.iterations = cfg_.max_iterations;
    sol.x_star = d.cwiseProduct(x);
    sol.eq_duals = e.head(me).cwiseProduct(y.head(me)) / c_scale;
    sol.ineq_duals = e.tail(mi).cwiseProduct(y.tail(mi)) / c_scale;
    sol.objective = objective(qp, sol.x_star);
    return sol;
  }

private:
  SolverConfig cfg_;
  double sigma_{1e-6};
  double alpha_{1.6};

  static double objective(const QpProblem& qp, const VecX& x) {
    return 0.5 * x.dot(qp.hessian * x) + qp.gradient.dot(x);
  }

  static VecX clamp(const VecX& v, const VecX& lo, const VecX& up) {
    return v.cwiseMax(lo).cwiseMin(up);
  }

  /// Modified Ruiz equilibration of [P A'; A 0] plus cost normalization.
  static void equilibrate(MatX& p, VecX& q, MatX& a, VecX& d, VecX& e, double& c_scale) {
    const int n = static_cast<int>(p.rows());
    const int m = static_cast<int>(a.rows());
    auto safe_scale = [](double norm) {
      if (!(norm > 1e-12)) return 1.0;
      return 1.0 / std::sqrt(std::clamp(norm, 1e-6, 1e6));
    };
    for (int pass = 0; pass < 10; ++pass) {
      for (int j = 0; j < n; ++j) {
        double norm = p.col(j).cwiseAbs().maxCoeff();
        if (m > 0) norm = std::max(norm, a.col(j).cwiseAbs().maxCoeff());
        const double s = safe_scale(norm);
        p.col(j) *= s;
        p.row(j) *= s;
        if (m > 0) a.col(j) *= s;
        q(j) *= s;
        d(j) *= s;
      }
      for (int i = 0; i < m; ++i) {
        const double s = safe_scale(a.row(i).cwiseAbs().maxCoeff());
        a.row(i) *= s;
        e(i) *= s;
      }
      double p_col_mean = 0.0;
      for (int j = 0; j < n; ++j) p_col_mean += p.col(j).cwiseAbs().maxCoeff();
      p_col_mean /= std::max(1, n);
      const double q_inf = q.size() > 0 ? q.cwiseAbs().maxCoeff() : 0.0;
      const double denom = std::max(p_col_mean, q_inf);
      if (denom > 1e-12) {
        const double g = 1.0 / std::clamp(denom, 1e-6, 1e6);
        p *= g;
        q *= g;
        c_scale *= g;
      }
    }
  }

  void check_problem(const QpProblem& qp, int n, int me, int mi) const {
    if (qp.hessian.cols() != n || qp.gradient.size() != n ||
        (me > 0 && qp.a_eq.cols() != n) || (mi > 0 && qp.a_leq.cols() != n) ||
        qp.b_eq.size() != me || qp.b_leq.size() != mi)
      throw std::invalid_argument("QpSolver: inconsistent dimensions");
    if (!qp.hessian.isApprox(qp.hessian.transpose(), 1e-10))
      throw std::invalid_argument("QpSolver: Hessian must be symmetric");
    Eigen::LDLT<MatX> ldlt(qp.hessian);
    const double d_max = ldlt.vectorD().cwiseAbs().maxCoeff();
    if (ldlt.vectorD().minCoeff() < -1e-9 * std::max(1.0, d_max))
      throw std::invalid_argument("QpSolver: Hessian must be positive semi-definite");
  }

  void factorize(Eigen::LLT<MatX>& llt, const MatX& h, const MatX& a, const VecX& rho,
                 int n) const {
    MatX k = h + sigma_ * MatX::Identity(n, n);
    if (a.rows() > 0) k += a.transpose() * rho.asDiagonal() * a;
    llt.compute(k);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("QpSolver: KKT factorization failed");
  }

  /// Unscales the current iterate, polishes it on the guessed active set
  /// and accepts it if the KKT residuals against the original data pass;
  /// falls back to the raw (unscaled) iterate.
  bool try_finish(const QpProblem& qp, const MatX& a0, const VecX& up0, const VecX& d,
                  const VecX& e, double c_scale, const VecX& x_s, const VecX& y_s, int me,
                  int mi, int& pass_budget, QpSolution& sol) const {
    const VecX x0 = d.cwiseProduct(x_s);
    VecX y0(me + mi);
    y0.head(me) = e.head(me).cwiseProduct(y_s.head(me)) / c_scale;
    y0.tail(mi) = e.tail(mi).cwiseProduct(y_s.tail(mi)) / c_scale;

    VecX xp = x0;
    VecX yp = y0;
    polish(qp, a0, up0, me, mi, pass_budget, xp, yp);
    VecX nu = yp.head(me);
    VecX lambda = yp.tail(mi).cwiseMax(0.0);
    auto res = detail::kkt_residuals(qp, xp, nu, lambda);
    if (detail::kkt_ok(res, qp, cfg_)) {
      sol.status = SolveStatus::Optimal;
      sol.x_star = xp;
      sol.eq_duals = nu;
      sol.ineq_duals = lambda;
      sol.objective = objective(qp, xp);
      return true;
    }
    // Fall back to the raw ADMM iterate.
    nu = y0.head(me);
    lambda = y0.tail(mi).cwiseMax(0.0);
    res = detail::kkt_residuals(qp, x0, nu, lambda);
    if (detail::kkt_ok(res, qp, cfg_)) {
      sol.status = SolveStatus::Optimal;
      sol.x_star = x0;
      sol.eq_duals = nu;
      sol.ineq_duals = lambda;
      sol.objective = objective(qp, x0);
      return true;
    }
    return false;
  }

  /// Working-set refinement on the original problem data: repeatedly
  /// solve the equality-constrained KKT system on the current guess of
  /// the active set, then add the violated rows and drop the ones with
  /// negative multipliers. Each solve uses a regularized LU factorization
  /// with iterative refinement against the unregularized KKT matrix.
  void polish(const QpProblem& qp, const MatX& a0, const VecX& up0, int me, int mi,
              int& pass_budget, VecX& x, VecX& y) const {
    const int n = static_cast<int>(x.size());
    std::vector<bool> in_set(me + mi, false);
    for (int i = 0; i < me; ++i) in_set[i] = true;
    for (int i = me; i < me + mi; ++i) {
      const double slack = up0(i) - a0.row(i).dot(x);
      in_set[i] = y(i) > 0.0 || slack < 1e-7 * (1.0 + std::abs(up0(i)));
    }

    VecX x_cur = x, y_cur = y;
    for (int pass = 0; pass < 40 && pass_budget > 0; ++pass, --pass_budget) {
      std::vector<int> active;
      active.reserve(me + mi);
      for (int i = 0; i < me + mi; ++i)
        if (in_set[i]) active.push_back(i);
      const int na = static_cast<int>(active.size());

      MatX a_act(na, n);
      VecX b_act(na);
      for (int i = 0; i < na; ++i) {
        a_act.row(i) = a0.row(active[i]);
        b_act(i) = up0(active[i]);
      }

      const int dim = n + na;
      MatX kkt = MatX::Zero(dim, dim);
      kkt.topLeftCorner(n, n) = qp.hessian;
      if (na > 0) {
        kkt.topRightCorner(n, na) = a_act.transpose();
        kkt.bottomLeftCorner(na, n) = a_act;
      }
      MatX kkt_reg = kkt;
      const double delta = 1e-9;
      kkt_reg.topLeftCorner(n, n) += delta * MatX::Identity(n, n);
      kkt_reg.bottomRightCorner(na, na) -= delta * MatX::Identity(na, na);

      Eigen::PartialPivLU<MatX> lu(kkt_reg);
      VecX rhs(dim);
      rhs.head(n) = -qp.gradient;
      rhs.tail(na) = b_act;
      VecX sol_vec = lu.solve(rhs);
      for (int refine = 0; refine < 4; ++refine) {
        const VecX resid = rhs - kkt * sol_vec;
        sol_vec += lu.solve(resid);
      }

      x_cur = sol_vec.head(n);
      y_cur = VecX::Zero(me + mi);
      for (int i = 0; i < na; ++i) y_cur(active[i]) = sol_vec(n + i);

      // Adjust the working set: inactive rows must be satisfied, active
      // inequality rows need non-negative multipliers.
      bool changed = false;
      for (int i = me; i < me + mi; ++i) {
        if (in_set[i]) {
          if (y_cur(i) < -1e-10) {
            in_set[i] = false;
            changed = true;
          }
        } else {
          const double viol = a0.row(i).dot(x_cur) - up0(i);
          if (viol > 1e-10 * (1.0 + std::abs(up0(i)))) {
            in_set[i] = true;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    x = x_cur;
    y = y_cur;
  }

  bool is_primal_infeasibility_certificate(const MatX& a, const VecX& lo, const VecX& up,
                                           const VecX& dy) const {
    const double dy_inf = dy.size() > 0 ? dy.cwiseAbs().maxCoeff() : 0.0;
    if (dy_inf <= 0.0) return false;
    const double eps = cfg_.infeasibility_tol * dy_inf;
    if ((a.transpose() * dy).cwiseAbs().maxCoeff() > eps) return false;
    // Finite-bound support: rows with an infinite lower bound need a
    // non-negative multiplier.
    double support = 0.0;
    for (int i = 0; i < dy.size(); ++i) {
      if (dy(i) >= 0.0) {
        support += up(i) * dy(i);
      } else {
        if (!std::isfinite(lo(i))) {
          if (dy(i) < -eps) return false;
          continue;
        }
        support += lo(i) * dy(i);
      }
    }
    return support < -eps;
  }
};

/// Convenience wrapper with default configuration.
inline QpSolution solve(const QpProblem& qp, const SolverConfig& cfg = {}) {
  return QpSolver(cfg).solve(qp);
}

} // namespace stepmpc
