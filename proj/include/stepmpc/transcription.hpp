#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <stdexcept>
#include <vector>

#include "stepmpc/capture_point.hpp"
#include "stepmpc/centroidal_model.hpp"
#include "stepmpc/constraints.hpp"
#include "stepmpc/cost.hpp"

namespace stepmpc {

/// Decision vector layout chi = [gamma(1); f(0); ...; gamma(N); f(N-1)],
/// chi in R^{21N}.
struct DecisionLayout {
  int horizon_n{1};

  void validate() const {
    if (horizon_n < 1) throw std::invalid_argument("DecisionLayout: N >= 1 required");
  }
  int dim() const { return 21 * horizon_n; }
  /// Offset of gamma(k), k = 1..N.
  int state_offset(int k) const { return 21 * (k - 1); }
  /// Offset of f(k), k = 0..N-1.
  int input_offset(int k) const { return 21 * k + 9; }

  VecX pack(const std::vector<Vec9>& states, const std::vector<Vec12>& inputs) const {
    if (static_cast<int>(states.size()) != horizon_n ||
        static_cast<int>(inputs.size()) != horizon_n)
      throw std::invalid_argument("DecisionLayout::pack: size mismatch");
    VecX chi(dim());
    for (int k = 1; k <= horizon_n; ++k) {
      chi.segment<9>(state_offset(k)) = states[k - 1];
      chi.segment<12>(input_offset(k - 1)) = inputs[k - 1];
    }
    return chi;
  }
};

/// One standard-form QP over the horizon; immutable once assembled.
struct QpProblem {
  MatX hessian;
  VecX gradient;
  MatX a_eq;
  VecX b_eq;
  MatX a_leq;
  VecX b_leq;

  int num_vars() const { return static_cast<int>(hessian.rows()); }
};

/// e_gamma: stacks gamma(1)..gamma(N) out of chi.
inline MatX selection_state(const DecisionLayout& layout) {
  layout.validate();
  MatX e = MatX::Zero(9 * layout.horizon_n, layout.dim());
  for (int k = 1; k <= layout.horizon_n; ++k)
    e.block<9, 9>(9 * (k - 1), layout.state_offset(k)) = Mat9::Identity();
  return e;
}

/// e_f: stacks f(0)..f(N-1) out of chi.
inline MatX selection_input(const DecisionLayout& layout) {
  layout.validate();
  MatX e = MatX::Zero(12 * layout.horizon_n, layout.dim());
  for (int k = 0; k < layout.horizon_n; ++k)
    e.block<12, 12>(12 * k, layout.input_offset(k)) = Eigen::Matrix<double, 12, 12>::Identity();
  return e;
}

/// Dynamics equality (Ev - e_gamma) chi = -G - Ev_gamma0 - S0, i.e. the
/// one-step recursion stacked over the horizon. gamma(1) depends on the
/// feedback gamma(0) only through the right-hand side.
inline std::pair<MatX, VecX> build_dynamics_equality(const DiscreteModel& dm,
                                                     const Vec9& gamma0,
                                                     const DecisionLayout& layout) {
  layout.validate();
  const int n = layout.horizon_n;
  MatX a = MatX::Zero(9 * n, layout.dim());
  VecX b = VecX::Zero(9 * n);
  for (int k = 1; k <= n; ++k) {
    const int row = 9 * (k - 1);
    a.block<9, 9>(row, layout.state_offset(k)) = -Mat9::Identity();
    a.block<9, 12>(row, layout.input_offset(k - 1)) = dm.f_mat;
    if (k >= 2) a.block<9, 9>(row, layout.state_offset(k - 1)) = dm.ev;
    b.segment<9>(row) = -dm.g_vec - dm.s0_vec;
    if (k == 1) b.segment<9>(row) -= dm.ev * gamma0;
  }
  return {a, b};
}

/// Constraint rows transcribed over the horizon with the hybrid structure
/// at the impact index: stance polytope on the left wrench at every step,
/// the swing wrench null before the impact and feasible from it, and the
/// capture point confined to the support hull on post-impact states.
struct TranscribedConstraints {
  MatX a_leq;
  VecX b_leq;
  MatX a_eq_swing;
  VecX b_eq_swing;
};

inline TranscribedConstraints build_inequalities(const WrenchConstraintSet& stance,
                                                 const WrenchConstraintSet& swing,
                                                 const ImpactSchedule& schedule,
                                                 const HullConstraint& hull,
                                                 const Eigen::Matrix<double, 2, 9>& icp_map,
                                                 const DecisionLayout& layout) {
  layout.validate();
  schedule.validate();
  const int n = layout.horizon_n;
  if (schedule.horizon_n != n)
    throw std::invalid_argument("build_inequalities: horizon mismatch");

  int zero_steps = 0;
  int feasible_steps = 0;
  for (int k = 0; k < n; ++k) {
    if (swing_constraint_kind(schedule, k) == SwingConstraintKind::ZeroWrench)
      ++zero_steps;
    else
      ++feasible_steps;
  }
  const auto [k_bar_imp, k_bar_icp] = impact_gate_indices(schedule);
  const int hull_states = n - k_bar_icp + 1; // k = k_bar_icp..N, empty if > N

  TranscribedConstraints tc;
  const int leq_rows = n * stance.rows() + feasible_steps * swing.rows() +
                       std::max(hull_states, 0) * hull.rows();
  tc.a_leq = MatX::Zero(leq_rows, layout.dim());
  tc.b_leq = VecX::Zero(leq_rows);
  tc.a_eq_swing = MatX::Zero(6 * zero_steps, layout.dim());
  tc.b_eq_swing = VecX::Zero(6 * zero_steps);

  int leq_row = 0;
  int eq_row = 0;
  for (int k = 0; k < n; ++k) {
    const int fl = layout.input_offset(k);
    const int fr = fl + 6;
    tc.a_leq.block(leq_row, fl, stance.rows(), 6) = stance.a_mat;
    tc.b_leq.segment(leq_row, stance.rows()) = stance.b_vec;
    leq_row += stance.rows();
    if (swing_constraint_kind(schedule, k) == SwingConstraintKind::ZeroWrench) {
      tc.a_eq_swing.block<6, 6>(eq_row, fr) = Mat6::Identity();
      eq_row += 6;
    } else {
      tc.a_leq.block(leq_row, fr, swing.rows(), 6) = swing.a_mat;
      tc.b_leq.segment(leq_row, swing.rows()) = swing.b_vec;
      leq_row += swing.rows();
    }
  }
  const MatX hull_on_state = hull.a_mat * icp_map; // h x 9
  for (int k = k_bar_icp; k <= n; ++k) {
    tc.a_leq.block(leq_row, layout.state_offset(k), hull.rows(), 9) = hull_on_state;
    tc.b_leq.segment(leq_row, hull.rows()) = hull.b_vec;
    leq_row += hull.rows();
  }
  return tc;
}

/// Final assembly of cost, dynamics equalities, swing equalities and the
/// stacked inequalities into a single QP.
inline QpProblem assemble_qp(const CostTerms& cost, const MatX& a_eq_dyn, const VecX& b_eq_dyn,
                             const TranscribedConstraints& tc, const DecisionLayout& layout) {
  layout.validate();
  const int dim = layout.dim();
  if (cost.hessian.rows() != dim || a_eq_dyn.cols() != dim || tc.a_leq.cols() != dim ||
      tc.a_eq_swing.cols() != dim || a_eq_dyn.rows() != b_eq_dyn.size())
    throw std::invalid_argument("assemble_qp: dimension mismatch");

  QpProblem qp;
  qp.hessian = cost.hessian;
  qp.gradient = cost.gradient;
  qp.a_eq.resize(a_eq_dyn.rows() + tc.a_eq_swing.rows(), dim);
  qp.a_eq << a_eq_dyn, tc.a_eq_swing;
  qp.b_eq.resize(b_eq_dyn.size() + tc.b_eq_swing.size());
  qp.b_eq << b_eq_dyn, tc.b_eq_swing;
  qp.a_leq = tc.a_leq;
  qp.b_leq = tc.b_leq;
  return qp;
}

/// f(0) slice of a solution, the input actually applied each tick.
inline ContactWrenches extract_first_input(const VecX& chi, const DecisionLayout& layout) {
  layout.validate();
  if (chi.size() != layout.dim())
    throw std::invalid_argument("extract_first_input: wrong solution length");
  return ContactWrenches::unstack(chi.segment<12>(layout.input_offset(0)));
}

/// Plain-text QP dump: a dimensions header, then each block dense in
/// row-major order, one row per line. Intended for cross-checks against
/// external solvers.
inline void dump_qp(const QpProblem& qp, std::ostream& os) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  os << "n " << qp.num_vars() << "\n"
     << "m_eq " << qp.a_eq.rows() << "\n"
     << "m_leq " << qp.a_leq.rows() << "\n";
  os << "H\n" << qp.hessian.format(fmt) << "\n";
  os << "g\n" << qp.gradient.transpose().format(fmt) << "\n";
  os << "A_eq\n" << qp.a_eq.format(fmt) << "\n";
  os << "b_eq\n" << qp.b_eq.transpose().format(fmt) << "\n";
  os << "A_leq\n" << qp.a_leq.format(fmt) << "\n";
  os << "b_leq\n" << qp.b_leq.transpose().format(fmt) << "\n";
}

} // namespace stepmpc
