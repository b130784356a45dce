#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <vector>

#include "stepmpc/capture_point.hpp"
#include "stepmpc/centroidal_model.hpp"
#include "stepmpc/constraints.hpp"
#include "stepmpc/cost.hpp"
#include "stepmpc/qp_solver.hpp"
#include "stepmpc/transcription.hpp"

namespace stepmpc {

struct ControllerConfig {
  ModelParams model;
  FootGeometry foot_geom;
  FrictionModel friction;
  Weights weights;
  int horizon_n{15};
  double dt{0.01};
  double f_min{0.0};
  double nominal_height{0.0}; // CoM z reference; <= 0 means take it from the first feedback
  SolverConfig solver;
};

struct ControllerOutput {
  ContactWrenches applied;       // held at the last feasible value on failure
  ContactWrenches commanded;     // raw f(0) of the tick's solution
  SolveStatus status{SolveStatus::Optimal};
  int iterations{0};
  double objective{0.0};
  Vec2 icp{Vec2::Zero()};
  int k_impact{0};
};

/// Receding-horizon push-recovery controller: each tick re-linearizes the
/// centroidal model at the latest feedback, transcribes the impact-gated
/// OCP into a QP, solves it, and emits the first wrench of the plan.
class MpcController {
public:
  explicit MpcController(ControllerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.model.validate();
    cfg_.foot_geom.validate();
    cfg_.friction.validate();
    cfg_.weights.validate();
    if (cfg_.horizon_n < 1 || !(cfg_.dt > 0.0))
      throw std::invalid_argument("MpcController: horizon_n >= 1 and dt > 0 required");

    stance_set_ = stance_constraint_set(cfg_.foot_geom, cfg_.friction, cfg_.f_min);
    // With flat, axis-aligned feet the swing-foot polytope coincides with
    // the stance one.
    swing_set_ = stance_set_;

    post_step_hull_ = convex_hull_inequalities(support_vertices(true));
    post_step_centroid_ = rectangle_union_centroid();
  }

  /// Controller tick. `recovery_active` selects the step-recovery
  /// references; `schedule` carries the externally updated impact index.
  ControllerOutput tick(const State& feedback, const ImpactSchedule& schedule,
                        bool recovery_active) {
    const int n = cfg_.horizon_n;
    const DecisionLayout layout{n};

    if (!initialized_) {
      f_applied_ = stance_gravity_wrench();
      initialized_ = true;
    }

    const LinearizationPoint lp{feedback.com_pos, f_applied_.left.force,
                                f_applied_.right.force};
    const DiscreteModel dm = discretize(linearize(cfg_.model, lp), cfg_.dt);

    const double height = (cfg_.nominal_height > 0.0) ? cfg_.nominal_height
                                                      : feedback.com_pos.z();
    const IcpParams icp_params =
        IcpParams::from_height(cfg_.model.gravity_accel, std::max(feedback.com_pos.z(), 1e-3));
    const auto icp_map = icp_extraction_matrix(icp_params);

    References refs;
    Vec2 ref_xy = recovery_active ? post_step_centroid_
                                  : Vec2(cfg_.model.left_foot_pos.head<2>());
    Vec9 gamma_des = Vec9::Zero();
    gamma_des.head<2>() = ref_xy;
    gamma_des(2) = height;
    refs.gamma_des.assign(n, gamma_des);
    refs.icp_des = recovery_active ? post_step_centroid_
                                   : Vec2(cfg_.model.left_foot_pos.head<2>());
    refs.f_prev = f_applied_.stack();

    ImpactSchedule sched = schedule;
    sched.horizon_n = n;

    const CostTerms cost = assemble_cost(cfg_.weights, refs, sched, icp_map, n);
    const auto [a_dyn, b_dyn] = build_dynamics_equality(dm, feedback.stack(), layout);
    const TranscribedConstraints tc =
        build_inequalities(stance_set_, swing_set_, sched, post_step_hull_, icp_map, layout);
    const QpProblem qp = assemble_qp(cost, a_dyn, b_dyn, tc, layout);

    QpSolver solver(cfg_.solver);
    std::optional<WarmStart> warm;
    if (warm_primal_.size() == layout.dim()) {
      WarmStart w;
      w.x = shift_stages(warm_primal_, n);
      if (warm_eq_.size() == qp.a_eq.rows() && warm_ineq_.size() == qp.a_leq.rows()) {
        w.eq_duals = warm_eq_;
        w.ineq_duals = warm_ineq_;
      } else {
        w.eq_duals = VecX::Zero(qp.a_eq.rows());
        w.ineq_duals = VecX::Zero(qp.a_leq.rows());
      }
      warm = std::move(w);
    }
    const QpSolution sol = solver.solve(qp, warm);

    ControllerOutput out;
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.objective = sol.objective;
    out.k_impact = sched.k_impact;
    out.icp = compute_icp(feedback, icp_params);

    if (sol.status == SolveStatus::Optimal) {
      out.commanded = extract_first_input(sol.x_star, layout);
      out.applied = out.commanded;
      f_applied_ = out.commanded;
      warm_primal_ = sol.x_star;
      warm_eq_ = sol.eq_duals;
      warm_ineq_ = sol.ineq_duals;
    } else {
      if (const char* dump = std::getenv("STEPMPC_DUMP_QP")) {
        static int dump_idx = 0;
        std::ofstream dos(std::string(dump) + "/qp_" + std::to_string(dump_idx++) + ".txt");
        dump_qp(qp, dos);
      }
      out.commanded = f_applied_;
      out.applied = f_applied_;
    }
    return out;
  }

  const ControllerConfig& config() const { return cfg_; }
  const HullConstraint& post_step_hull() const { return post_step_hull_; }
  const Vec2& post_step_centroid() const { return post_step_centroid_; }

  /// Corners of the stance foot alone (the pre-step support polygon).
  HullConstraint stance_hull() const {
    return convex_hull_inequalities(support_vertices(false));
  }

  ContactWrenches stance_gravity_wrench() const {
    ContactWrenches f;
    f.left.force = Vec3(0.0, 0.0, cfg_.model.mass * cfg_.model.gravity_accel);
    return f;
  }

private:
  std::vector<Vec2> support_vertices(bool include_swing_target) const {
    std::vector<Vec2> v;
    auto add_corners = [&](const Vec3& center) {
      const double dx = cfg_.foot_geom.half_length;
      const double dy = cfg_.foot_geom.half_width;
      v.emplace_back(center.x() - dx, center.y() - dy);
      v.emplace_back(center.x() - dx, center.y() + dy);
      v.emplace_back(center.x() + dx, center.y() - dy);
      v.emplace_back(center.x() + dx, center.y() + dy);
    };
    add_corners(cfg_.model.left_foot_pos);
    if (include_swing_target) add_corners(cfg_.model.right_foot_pos);
    return v;
  }

  Vec2 rectangle_union_centroid() const {
    const auto v = support_vertices(true);
    Vec2 c = Vec2::Zero();
    for (const auto& p : v) c += p;
    return c / static_cast<double>(v.size());
  }

  static VecX shift_stages(const VecX& chi, int n) {
    VecX shifted = chi;
    if (n >= 2) {
      shifted.head(21 * (n - 1)) = chi.tail(21 * (n - 1));
      shifted.tail(21) = chi.tail(21);
    }
    return shifted;
  }

  ControllerConfig cfg_;
  WrenchConstraintSet stance_set_;
  WrenchConstraintSet swing_set_;
  HullConstraint post_step_hull_;
  Vec2 post_step_centroid_{Vec2::Zero()};
  ContactWrenches f_applied_;
  bool initialized_{false};
  VecX warm_primal_;
  VecX warm_eq_;
  VecX warm_ineq_;
};

} // namespace stepmpc
