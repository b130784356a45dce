#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepmpc/controller.hpp"

namespace stepmpc {

/// Externally applied push: a constant force at the CoM over a time
/// window. A zero force disables the push and the step recovery plan.
struct PushSpec {
  double start_time{0.0};
  double duration{0.0};
  Vec3 force{Vec3::Zero()};

  bool enabled() const { return force.norm() > 0.0; }
};

/// Step plan fixed at push detection: nominal time to touchdown and the
/// (known, constant) swing-foot target.
struct StepPlan {
  double t_impact_nominal{0.0};
  Vec3 swing_target{Vec3::Zero()};
};

struct Scenario {
  double dt{0.01};
  int horizon_n{15};
  double total_time{6.0};
  ModelParams model;
  FootGeometry foot_geom;
  FrictionModel friction;
  Weights weights;
  double nominal_height{0.0};
  PushSpec push;
  StepPlan step_plan;
  State initial_state;
  SolverConfig solver;
  double f_min{0.0};

  void validate() const {
    model.validate();
    foot_geom.validate();
    friction.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("Scenario: dt must be > 0");
    if (horizon_n < 1) throw std::invalid_argument("Scenario: horizon_n must be >= 1");
    if (push.enabled()) {
      if (total_time < push.start_time + push.duration)
        throw std::invalid_argument("Scenario: total_time must cover the push window");
      const double steps = step_plan.t_impact_nominal / dt;
      if (!(step_plan.t_impact_nominal > 0.0) ||
          std::abs(steps - std::round(steps)) > 1e-9)
        throw std::invalid_argument(
            "Scenario: t_impact_nominal must be a positive multiple of dt");
    }
  }
};

struct LogRecord {
  double time{0.0};
  State state;
  ContactWrenches commanded;
  Vec2 icp{Vec2::Zero()};
  int k_impact{0};
  SolveStatus solver_status{SolveStatus::Optimal};
  double solve_time{0.0};
  double qp_objective{0.0};
};

namespace detail {

/// RK4 integration of the exact bilinear plant over one step. The plant
/// ignores the right-foot wrench while that foot is in the air; the push
/// force enters the CoM force balance only.
inline State integrate_plant(const ModelParams& params, const State& s,
                             const ContactWrenches& applied, const Vec3& push_force,
                             bool right_contact, double dt) {
  ContactWrenches acting = applied;
  if (!right_contact) acting.right = Wrench{};

  auto deriv = [&](const Vec9& g) -> Vec9 {
    Vec9 rate = exact_dynamics(params, State::unstack(g), acting);
    rate.segment<3>(3) += push_force / params.mass;
    return rate;
  };

  const Vec9 g0 = s.stack();
  const Vec9 k1 = deriv(g0);
  const Vec9 k2 = deriv(g0 + 0.5 * dt * k1);
  const Vec9 k3 = deriv(g0 + 0.5 * dt * k2);
  const Vec9 k4 = deriv(g0 + dt * k3);
  return State::unstack(g0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

inline const char* status_token(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

} // namespace detail

/// Closed-loop simulation: the MPC commands wrenches, tracked perfectly,
/// while the exact nonlinear plant is integrated with RK4. Infeasible
/// ticks hold the last feasible wrench and are recorded.
inline std::vector<LogRecord> run_closed_loop(const Scenario& s) {
  s.validate();

  ControllerConfig cc;
  cc.model = s.model;
  if (s.push.enabled()) cc.model.right_foot_pos = s.step_plan.swing_target;
  cc.foot_geom = s.foot_geom;
  cc.friction = s.friction;
  cc.weights = s.weights;
  cc.horizon_n = s.horizon_n;
  cc.dt = s.dt;
  cc.f_min = s.f_min;
  cc.nominal_height =
      (s.nominal_height > 0.0) ? s.nominal_height : s.initial_state.com_pos.z();
  cc.solver = s.solver;
  MpcController controller(cc);

  const int ticks = static_cast<int>(std::llround(s.total_time / s.dt));
  const double t_impact_abs =
      s.push.enabled() ? s.push.start_time + s.step_plan.t_impact_nominal
                       : std::numeric_limits<double>::infinity();
  ImpactSchedule schedule;
  schedule.horizon_n = s.horizon_n;
  schedule.k_impact = s.push.enabled()
                          ? static_cast<int>(std::llround(t_impact_abs / s.dt)) + 1
                          : (1 << 29);

  State plant = s.initial_state;
  std::vector<LogRecord> log;
  log.reserve(ticks);

  for (int i = 0; i < ticks; ++i) {
    const double t = i * s.dt;
    const bool impact_occurred = t >= t_impact_abs;
    schedule = update_impact_index(schedule, impact_occurred);
    const bool recovery_active = s.push.enabled() && t >= s.push.start_time;

    const auto tick_start = std::chrono::steady_clock::now();
    const ControllerOutput out = controller.tick(plant, schedule, recovery_active);
    const auto tick_end = std::chrono::steady_clock::now();

    LogRecord rec;
    rec.time = t;
    rec.state = plant;
    rec.commanded = out.commanded;
    rec.icp = out.icp;
    rec.k_impact = out.k_impact;
    rec.solver_status = out.status;
    rec.solve_time = std::chrono::duration<double>(tick_end - tick_start).count();
    rec.qp_objective = out.objective;
    log.push_back(rec);

    const bool push_on = t >= s.push.start_time && t < s.push.start_time + s.push.duration;
    const Vec3 push_force = push_on ? s.push.force : Vec3::Zero();
    plant = detail::integrate_plant(cc.model, plant, out.applied, push_force,
                                    impact_occurred, s.dt);
  }
  return log;
}

/// CSV export: header plus one row per tick. Output is deterministic for
/// identical runs, so the wall-clock solve time is not part of the file;
/// it stays available in the in-memory log.
inline void export_csv(const std::vector<LogRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("export_csv: empty log");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("export_csv: cannot open " + path);

  os << "time,com_x,com_y,com_z,vel_x,vel_y,vel_z,angmom_x,angmom_y,angmom_z,"
        "fl_fx,fl_fy,fl_fz,fl_tx,fl_ty,fl_tz,fr_fx,fr_fy,fr_fz,fr_tx,fr_ty,fr_tz,"
        "icp_x,icp_y,k_impact,solver_status,qp_objective\n";

  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    os << buf;
  };
  for (const auto& r : records) {
    num(r.time);
    const Vec9 g = r.state.stack();
    for (int i = 0; i < 9; ++i) { os << ','; num(g(i)); }
    const Vec12 f = r.commanded.stack();
    for (int i = 0; i < 12; ++i) { os << ','; num(f(i)); }
    os << ','; num(r.icp.x());
    os << ','; num(r.icp.y());
    os << ',' << r.k_impact;
    os << ',' << detail::status_token(r.solver_status);
    os << ','; num(r.qp_objective);
    os << '\n';
  }
  if (!os) throw std::runtime_error("export_csv: write failed on " + path);
}

/// gnuplot script rendering CoM, ICP-y with hull bounds, and vertical
/// forces out of the exported CSV.
inline void emit_plot_script(const std::vector<LogRecord>& records, const std::string& path,
                             const std::string& csv_path, double push_time, double impact_time,
                             double hull_y_min, double hull_y_max) {
  if (records.empty()) throw std::invalid_argument("emit_plot_script: empty log");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit_plot_script: cannot open " + path);

  os << "# gnuplot script generated by stepmpc\n"
     << "set datafile separator ','\n"
     << "csv = '" << csv_path << "'\n"
     << "set key autotitle columnhead\n"
     << "set xlabel 'time [s]'\n"
     << "set arrow 1 from " << push_time << ", graph 0 to " << push_time
     << ", graph 1 nohead dt 2\n"
     << "set arrow 2 from " << impact_time << ", graph 0 to " << impact_time
     << ", graph 1 nohead dt 2\n\n"
     << "set terminal pngcairo size 900,600\n\n"
     << "set output 'com.png'\n"
     << "set title 'Center of mass'\n"
     << "plot csv using 1:2 with lines title 'com x', \\\n"
     << "     csv using 1:3 with lines title 'com y', \\\n"
     << "     csv using 1:4 with lines title 'com z'\n\n"
     << "set output 'icp.png'\n"
     << "set title 'Instantaneous capture point (y)'\n"
     << "plot csv using 1:24 with lines title 'icp y', \\\n"
     << "     " << hull_y_min << " with lines dt 3 title 'hull y min', \\\n"
     << "     " << hull_y_max << " with lines dt 3 title 'hull y max'\n\n"
     << "set output 'forces.png'\n"
     << "set title 'Commanded vertical forces'\n"
     << "plot csv using 1:13 with lines title 'left f_z', \\\n"
     << "     csv using 1:19 with lines title 'right f_z'\n";
  if (!os) throw std::runtime_error("emit_plot_script: write failed on " + path);
}

} // namespace stepmpc
