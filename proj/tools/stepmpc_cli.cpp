#include <algorithm>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stepmpc/scenario_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon push-recovery simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_path;
  std::string plot_path;
  int horizon = -1;
  double dt = -1.0;
  double push_mag = -1.0;
  bool quiet = false;

  CLI::App* run = app.add_subcommand("run", "Run a closed-loop scenario");
  run->add_option("--scenario", scenario_path, "Scenario file (JSON)")->required();
  run->add_option("--out", out_path, "Output CSV path")->required();
  run->add_option("--plot", plot_path, "Also emit a gnuplot script at this path");
  run->add_option("--horizon", horizon, "Override the controller horizon N");
  run->add_option("--dt", dt, "Override the control/plant time step [s]");
  run->add_option("--push-mag", push_mag, "Rescale the push force to this magnitude [N]");
  run->add_flag("--quiet", quiet, "Suppress the per-run summary");

  CLI11_PARSE(app, argc, argv);

  try {
    stepmpc::Scenario s = stepmpc::load_scenario(scenario_path);
    if (horizon > 0) s.horizon_n = horizon;
    if (dt > 0.0) s.dt = dt;
    if (push_mag >= 0.0) {
      const double norm = s.push.force.norm();
      if (norm <= 0.0) throw std::runtime_error("--push-mag: scenario push direction is zero");
      s.push.force *= push_mag / norm;
    }
    s.validate();

    const auto log = stepmpc::run_closed_loop(s);
    stepmpc::export_csv(log, out_path);

    if (!plot_path.empty()) {
      const double impact_time = s.push.start_time + s.step_plan.t_impact_nominal;
      stepmpc::ControllerConfig cc;
      cc.model = s.model;
      cc.model.right_foot_pos = s.step_plan.swing_target;
      cc.foot_geom = s.foot_geom;
      cc.friction = s.friction;
      cc.weights = s.weights;
      cc.horizon_n = s.horizon_n;
      cc.dt = s.dt;
      stepmpc::MpcController controller(cc);
      const auto& hull = controller.post_step_hull();
      double y_min = 1e18, y_max = -1e18;
      for (int i = 0; i < hull.rows(); ++i) {
        if (std::abs(hull.a_mat(i, 0)) < 1e-12) {
          const double bound = hull.b_vec(i) / hull.a_mat(i, 1);
          y_min = std::min(y_min, bound);
          y_max = std::max(y_max, bound);
        }
      }
      stepmpc::emit_plot_script(log, plot_path, out_path, s.push.start_time, impact_time,
                                y_min, y_max);
    }

    if (!quiet) {
      int infeasible = 0;
      double max_solve = 0.0;
      for (const auto& r : log) {
        if (r.solver_status != stepmpc::SolveStatus::Optimal) ++infeasible;
        max_solve = std::max(max_solve, r.solve_time);
      }
      std::printf("ticks=%zu non_optimal=%d max_solve_time=%.4fs out=%s\n", log.size(),
                  infeasible, max_solve, out_path.c_str());
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
