#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "stepmpc/harness.hpp"

namespace stepmpc {

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object())
    throw std::runtime_error("scenario: section '" + where + "' must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw std::runtime_error("scenario: unknown key '" + key + "' in " + where);
}

inline Vec3 read_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("scenario: " + where + " must be an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

template <int N>
Eigen::Matrix<double, N, N> read_diag(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N)
    throw std::runtime_error("scenario: " + where + " must be an array of " +
                             std::to_string(N) + " diagonal entries");
  Eigen::Matrix<double, N, N> m = Eigen::Matrix<double, N, N>::Zero();
  for (int i = 0; i < N; ++i) m(i, i) = j[i].get<double>();
  return m;
}

} // namespace detail

/// Loads a Scenario from a JSON file whose keys mirror the scenario field
/// names. Unknown keys are rejected; weight matrices are given as
/// diagonals.
inline Scenario load_scenario(const std::string& path) {
  using detail::json;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("scenario: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scenario: parse error in " + path + ": " + e.what());
  }

  detail::require_keys(j,
                       {"dt", "horizon_n", "total_time", "model", "foot_geom", "friction",
                        "weights", "icp", "push", "step_plan", "initial_state", "solver",
                        "f_min"},
                       "scenario");

  Scenario s;
  s.dt = j.at("dt").get<double>();
  s.horizon_n = j.at("horizon_n").get<int>();
  s.total_time = j.at("total_time").get<double>();
  if (j.contains("f_min")) s.f_min = j.at("f_min").get<double>();

  const json& model = j.at("model");
  detail::require_keys(model, {"mass", "gravity_accel", "left_foot_pos", "right_foot_pos"},
                       "model");
  s.model.mass = model.at("mass").get<double>();
  s.model.gravity_accel = model.at("gravity_accel").get<double>();
  s.model.left_foot_pos = detail::read_vec3(model.at("left_foot_pos"), "model.left_foot_pos");
  s.model.right_foot_pos = detail::read_vec3(model.at("right_foot_pos"), "model.right_foot_pos");

  const json& geom = j.at("foot_geom");
  detail::require_keys(geom, {"half_length", "half_width"}, "foot_geom");
  s.foot_geom.half_length = geom.at("half_length").get<double>();
  s.foot_geom.half_width = geom.at("half_width").get<double>();

  const json& fr = j.at("friction");
  detail::require_keys(fr, {"mu", "num_facets"}, "friction");
  s.friction.mu = fr.at("mu").get<double>();
  s.friction.num_facets = fr.at("num_facets").get<int>();

  const json& w = j.at("weights");
  detail::require_keys(w, {"k_gamma", "k_gamma_imp", "k_f", "k_icp", "k_df"}, "weights");
  s.weights.k_gamma = detail::read_diag<9>(w.at("k_gamma"), "weights.k_gamma");
  s.weights.k_gamma_imp = detail::read_diag<9>(w.at("k_gamma_imp"), "weights.k_gamma_imp");
  s.weights.k_f = detail::read_diag<12>(w.at("k_f"), "weights.k_f");
  s.weights.k_icp = detail::read_diag<2>(w.at("k_icp"), "weights.k_icp");
  s.weights.k_df = detail::read_diag<12>(w.at("k_df"), "weights.k_df");

  if (j.contains("icp")) {
    const json& icp = j.at("icp");
    detail::require_keys(icp, {"nominal_height"}, "icp");
    s.nominal_height = icp.at("nominal_height").get<double>();
  }

  const json& push = j.at("push");
  detail::require_keys(push, {"start_time", "duration", "force"}, "push");
  s.push.start_time = push.at("start_time").get<double>();
  s.push.duration = push.at("duration").get<double>();
  s.push.force = detail::read_vec3(push.at("force"), "push.force");

  const json& plan = j.at("step_plan");
  detail::require_keys(plan, {"t_impact_nominal", "swing_target"}, "step_plan");
  s.step_plan.t_impact_nominal = plan.at("t_impact_nominal").get<double>();
  s.step_plan.swing_target = detail::read_vec3(plan.at("swing_target"), "step_plan.swing_target");

  const json& init = j.at("initial_state");
  detail::require_keys(init, {"com_pos", "com_vel", "ang_mom"}, "initial_state");
  s.initial_state.com_pos = detail::read_vec3(init.at("com_pos"), "initial_state.com_pos");
  s.initial_state.com_vel = detail::read_vec3(init.at("com_vel"), "initial_state.com_vel");
  s.initial_state.ang_mom = detail::read_vec3(init.at("ang_mom"), "initial_state.ang_mom");

  if (j.contains("solver")) {
    const json& sv = j.at("solver");
    detail::require_keys(sv, {"abs_tol", "rel_tol", "max_iterations", "infeasibility_tol"},
                         "solver");
    if (sv.contains("abs_tol")) s.solver.abs_tol = sv.at("abs_tol").get<double>();
    if (sv.contains("rel_tol")) s.solver.rel_tol = sv.at("rel_tol").get<double>();
    if (sv.contains("max_iterations")) s.solver.max_iterations = sv.at("max_iterations").get<int>();
    if (sv.contains("infeasibility_tol"))
      s.solver.infeasibility_tol = sv.at("infeasibility_tol").get<double>();
  }

  s.validate();
  return s;
}

} // namespace stepmpc
