/*
 Copyright 2026 The deepc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "deepc/bench/quad.hpp"

#include "deepc/sysid.hpp"

#include <cmath>
#include <numbers>

namespace deepc::bench {

QuadSetup::QuadSetup() : q_diag(Vector::Ones(12))
{
    q_diag.head(3) << 200.0, 200.0, 300.0;
}

const std::set<std::string>& QuadSetup::config_keys()
{
    static const std::set<std::string> keys = {
        "horizon",        "t_ini",          "q_diag",       "r_weight",         "lambda_g",
        "lambda_y",       "samples",        "position_bound", "excitation_band", "excitation_retries",
        "pe_order",       "ridge",          "quad.mass",    "quad.gravity",     "quad.inertia",
        "quad.arm",       "quad.k_thrust",  "quad.yaw_coefficient", "quad.dt",  "quad.noise_std",
        "qp.eps_abs",     "qp.max_iter",   "qp.method",    "excitation_translation_weight",
        "excitation_attitude_weight",       "excitation_input_weight",
    };
    return keys;
}

QuadSetup QuadSetup::from_config(const Config& cfg)
{
    QuadSetup s;
    s.horizon = cfg.get_index("horizon", s.horizon);
    s.t_ini = cfg.get_index("t_ini", s.t_ini);
    if (cfg.has("q_diag")) {
        const auto q = cfg.get_doubles("q_diag", {});
        if (q.size() != 12) throw ParseError("q_diag: expected 12 entries");
        s.q_diag = Eigen::Map<const Vector>(q.data(), 12);
    }
    s.r_weight = cfg.get_double("r_weight", s.r_weight);
    s.lambda_g = cfg.get_double("lambda_g", s.lambda_g);
    s.lambda_y = cfg.get_double("lambda_y", s.lambda_y);
    s.samples = cfg.get_index("samples", s.samples);
    s.position_bound = cfg.get_double("position_bound", s.position_bound);
    s.excitation.band = cfg.get_double("excitation_band", s.excitation.band);
    s.excitation.max_retries = static_cast<int>(cfg.get_index("excitation_retries", s.excitation.max_retries));
    s.excitation.lqr_translation_weight =
        cfg.get_double("excitation_translation_weight", s.excitation.lqr_translation_weight);
    s.excitation.lqr_attitude_weight = cfg.get_double("excitation_attitude_weight", s.excitation.lqr_attitude_weight);
    s.excitation.lqr_input_weight = cfg.get_double("excitation_input_weight", s.excitation.lqr_input_weight);
    s.excitation.pe_order = cfg.get_index("pe_order", s.t_ini + s.horizon + 12);
    s.ridge = cfg.get_double("ridge", s.ridge);
    s.plant.mass = cfg.get_double("quad.mass", s.plant.mass);
    s.plant.gravity = cfg.get_double("quad.gravity", s.plant.gravity);
    if (cfg.has("quad.inertia")) {
        const auto in = cfg.get_doubles("quad.inertia", {});
        if (in.size() != 3) throw ParseError("quad.inertia: expected 3 entries");
        s.plant.inertia = Vector3(in[0], in[1], in[2]);
    }
    s.plant.arm = cfg.get_double("quad.arm", s.plant.arm);
    s.plant.k_thrust = cfg.get_double("quad.k_thrust", 2.5 * s.plant.mass * s.plant.gravity / 4.0);
    s.plant.yaw_coefficient = cfg.get_double("quad.yaw_coefficient", s.plant.yaw_coefficient);
    s.plant.dt = cfg.get_double("quad.dt", s.plant.dt);
    s.plant.noise_std = cfg.get_double("quad.noise_std", s.plant.noise_std);
    s.qp.eps_abs = cfg.get_double("qp.eps_abs", s.qp.eps_abs);
    s.qp.max_iter = static_cast<int>(cfg.get_index("qp.max_iter", s.qp.max_iter));
    if (cfg.has("qp.method")) s.qp.method = parse_qp_method(cfg.get_string("qp.method", ""));
    s.plant.validate();
    if (s.horizon < 1 || s.t_ini < 1 || s.samples < s.t_ini + s.horizon) {
        throw ParseError("quadrotor setup: need horizon >= 1, t_ini >= 1 and samples >= t_ini + horizon");
    }
    return s;
}

ControlProblem QuadSetup::control_problem() const
{
    ControlProblem cp = ControlProblem::make(4, 12, horizon, t_ini);
    cp.Q = q_diag.asDiagonal();
    cp.R = r_weight * Matrix::Identity(4, 4);
    cp.u_min = Vector::Constant(4, -plant.hover_input());
    cp.u_max = Vector::Constant(4, 1.0 - plant.hover_input());
    cp.y_min = Vector::Constant(12, -kInf);
    cp.y_max = Vector::Constant(12, kInf);
    cp.y_min.head(3).setConstant(-position_bound);
    cp.y_max.head(3).setConstant(position_bound);
    cp.lambda_g = lambda_g;
    cp.lambda_y = lambda_y;
    return cp;
}

Trajectory QuadSetup::relative_data(const Trajectory& raw) const
{
    return Trajectory(raw.inputs().array() - plant.hover_input(), raw.outputs(), raw.dt());
}

HoverRelativePlant::HoverRelativePlant(const QuadParams& params, std::uint64_t noise_seed)
    : plant_(params, QuadState{}, noise_seed), hover_(Vector::Constant(4, params.hover_input()))
{
}

Vector HoverRelativePlant::apply(const Vector& v)
{
    if (v.size() != 4) throw DimensionError("quadrotor input must have 4 entries");
    return plant_.apply(v + hover_);
}

Matrix figure8_reference(Index steps, double dt, double amplitude, double period, double height)
{
    Matrix r = Matrix::Zero(12, steps);
    const double w = 2.0 * std::numbers::pi / period;
    for (Index k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        r(0, k) = amplitude * std::sin(w * t);
        r(1, k) = amplitude * std::sin(w * t) * std::cos(w * t);
        r(2, k) = height;
    }
    return r;
}

Matrix step_reference(Index steps, double dt, double step_time, double size)
{
    Matrix r = Matrix::Zero(12, steps);
    for (Index k = 0; k < steps; ++k) {
        // Small offset keeps k * dt == step_time on the stepped side.
        if (static_cast<double>(k) * dt >= step_time - 1e-9) r.block(0, k, 3, 1).setConstant(size);
    }
    return r;
}

double realized_cost(const ClosedLoopResult& run, const Matrix& reference, const ControlProblem& cp)
{
    double cost = 0.0;
    for (Index t = 0; t < run.length(); ++t) {
        const Vector e = run.outputs.col(t) - reference.col(std::min(t, reference.cols() - 1));
        const Vector u = run.inputs.col(t);
        cost += e.dot(cp.Q * e) + u.dot(cp.R * u);
    }
    return cost;
}

double violation_seconds(const ClosedLoopResult& run, double dt)
{
    Index count = 0;
    for (const StepRecord& rec : run.steps)
        if (rec.violation_count > 0) ++count;
    return static_cast<double>(count) * dt;
}

ExcitationData quad_data(const QuadSetup& setup, std::uint64_t data_seed)
{
    return collect_excitation_data(setup.plant, setup.samples, data_seed, setup.excitation);
}

namespace {

RunRecord finish_record(std::string method, const ClosedLoopResult& loop, const Matrix& reference,
                        const ControlProblem& cp, double dt)
{
    RunRecord rec;
    rec.method = std::move(method);
    rec.steps = loop.length();
    rec.failed = loop.aborted;
    rec.reason = loop.abort_reason;
    rec.cost = realized_cost(loop, reference, cp);
    rec.violation_seconds = violation_seconds(loop, dt);
    for (const StepRecord& s : loop.steps) {
        rec.max_slack = std::max(rec.max_slack, s.slack_norm);
        rec.total_solve_ms += s.solve_ms;
    }
    return rec;
}

RunnerOptions quad_runner(const QuadSetup& setup, Index steps, bool record_timing)
{
    RunnerOptions opts;
    opts.steps = steps;
    opts.warmup = Matrix::Zero(4, setup.t_ini);  // hover thrust
    opts.record_timing = record_timing;
    return opts;
}

} // namespace

RunRecord run_quad_deepc(const QuadSetup& setup, const ExcitationData& data, const Matrix& reference, Index steps,
                         std::uint64_t noise_seed, bool record_timing, ClosedLoopResult* run)
{
    const ControlProblem cp = setup.control_problem();
    DeepcController ctrl(partition_data(setup.relative_data(data.trajectory), setup.t_ini, setup.horizon), cp, true,
                         setup.qp);
    HoverRelativePlant plant(setup.plant, noise_seed);
    ClosedLoopResult loop = run_receding_horizon(plant, ctrl, reference, quad_runner(setup, steps, record_timing));
    RunRecord rec = finish_record("deepc", loop, reference, cp, setup.plant.dt);
    if (run) *run = std::move(loop);
    return rec;
}

RunRecord run_quad_id_mpc(const QuadSetup& setup, const ExcitationData& data, const Matrix& reference, Index steps,
                          std::uint64_t noise_seed, bool record_timing, ClosedLoopResult* run)
{
    const ControlProblem cp = setup.control_problem();
    const IdResult id = identify_full_state(setup.relative_data(data.trajectory), setup.ridge);
    MpcController ctrl(id.model, cp, setup.qp, StateEstimator::PlantState);
    HoverRelativePlant plant(setup.plant, noise_seed);
    ClosedLoopResult loop = run_receding_horizon(plant, ctrl, reference, quad_runner(setup, steps, record_timing));
    RunRecord rec = finish_record("id_mpc", loop, reference, cp, setup.plant.dt);
    if (run) *run = std::move(loop);
    return rec;
}

} // namespace deepc::bench
