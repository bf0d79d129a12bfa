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
#ifndef DEEPC_BENCH_QUAD_HPP
#define DEEPC_BENCH_QUAD_HPP

#include "deepc/bench/config.hpp"
#include "deepc/controllers.hpp"
#include "deepc/quadsim.hpp"

#include <set>
#include <string>

namespace deepc::bench {

/**
 * Quadrotor tracking setup shared by the figure-eight, step and sweep runs.
 *
 * Controllers see hover-relative inputs v = u - u_hover: gravity makes the
 * plant affine in raw thrust, and neither the data span nor the
 * least-squares model has an intercept. Bounds and the input cost are
 * expressed in v; the plant still receives raw thrusts in [0, 1].
 */
struct QuadSetup {
    QuadParams plant;
    Index horizon = 30;
    Index t_ini = 1;
    Vector q_diag;  ///< 12 output weights
    double r_weight = 1.0;
    double lambda_g = 30.0;
    double lambda_y = 1e5;
    Index samples = 214;
    double position_bound = 3.0;
    ExcitationOptions excitation;
    double ridge = 0.0;
    QpSettings qp;

    QuadSetup();

    /// Reads the `quad.*`, `horizon`, `t_ini`, weight and data keys.
    static QuadSetup from_config(const Config& cfg);
    static const std::set<std::string>& config_keys();

    ControlProblem control_problem() const;

    /// Record with inputs shifted to hover-relative coordinates.
    Trajectory relative_data(const Trajectory& raw) const;
};

/// Quadrotor driven in hover-relative inputs.
class HoverRelativePlant : public Plant {
public:
    HoverRelativePlant(const QuadParams& params, std::uint64_t noise_seed);
    Index m() const override { return 4; }
    Index p() const override { return QuadState::kSize; }
    std::optional<Vector> state() const override { return plant_.state(); }
    Vector apply(const Vector& v) override;

private:
    QuadPlant plant_;
    Vector hover_;
};

/// Metrics of one closed-loop quadrotor run.
struct RunRecord {
    std::string method;
    double cost = 0.0;               ///< realized stage cost on measured data
    double violation_seconds = 0.0;  ///< time with a measured position outside the box
    Index steps = 0;
    bool failed = false;
    std::string reason;
    double max_slack = 0.0;
    double total_solve_ms = 0.0;
};

/// p x steps reference: Gerono lemniscate in (x, y) at constant height.
Matrix figure8_reference(Index steps, double dt, double amplitude = 2.0, double period = 15.0,
                         double height = 1.0);

/// p x steps reference: zero until `step_time`, then `size` on x, y and z.
Matrix step_reference(Index steps, double dt, double step_time = 1.0, double size = 1.0);

/// Sum over applied steps of ||y - r||_Q^2 + ||u||_R^2 on measured outputs.
double realized_cost(const ClosedLoopResult& run, const Matrix& reference, const ControlProblem& cp);

/// Seconds during which any bounded measured output left its box.
double violation_seconds(const ClosedLoopResult& run, double dt);

/// Collects a fresh data record for one repetition.
ExcitationData quad_data(const QuadSetup& setup, std::uint64_t data_seed);

/// Regularized DeePC on the data record. `run` receives the closed loop when given.
RunRecord run_quad_deepc(const QuadSetup& setup, const ExcitationData& data, const Matrix& reference, Index steps,
                         std::uint64_t noise_seed, bool record_timing = false, ClosedLoopResult* run = nullptr);

/// Least-squares identification on the same record followed by MPC on the
/// identified model, using the measured state as the estimate.
RunRecord run_quad_id_mpc(const QuadSetup& setup, const ExcitationData& data, const Matrix& reference, Index steps,
                          std::uint64_t noise_seed, bool record_timing = false, ClosedLoopResult* run = nullptr);

} // namespace deepc::bench

#endif // DEEPC_BENCH_QUAD_HPP
