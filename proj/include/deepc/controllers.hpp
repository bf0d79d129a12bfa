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
#ifndef DEEPC_CONTROLLERS_HPP
#define DEEPC_CONTROLLERS_HPP

#include "deepc/behavioral.hpp"
#include "deepc/ltisys.hpp"
#include "deepc/qp.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace deepc {

/**
 * @brief Tracking problem shared by the MPC and DeePC formulations.
 *
 * Stage cost is ||y_k - r_k||_Q^2 + ||u_k||_R^2 over `horizon` steps.
 * Empty bound vectors mean unbounded; infinite entries are allowed.
 * `applied_inputs` is the number of plan entries applied per solve (s + 1).
 */
struct ControlProblem {
    Index horizon = 1;
    Index t_ini = 1;
    Matrix Q;
    Matrix R;
    Vector u_min;
    Vector u_max;
    Vector y_min;
    Vector y_max;
    double lambda_g = 0.0;
    double lambda_y = 0.0;
    Index applied_inputs = 1;

    /// Identity weights, unbounded, one applied input.
    static ControlProblem make(Index m, Index p, Index horizon, Index t_ini);

    void validate(Index m, Index p) const;
};

struct SolveResult {
    Matrix u;        ///< m x N plan
    Matrix y;        ///< p x N predicted outputs
    Vector g;        ///< span coefficients (DeePC only)
    Vector sigma_y;  ///< past-output slack (regularized DeePC only)
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIterations;
    QpSolution qp;

    bool optimal() const { return status == QpStatus::Optimal; }
};

/// What a receding-horizon controller sees at each solve.
struct PlanContext {
    const Matrix& u_ini;                 ///< m x T_ini most recent inputs
    const Matrix& y_ini;                 ///< p x T_ini most recent measured outputs
    const std::optional<Vector>& state;  ///< current state if the plant exposes one
    const Matrix& reference;             ///< p x N reference window
};

class PredictiveController {
public:
    virtual ~PredictiveController() = default;
    virtual SolveResult plan(const PlanContext& ctx) = 0;
    virtual const ControlProblem& problem() const = 0;
    virtual Index m() const = 0;
    virtual Index p() const = 0;
};

enum class StateEstimator {
    Auto,         ///< plant state when exposed, otherwise reconstruction
    PlantState,
    Reconstruct,  ///< least-squares state fixed by (u_ini, y_ini)
};

/**
 * @brief Condensed MPC: states are eliminated through y = O x + T u, so the
 * decision variable is the stacked input plan alone.
 */
class MpcController : public PredictiveController {
public:
    MpcController(StateSpace model, ControlProblem cp, QpSettings settings = {},
                  StateEstimator estimator = StateEstimator::Auto);

    SolveResult solve(const Vector& x_hat, const Matrix& reference);
    SolveResult plan(const PlanContext& ctx) override;

    const ControlProblem& problem() const override { return cp_; }
    Index m() const override { return model_.m(); }
    Index p() const override { return model_.p(); }
    const StateSpace& model() const { return model_; }

    /// Relative residual accepted by state reconstruction; infinite by
    /// default so noisy windows yield the least-squares estimate.
    double reconstruction_tolerance = kInf;

private:
    StateSpace model_;
    ControlProblem cp_;
    StateEstimator estimator_;
    Matrix O_;
    Matrix T_;
    Matrix Qbar_;
    std::vector<Index> output_rows_;
    std::optional<QpSolver> solver_;
};

/**
 * @brief DeePC over span coefficients g: u = Uf g, y = Yf g, with
 * Up g = u_ini and Yp g = y_ini.
 *
 * The regularized variant adds a slack on the past-output block,
 * Yp g = y_ini + sigma_y, and the cost lambda_g |g|_1 + lambda_y |sigma_y|_1.
 */
class DeepcController : public PredictiveController {
public:
    DeepcController(DataMatrices data, ControlProblem cp, bool regularized, QpSettings settings = {});
    ~DeepcController() override;

    SolveResult solve(const Matrix& u_ini, const Matrix& y_ini, const Matrix& reference);
    SolveResult plan(const PlanContext& ctx) override;

    const ControlProblem& problem() const override { return cp_; }
    Index m() const override { return data_.m(); }
    Index p() const override { return data_.p(); }
    const DataMatrices& data() const { return data_; }
    bool regularized() const { return regularized_; }

private:
    struct Layout;
    DataMatrices data_;
    ControlProblem cp_;
    bool regularized_;
    Matrix Qbar_;
    std::unique_ptr<Layout> layout_;
};

SolveResult solve_mpc(const StateSpace& ss, const Vector& x_hat, const Matrix& reference, const ControlProblem& cp,
                      const QpSettings& settings = {});

SolveResult solve_deepc(const DataMatrices& dm, const Matrix& u_ini, const Matrix& y_ini, const Matrix& reference,
                        const ControlProblem& cp, const QpSettings& settings = {});

SolveResult solve_regularized_deepc(const DataMatrices& dm, const Matrix& u_ini, const Matrix& y_ini,
                                    const Matrix& reference, const ControlProblem& cp,
                                    const QpSettings& settings = {});

/// Either a target rank or a singular-value threshold relative to the largest.
struct LowRankCutoff {
    std::optional<Index> rank;
    std::optional<double> relative_threshold;

    static LowRankCutoff with_rank(Index r) { return {r, std::nullopt}; }
    static LowRankCutoff with_threshold(double t) { return {std::nullopt, t}; }
};

/// Truncated-SVD approximation of col(Up, Yp, Uf, Yf), re-split into blocks.
DataMatrices low_rank_approx(const DataMatrices& dm, const LowRankCutoff& cutoff);

// ---------------------------------------------------------------------------
// Closed loop

/// System driven by the receding-horizon loop. `apply` takes u_t and
/// returns the measured y_t, then advances to t + 1.
class Plant {
public:
    virtual ~Plant() = default;
    virtual Index m() const = 0;
    virtual Index p() const = 0;
    /// Current state (or full-state measurement) when the plant exposes one.
    virtual std::optional<Vector> state() const { return std::nullopt; }
    virtual Vector apply(const Vector& u) = 0;
};

/// Noise-free LTI plant exposing its exact state.
class LtiPlant : public Plant {
public:
    LtiPlant(StateSpace ss, Vector x0);
    Index m() const override { return ss_.m(); }
    Index p() const override { return ss_.p(); }
    std::optional<Vector> state() const override { return x_; }
    Vector apply(const Vector& u) override;

private:
    StateSpace ss_;
    Vector x_;
};

struct StepRecord {
    Index step = 0;
    Index solve_index = 0;
    QpStatus status = QpStatus::Optimal;
    double objective = 0.0;
    double solve_ms = 0.0;
    int qp_iterations = 0;      ///< iterations of the governing solve
    Index violation_count = 0;  ///< measured output channels outside the Y box
    double slack_norm = 0.0;    ///< |sigma_y|_1 of the governing solve
    Vector u;
    Vector y;
};

struct RunnerOptions {
    Index steps = 1;
    /// Inputs applied before the first solve to fill the T_ini window.
    /// Defaults to zeros. Must have T_ini columns when given.
    std::optional<Matrix> warmup;
    /// Record wall-clock solve times. Off keeps every output deterministic.
    bool record_timing = false;
};

struct ClosedLoopResult {
    Matrix inputs;   ///< m x (applied steps), warmup excluded
    Matrix outputs;  ///< p x (applied steps)
    Matrix warmup_inputs;
    Matrix warmup_outputs;
    std::vector<StepRecord> steps;
    Index solves = 0;
    bool aborted = false;
    std::string abort_reason;

    Index length() const { return inputs.cols(); }
};

/**
 * @brief Receding-horizon loop shared by MPC and DeePC.
 *
 * Fills the initial window with the warmup inputs, then repeatedly solves,
 * applies the first `applied_inputs` entries of the plan, and refreshes
 * (u_ini, y_ini) from measured data. The reference holds its last column
 * past its end. Infeasible or unbounded solves abort the run.
 */
ClosedLoopResult run_receding_horizon(Plant& plant, PredictiveController& controller, const Matrix& reference,
                                      const RunnerOptions& options);

/// Window of `horizon` reference columns starting at `start`, holding the
/// last column past the end.
Matrix reference_window(const Matrix& reference, Index start, Index horizon);

/// `step,solve_status,objective,solve_ms,qp_iterations,violation_count,u...,y...`
void write_step_diagnostics_csv(std::ostream& os, const ClosedLoopResult& result);

} // namespace deepc

#endif // DEEPC_CONTROLLERS_HPP
