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
#include "deepc/controllers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <chrono>
#include <ostream>

namespace deepc {

namespace {

Matrix block_diagonal(const Matrix& block, Index count)
{
    Matrix out = Matrix::Zero(block.rows() * count, block.cols() * count);
    for (Index k = 0; k < count; ++k) out.block(k * block.rows(), k * block.cols(), block.rows(), block.cols()) = block;
    return out;
}

Vector bound_or(const Vector& v, Index size, double fallback)
{
    return v.size() == 0 ? Vector::Constant(size, fallback) : v;
}

Vector tile(const Vector& v, Index times)
{
    Vector out(v.size() * times);
    for (Index k = 0; k < times; ++k) out.segment(k * v.size(), v.size()) = v;
    return out;
}

/// Rows (of a time-major stacked signal) whose channel has a finite bound.
std::vector<Index> bounded_rows(const Vector& lo, const Vector& hi, Index horizon)
{
    std::vector<Index> rows;
    const Index q = lo.size();
    for (Index k = 0; k < horizon; ++k)
        for (Index i = 0; i < q; ++i)
            if (lo(i) > -kInf || hi(i) < kInf) rows.push_back(k * q + i);
    return rows;
}

Matrix select_rows(const Matrix& M, const std::vector<Index>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), M.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = M.row(rows[r]);
    return out;
}

void check_reference(const Matrix& reference, Index p, Index horizon)
{
    if (reference.rows() != p || reference.cols() != horizon) {
        throw DimensionError("reference window must be p x N");
    }
}

} // namespace

ControlProblem ControlProblem::make(Index m, Index p, Index horizon, Index t_ini)
{
    ControlProblem cp;
    cp.horizon = horizon;
    cp.t_ini = t_ini;
    cp.Q = Matrix::Identity(p, p);
    cp.R = Matrix::Identity(m, m);
    return cp;
}

void ControlProblem::validate(Index m, Index p) const
{
    if (horizon < 1) throw Error("control problem: horizon must be positive");
    if (t_ini < 0) throw Error("control problem: T_ini must be nonnegative");
    if (applied_inputs < 1 || applied_inputs > horizon) {
        throw Error("control problem: applied inputs must lie in [1, N]");
    }
    if (Q.rows() != p || Q.cols() != p) throw DimensionError("control problem: Q must be p x p");
    if (R.rows() != m || R.cols() != m) throw DimensionError("control problem: R must be m x m");
    const double qs = std::max(1.0, Q.cwiseAbs().maxCoeff());
    const double rs = std::max(1.0, R.cwiseAbs().maxCoeff());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * qs) throw Error("control problem: Q must be symmetric");
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * rs) throw Error("control problem: R must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> qe(Q, Eigen::EigenvaluesOnly);
    if (qe.eigenvalues().minCoeff() < -1e-12 * qs) throw Error("control problem: Q must be positive semidefinite");
    Eigen::SelfAdjointEigenSolver<Matrix> re(R, Eigen::EigenvaluesOnly);
    if (re.eigenvalues().minCoeff() <= 0.0) throw Error("control problem: R must be positive definite");
    auto check_bounds = [](const Vector& lo, const Vector& hi, Index size, const char* name) {
        if ((lo.size() != 0 && lo.size() != size) || (hi.size() != 0 && hi.size() != size)) {
            throw DimensionError(std::string("control problem: ") + name + " bounds have wrong size");
        }
        if (lo.size() && hi.size() && (lo.array() > hi.array()).any()) {
            throw Error(std::string("control problem: empty ") + name + " box");
        }
    };
    check_bounds(u_min, u_max, m, "input");
    check_bounds(y_min, y_max, p, "output");
    if (lambda_g < 0.0 || lambda_y < 0.0) throw Error("control problem: regularization weights must be nonnegative");
}

// ---------------------------------------------------------------------------
// MPC

MpcController::MpcController(StateSpace model, ControlProblem cp, QpSettings settings, StateEstimator estimator)
    : model_(std::move(model)),
      cp_(std::move(cp)),
      estimator_(estimator)
{
    cp_.validate(model_.m(), model_.p());
    const Index N = cp_.horizon;
    O_ = observability_matrix(model_, N);
    T_ = toeplitz_impulse(model_, N);
    Qbar_ = block_diagonal(cp_.Q, N);
    const Matrix Rbar = block_diagonal(cp_.R, N);
    const Vector ylo = bound_or(cp_.y_min, model_.p(), -kInf);
    const Vector yhi = bound_or(cp_.y_max, model_.p(), kInf);
    output_rows_ = bounded_rows(ylo, yhi, N);

    Matrix P = 2.0 * (T_.transpose() * Qbar_ * T_ + Rbar);
    P = 0.5 * (P + P.transpose());
    solver_.emplace(std::move(P), Matrix(0, N * model_.m()), select_rows(T_, output_rows_), settings);
}

SolveResult MpcController::solve(const Vector& x_hat, const Matrix& reference)
{
    const Index N = cp_.horizon;
    const Index m = model_.m();
    const Index p = model_.p();
    if (x_hat.size() != model_.n()) throw DimensionError("mpc: state estimate has wrong dimension");
    check_reference(reference, p, N);

    const Vector free_response = O_ * x_hat;
    const Vector err = free_response - reference.reshaped();
    const Vector q = 2.0 * T_.transpose() * (Qbar_ * err);
    const double constant = err.dot(Qbar_ * err);

    const Vector ylo = tile(bound_or(cp_.y_min, p, -kInf), N);
    const Vector yhi = tile(bound_or(cp_.y_max, p, kInf), N);
    const Index rows = static_cast<Index>(output_rows_.size());
    Vector lin(rows), uin(rows);
    for (Index r = 0; r < rows; ++r) {
        const Index i = output_rows_[static_cast<std::size_t>(r)];
        lin(r) = ylo(i) - free_response(i);
        uin(r) = yhi(i) - free_response(i);
    }
    const Vector lb = tile(bound_or(cp_.u_min, m, -kInf), N);
    const Vector ub = tile(bound_or(cp_.u_max, m, kInf), N);

    SolveResult res;
    res.qp = solver_->solve(q, Vector(0), lin, uin, lb, ub, constant);
    res.status = res.qp.status;
    res.objective = res.qp.objective;
    const Vector u = res.qp.x;
    res.u = u.reshaped(m, N);
    res.y = (free_response + T_ * u).reshaped(p, N);
    return res;
}

SolveResult MpcController::plan(const PlanContext& ctx)
{
    const bool use_state = estimator_ == StateEstimator::PlantState ||
                           (estimator_ == StateEstimator::Auto && ctx.state.has_value());
    if (use_state) {
        if (!ctx.state) throw Error("mpc: plant does not expose its state");
        return solve(*ctx.state, ctx.reference);
    }
    const auto rec = reconstruct_initial_state(model_, ctx.u_ini, ctx.y_ini, reconstruction_tolerance);
    return solve(rec.current, ctx.reference);
}

SolveResult solve_mpc(const StateSpace& ss, const Vector& x_hat, const Matrix& reference, const ControlProblem& cp,
                      const QpSettings& settings)
{
    MpcController ctrl(ss, cp, settings, StateEstimator::PlantState);
    return ctrl.solve(x_hat, reference);
}

// ---------------------------------------------------------------------------
// DeePC

struct DeepcController::Layout {
    Index gd = 0;  // span coefficients
    Index sd = 0;  // slack entries
    std::vector<Index> u_rows, y_rows;
    Vector lin, uin, lb, ub;
    std::optional<QpSolver> solver;
};

DeepcController::~DeepcController() = default;

DeepcController::DeepcController(DataMatrices data, ControlProblem cp, bool regularized, QpSettings settings)
    : data_(std::move(data)), cp_(std::move(cp)), regularized_(regularized), layout_(std::make_unique<Layout>())
{
    if (data_.t_ini != cp_.t_ini || data_.horizon != cp_.horizon) {
        throw DimensionError("deepc: data windows do not match the control problem");
    }
    const Index m = data_.m();
    const Index p = data_.p();
    const Index N = cp_.horizon;
    cp_.validate(m, p);
    auto& L = *layout_;
    L.gd = data_.g_dim();
    L.sd = regularized_ ? cp_.t_ini * p : 0;
    const Index nb = L.gd + L.sd;

    Qbar_ = block_diagonal(cp_.Q, N);
    const Matrix Rbar = block_diagonal(cp_.R, N);

    QpProblem base;
    base.P = Matrix::Zero(nb, nb);
    Matrix Pg = 2.0 * (data_.Uf.transpose() * Rbar * data_.Uf + data_.Yf.transpose() * Qbar_ * data_.Yf);
    base.P.topLeftCorner(L.gd, L.gd) = 0.5 * (Pg + Pg.transpose());
    base.q = Vector::Zero(nb);

    const Index me = data_.Up.rows() + data_.Yp.rows();
    base.Aeq = Matrix::Zero(me, nb);
    base.Aeq.topLeftCorner(data_.Up.rows(), L.gd) = data_.Up;
    base.Aeq.block(data_.Up.rows(), 0, data_.Yp.rows(), L.gd) = data_.Yp;
    if (L.sd > 0) base.Aeq.bottomRightCorner(L.sd, L.sd) = -Matrix::Identity(L.sd, L.sd);
    base.beq = Vector::Zero(me);

    const Vector ulo = bound_or(cp_.u_min, m, -kInf), uhi = bound_or(cp_.u_max, m, kInf);
    const Vector ylo = bound_or(cp_.y_min, p, -kInf), yhi = bound_or(cp_.y_max, p, kInf);
    L.u_rows = bounded_rows(ulo, uhi, N);
    L.y_rows = bounded_rows(ylo, yhi, N);
    const Index nu = static_cast<Index>(L.u_rows.size());
    const Index ny = static_cast<Index>(L.y_rows.size());
    base.Ain = Matrix::Zero(nu + ny, nb);
    base.Ain.topLeftCorner(nu, L.gd) = select_rows(data_.Uf, L.u_rows);
    base.Ain.block(nu, 0, ny, L.gd) = select_rows(data_.Yf, L.y_rows);
    base.lin.resize(nu + ny);
    base.uin.resize(nu + ny);
    const Vector ulo_t = tile(ulo, N), uhi_t = tile(uhi, N), ylo_t = tile(ylo, N), yhi_t = tile(yhi, N);
    for (Index r = 0; r < nu; ++r) {
        base.lin(r) = ulo_t(L.u_rows[static_cast<std::size_t>(r)]);
        base.uin(r) = uhi_t(L.u_rows[static_cast<std::size_t>(r)]);
    }
    for (Index r = 0; r < ny; ++r) {
        base.lin(nu + r) = ylo_t(L.y_rows[static_cast<std::size_t>(r)]);
        base.uin(nu + r) = yhi_t(L.y_rows[static_cast<std::size_t>(r)]);
    }
    base.lb = Vector::Constant(nb, -kInf);
    base.ub = Vector::Constant(nb, kInf);

    // The one-norm terms go to the solver natively; no variables are split.
    Vector l1 = Vector::Zero(nb);
    if (regularized_) {
        l1.head(L.gd).setConstant(cp_.lambda_g);
        l1.tail(L.sd).setConstant(cp_.lambda_y);
    }
    L.lin = base.lin;
    L.uin = base.uin;
    L.lb = base.lb;
    L.ub = base.ub;
    L.solver.emplace(std::move(base.P), std::move(base.Aeq), std::move(base.Ain), settings, std::move(l1));
}

SolveResult DeepcController::solve(const Matrix& u_ini, const Matrix& y_ini, const Matrix& reference)
{
    const Index m = data_.m();
    const Index p = data_.p();
    const Index N = cp_.horizon;
    if (u_ini.rows() != m || y_ini.rows() != p || u_ini.cols() != cp_.t_ini || y_ini.cols() != cp_.t_ini) {
        throw DimensionError("deepc: initial window must be m x T_ini and p x T_ini");
    }
    check_reference(reference, p, N);
    auto& L = *layout_;

    const Vector r = reference.reshaped();
    Vector q = Vector::Zero(L.gd + L.sd);
    q.head(L.gd) = -2.0 * data_.Yf.transpose() * (Qbar_ * r);
    const double constant = r.dot(Qbar_ * r);
    Vector beq(u_ini.size() + y_ini.size());
    beq << u_ini.reshaped(), y_ini.reshaped();

    SolveResult res;
    res.qp = L.solver->solve(q, beq, L.lin, L.uin, L.lb, L.ub, constant);
    res.status = res.qp.status;
    res.objective = res.qp.objective;
    const Vector& x = res.qp.x;
    res.g = x.head(L.gd);
    if (L.sd > 0) res.sigma_y = x.segment(L.gd, L.sd);
    res.u = (data_.Uf * res.g).reshaped(m, N);
    res.y = (data_.Yf * res.g).reshaped(p, N);
    return res;
}

SolveResult DeepcController::plan(const PlanContext& ctx) { return solve(ctx.u_ini, ctx.y_ini, ctx.reference); }

SolveResult solve_deepc(const DataMatrices& dm, const Matrix& u_ini, const Matrix& y_ini, const Matrix& reference,
                        const ControlProblem& cp, const QpSettings& settings)
{
    DeepcController ctrl(dm, cp, false, settings);
    return ctrl.solve(u_ini, y_ini, reference);
}

SolveResult solve_regularized_deepc(const DataMatrices& dm, const Matrix& u_ini, const Matrix& y_ini,
                                    const Matrix& reference, const ControlProblem& cp, const QpSettings& settings)
{
    DeepcController ctrl(dm, cp, true, settings);
    return ctrl.solve(u_ini, y_ini, reference);
}

// ---------------------------------------------------------------------------

DataMatrices low_rank_approx(const DataMatrices& dm, const LowRankCutoff& cutoff)
{
    if (cutoff.rank.has_value() == cutoff.relative_threshold.has_value()) {
        throw Error("low_rank_approx: give exactly one of rank or threshold");
    }
    if (cutoff.rank && *cutoff.rank < 1) throw Error("low_rank_approx: rank must be at least 1");
    if (cutoff.relative_threshold && !(*cutoff.relative_threshold > 0.0 && *cutoff.relative_threshold < 1.0)) {
        throw Error("low_rank_approx: threshold must lie in (0, 1)");
    }
    const Matrix H = dm.stacked();
    Eigen::BDCSVD<Matrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Index keep = 0;
    if (cutoff.rank) {
        keep = std::min<Index>(*cutoff.rank, s.size());
    } else {
        for (Index i = 0; i < s.size(); ++i)
            if (s(i) > *cutoff.relative_threshold * s(0)) ++keep;
    }
    const Matrix Hr =
        svd.matrixU().leftCols(keep) * s.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();

    DataMatrices out = dm;
    Index row = 0;
    for (Matrix* block : {&out.Up, &out.Yp, &out.Uf, &out.Yf}) {
        const Index rows = block->rows();
        *block = Hr.middleRows(row, rows);
        row += rows;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed loop

LtiPlant::LtiPlant(StateSpace ss, Vector x0) : ss_(std::move(ss)), x_(std::move(x0))
{
    if (x_.size() != ss_.n()) throw DimensionError("plant: initial state has wrong dimension");
}

Vector LtiPlant::apply(const Vector& u)
{
    if (u.size() != ss_.m()) throw DimensionError("plant: input has wrong dimension");
    Vector y = ss_.C() * x_ + ss_.D() * u;
    x_ = ss_.A() * x_ + ss_.B() * u;
    return y;
}

Matrix reference_window(const Matrix& reference, Index start, Index horizon)
{
    if (reference.cols() < 1) throw LengthError("reference_window: empty reference");
    Matrix out(reference.rows(), horizon);
    for (Index k = 0; k < horizon; ++k) out.col(k) = reference.col(std::min(start + k, reference.cols() - 1));
    return out;
}

namespace {

Index count_violations(const Vector& y, const ControlProblem& cp)
{
    Index count = 0;
    for (Index i = 0; i < y.size(); ++i) {
        const double lo = cp.y_min.size() ? cp.y_min(i) : -kInf;
        const double hi = cp.y_max.size() ? cp.y_max(i) : kInf;
        if (y(i) < lo || y(i) > hi) ++count;
    }
    return count;
}

} // namespace

ClosedLoopResult run_receding_horizon(Plant& plant, PredictiveController& controller, const Matrix& reference,
                                      const RunnerOptions& options)
{
    const ControlProblem& cp = controller.problem();
    const Index m = controller.m();
    const Index p = controller.p();
    if (plant.m() != m || plant.p() != p) throw DimensionError("run_receding_horizon: plant and controller disagree");
    if (reference.rows() != p || reference.cols() < 1) {
        throw DimensionError("run_receding_horizon: reference must be p x (steps)");
    }
    if (options.steps < 0) throw LengthError("run_receding_horizon: negative duration");
    const Index t_ini = cp.t_ini;
    const Matrix warmup = options.warmup ? *options.warmup : Matrix::Zero(m, t_ini);
    if (warmup.rows() != m || warmup.cols() != t_ini) {
        throw DimensionError("run_receding_horizon: warmup must be m x T_ini");
    }

    ClosedLoopResult res;
    res.warmup_inputs = warmup;
    res.warmup_outputs.resize(p, t_ini);
    res.inputs.resize(m, options.steps);
    res.outputs.resize(p, options.steps);
    // Rolling window of the most recent T_ini measured samples.
    Matrix u_ini = warmup;
    Matrix y_ini(p, t_ini);
    try {
        for (Index k = 0; k < t_ini; ++k) {
            y_ini.col(k) = plant.apply(warmup.col(k));
        }
    } catch (const DivergenceError& e) {
        res.inputs.resize(m, 0);
        res.outputs.resize(p, 0);
        res.aborted = true;
        res.abort_reason = std::string("plant diverged during warmup: ") + e.what();
        return res;
    }
    res.warmup_outputs = y_ini;

    auto push = [&](Matrix& window, const Vector& v) {
        if (window.cols() == 0) return;
        const Index w = window.cols();
        if (w > 1) window.leftCols(w - 1) = window.rightCols(w - 1).eval();
        window.col(w - 1) = v;
    };

    Index t = 0;
    while (t < options.steps) {
        const Matrix ref = reference_window(reference, t, cp.horizon);
        const std::optional<Vector> state = plant.state();
        const PlanContext ctx{u_ini, y_ini, state, ref};

        SolveResult plan;
        double solve_ms = 0.0;
        try {
            const auto start = std::chrono::steady_clock::now();
            plan = controller.plan(ctx);
            if (options.record_timing) {
                solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            }
        } catch (const Error& e) {
            res.aborted = true;
            res.abort_reason = std::string("solve failed at step ") + std::to_string(t) + ": " + e.what();
            break;
        }
        if (plan.status == QpStatus::Infeasible || plan.status == QpStatus::Unbounded ||
            !plan.u.allFinite()) {
            res.aborted = true;
            res.abort_reason =
                "solver returned " + to_string(plan.status) + " at step " + std::to_string(t);
            StepRecord rec;
            rec.step = t;
            rec.solve_index = res.solves;
            rec.status = plan.status;
            rec.objective = plan.objective;
            rec.solve_ms = solve_ms;
            rec.qp_iterations = plan.qp.iterations;
            res.steps.push_back(std::move(rec));
            ++res.solves;
            break;
        }

        const double slack = plan.sigma_y.size() ? plan.sigma_y.lpNorm<1>() : 0.0;
        const Index apply_count = std::min(cp.applied_inputs, options.steps - t);
        bool diverged = false;
        for (Index j = 0; j < apply_count; ++j) {
            const Vector u = plan.u.col(j);
            Vector y;
            try {
                y = plant.apply(u);
            } catch (const DivergenceError& e) {
                res.aborted = true;
                res.abort_reason = std::string("plant diverged at step ") + std::to_string(t) + ": " + e.what();
                diverged = true;
                break;
            }
            res.inputs.col(t) = u;
            res.outputs.col(t) = y;
            StepRecord rec;
            rec.step = t;
            rec.solve_index = res.solves;
            rec.status = plan.status;
            rec.objective = plan.objective;
            rec.solve_ms = j == 0 ? solve_ms : 0.0;
            rec.qp_iterations = plan.qp.iterations;
            rec.violation_count = count_violations(y, cp);
            rec.slack_norm = slack;
            rec.u = u;
            rec.y = y;
            res.steps.push_back(std::move(rec));
            push(u_ini, u);
            push(y_ini, y);
            ++t;
        }
        ++res.solves;
        if (diverged) break;
    }
    res.inputs.conservativeResize(m, t);
    res.outputs.conservativeResize(p, t);
    return res;
}

void write_step_diagnostics_csv(std::ostream& os, const ClosedLoopResult& result)
{
    const Index m = result.inputs.rows();
    const Index p = result.outputs.rows();
    os << "step,solve_status,objective,solve_ms,qp_iterations,violation_count";
    for (Index i = 0; i < m; ++i) os << ",u" << (i + 1);
    for (Index i = 0; i < p; ++i) os << ",y" << (i + 1);
    os << '\n';
    for (const StepRecord& rec : result.steps) {
        os << rec.step << ',' << to_string(rec.status) << ',' << format_double(rec.objective) << ','
           << format_double(rec.solve_ms) << ',' << rec.qp_iterations << ',' << rec.violation_count;
        for (Index i = 0; i < m; ++i) os << ',' << (rec.u.size() ? format_double(rec.u(i)) : std::string());
        for (Index i = 0; i < p; ++i) os << ',' << (rec.y.size() ? format_double(rec.y(i)) : std::string());
        os << '\n';
    }
}

} // namespace deepc
