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
#include "doctest.h"

#include "deepc/controllers.hpp"

#include <random>
#include <sstream>

using namespace deepc;

namespace {

StateSpace integrator()
{
    return StateSpace(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
}

Matrix uniform(std::mt19937_64& rng, Index rows, Index cols, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) M(i, j) = dist(rng);
    return M;
}

/// Noiseless data of a system driven by uniform inputs from rest.
DataMatrices lti_data(const StateSpace& ss, Index t_ini, Index N, std::uint64_t seed, Index extra = 20)
{
    std::mt19937_64 rng(seed);
    const Index T = min_data_length(ss.m(), t_ini, N, ss.n()) + extra;
    const Matrix u = uniform(rng, ss.m(), T);
    const Matrix y = simulate(ss, Vector::Zero(ss.n()), u).outputs;
    return partition_data(Trajectory(u, y), t_ini, N, ss.n());
}

Matrix row(std::initializer_list<double> values)
{
    Matrix M(1, static_cast<Index>(values.size()));
    Index j = 0;
    for (double v : values) M(0, j++) = v;
    return M;
}

} // namespace

TEST_CASE("control problem validation")
{
    ControlProblem cp = ControlProblem::make(1, 1, 3, 1);
    CHECK_NOTHROW(cp.validate(1, 1));
    cp.R = Matrix::Zero(1, 1);
    CHECK_THROWS_AS(cp.validate(1, 1), Error);
    cp = ControlProblem::make(1, 1, 3, 1);
    cp.Q = -Matrix::Identity(1, 1);
    CHECK_THROWS_AS(cp.validate(1, 1), Error);
    cp = ControlProblem::make(1, 1, 3, 1);
    cp.applied_inputs = 4;
    CHECK_THROWS_AS(cp.validate(1, 1), Error);
    cp = ControlProblem::make(1, 1, 3, 1);
    cp.u_min = Vector::Constant(1, 1.0);
    cp.u_max = Vector::Constant(1, 0.0);
    CHECK_THROWS_AS(cp.validate(1, 1), Error);
    cp = ControlProblem::make(1, 1, 3, 1);
    cp.lambda_g = -1.0;
    CHECK_THROWS_AS(cp.validate(1, 1), Error);
}

TEST_CASE("MPC on the integrator by scalar calculus")
{
    // (u0 - 1)^2 + u0^2 + u1^2 -> u0 = 1/2, u1 = 0
    const ControlProblem cp = ControlProblem::make(1, 1, 2, 1);
    const SolveResult r = solve_mpc(integrator(), Vector::Zero(1), row({0, 1}), cp);
    REQUIRE(r.optimal());
    CHECK(r.u(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(r.u(0, 1)) <= 1e-8);
    CHECK(r.objective == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("MPC regulation from the origin")
{
    const StateSpace ss = random_controllable_system(3, 2, 2, 4);
    const ControlProblem cp = ControlProblem::make(2, 2, 5, 3);
    const SolveResult r = solve_mpc(ss, Vector::Zero(3), Matrix::Zero(2, 5), cp);
    REQUIRE(r.optimal());
    CHECK(r.u.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(r.objective) <= 1e-12);
}

TEST_CASE("MPC with a pinned input box")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 8);
    ControlProblem cp = ControlProblem::make(1, 1, 4, 2);
    cp.u_min = Vector::Zero(1);
    cp.u_max = Vector::Zero(1);
    const SolveResult r = solve_mpc(ss, Vector::Ones(2), Matrix::Constant(1, 4, 3.0), cp);
    REQUIRE(r.optimal());
    CHECK(r.u.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("DeePC matches MPC on the integrator")
{
    const ControlProblem cp = ControlProblem::make(1, 1, 2, 1);
    const DataMatrices dm = lti_data(integrator(), 1, 2, 3);
    // x = 0 now: last input 0 and last output 0.
    const SolveResult r = solve_deepc(dm, row({0}), row({0}), row({0, 1}), cp);
    REQUIRE(r.optimal());
    CHECK(r.u(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(std::abs(r.u(0, 1)) <= 1e-6);
}

TEST_CASE("DeePC tracks a reachable reference exactly")
{
    const StateSpace ss = random_controllable_system(2, 1, 2, 12);
    const Index t_ini = 2, N = 6;
    const DataMatrices dm = lti_data(ss, t_ini, N, 13);
    std::mt19937_64 rng(14);
    const Matrix u = uniform(rng, 1, t_ini + N);
    const Matrix y = simulate(ss, Vector::Constant(2, 0.3), u).outputs;
    ControlProblem cp = ControlProblem::make(1, 2, N, t_ini);
    cp.R = 1e-9 * Matrix::Identity(1, 1);
    const SolveResult r = solve_deepc(dm, u.leftCols(t_ini), y.leftCols(t_ini), y.rightCols(N), cp);
    REQUIRE(r.optimal());
    const double tracking = (r.y - y.rightCols(N)).squaredNorm();
    CHECK(tracking <= 1e-6);
}

TEST_CASE("single-column data recovers the scaling")
{
    Matrix u(1, 3), y(1, 3);
    u << 1, 2, -1;
    y << 0.5, 1.5, 2.0;
    const DataMatrices dm = partition_data(Trajectory(u, y), 1, 2);
    REQUIRE(dm.g_dim() == 1);
    const double alpha = -2.5;
    const ControlProblem cp = ControlProblem::make(1, 1, 2, 1);
    const SolveResult r = solve_deepc(dm, alpha * u.leftCols(1), alpha * y.leftCols(1), Matrix::Zero(1, 2), cp);
    REQUIRE(r.optimal());
    CHECK(r.g(0) == doctest::Approx(alpha).epsilon(1e-8));
}

TEST_CASE("DeePC predictions satisfy the model dynamics")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Index n = 2 + static_cast<Index>(seed % 2);
        const StateSpace ss = random_controllable_system(n, 1, 2, seed * 7);
        const Index t_ini = n, N = 6;
        const DataMatrices dm = lti_data(ss, t_ini, N, seed);
        std::mt19937_64 rng(seed);
        const Matrix u_ini = uniform(rng, 1, t_ini);
        const Matrix y_ini = simulate(ss, uniform(rng, n, 1), u_ini).outputs;
        ControlProblem cp = ControlProblem::make(1, 2, N, t_ini);
        cp.u_min = Vector::Constant(1, -1.0);
        cp.u_max = Vector::Constant(1, 1.0);
        const SolveResult r = solve_deepc(dm, u_ini, y_ini, uniform(rng, 2, N, -2, 2), cp);
        REQUIRE(r.optimal());
        const Vector x_hat = reconstruct_initial_state(ss, u_ini, y_ini).current;
        const Vector model_y = observability_matrix(ss, N) * x_hat + toeplitz_impulse(ss, N) * r.u.reshaped();
        CHECK((r.y.reshaped() - model_y).norm() <= 1e-6);
        CHECK(r.u.maxCoeff() <= 1.0 + 1e-6);
        CHECK(r.u.minCoeff() >= -1.0 - 1e-6);
    }
}

TEST_CASE("regularized DeePC on consistent data has no slack")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 21);
    const Index t_ini = 2, N = 5;
    const DataMatrices dm = lti_data(ss, t_ini, N, 22);
    std::mt19937_64 rng(23);
    const Matrix u_ini = uniform(rng, 1, t_ini);
    const Matrix y_ini = simulate(ss, uniform(rng, 2, 1), u_ini).outputs;
    ControlProblem cp = ControlProblem::make(1, 1, N, t_ini);
    cp.lambda_y = 1e5;
    const SolveResult r = solve_regularized_deepc(dm, u_ini, y_ini, Matrix::Ones(1, N), cp);
    REQUIRE(r.optimal());
    CHECK(r.sigma_y.lpNorm<1>() <= 1e-6);
}

TEST_CASE("large slack weight reproduces plain DeePC")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 31);
    const Index t_ini = 2, N = 5;
    const DataMatrices dm = lti_data(ss, t_ini, N, 32);
    std::mt19937_64 rng(33);
    const Matrix u_ini = uniform(rng, 1, t_ini);
    const Matrix y_ini = simulate(ss, uniform(rng, 2, 1), u_ini).outputs;
    ControlProblem cp = ControlProblem::make(1, 1, N, t_ini);
    const Matrix ref = Matrix::Constant(1, N, 0.7);
    const SolveResult plain = solve_deepc(dm, u_ini, y_ini, ref, cp);
    cp.lambda_y = 1e8;
    const SolveResult reg = solve_regularized_deepc(dm, u_ini, y_ini, ref, cp);
    REQUIRE(plain.optimal());
    REQUIRE(reg.optimal());
    CHECK((plain.u - reg.u).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("huge g weight drives the plan to zero")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 41);
    const DataMatrices dm = lti_data(ss, 2, 4, 42);
    ControlProblem cp = ControlProblem::make(1, 1, 4, 2);
    cp.lambda_g = 1e9;
    cp.lambda_y = 1.0;
    const SolveResult r = solve_regularized_deepc(dm, Matrix::Zero(1, 2), Matrix::Zero(1, 2), Matrix::Zero(1, 4), cp);
    REQUIRE(r.optimal());
    CHECK(r.g.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(r.u.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("slack shrinks as its weight grows")
{
    const StateSpace ss = random_controllable_system(3, 1, 2, 51);
    const Index t_ini = 3, N = 5;
    const DataMatrices dm = lti_data(ss, t_ini, N, 52);
    std::mt19937_64 rng(53);
    const Matrix u_ini = uniform(rng, 1, t_ini);
    Matrix y_ini = simulate(ss, uniform(rng, 3, 1), u_ini).outputs;
    y_ini += uniform(rng, 2, t_ini, -0.5, 0.5);
    ControlProblem cp = ControlProblem::make(1, 2, N, t_ini);
    cp.lambda_g = 0.1;
    double previous = kInf;
    for (double lambda_y : {1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3, 1e4}) {
        cp.lambda_y = lambda_y;
        const SolveResult r = solve_regularized_deepc(dm, u_ini, y_ini, Matrix::Ones(2, N), cp);
        REQUIRE(r.optimal());
        const double norm = r.sigma_y.lpNorm<1>();
        CAPTURE(lambda_y);
        CHECK(norm <= previous + 1e-6);
        previous = norm;
    }
}

TEST_CASE("inconsistent initial window forces slack")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 61);
    const Index t_ini = 3, N = 5;
    const DataMatrices dm = lti_data(ss, t_ini, N, 62);
    std::mt19937_64 rng(63);
    const Matrix u_ini = uniform(rng, 1, t_ini);
    Matrix y_ini = simulate(ss, uniform(rng, 2, 1), u_ini).outputs;
    y_ini(0, 0) += 1.0;
    ControlProblem cp = ControlProblem::make(1, 1, N, t_ini);
    cp.lambda_y = 1e5;
    const SolveResult r = solve_regularized_deepc(dm, u_ini, y_ini, Matrix::Zero(1, N), cp);
    REQUIRE(r.optimal());
    CHECK(r.sigma_y.lpNorm<1>() >= 0.1);
    CHECK(solve_deepc(dm, u_ini, y_ini, Matrix::Zero(1, N), ControlProblem::make(1, 1, N, t_ini)).status ==
          QpStatus::Infeasible);
}

TEST_CASE("low-rank approximation")
{
    // Rank-one data.
    DataMatrices dm;
    dm.t_ini = 1;
    dm.horizon = 1;
    const Vector a = Vector::LinSpaced(4, 1.0, 4.0);
    const Vector b = Vector::LinSpaced(5, -1.0, 2.0);
    const Matrix H = a * b.transpose();
    dm.Up = H.row(0);
    dm.Yp = H.row(1);
    dm.Uf = H.row(2);
    dm.Yf = H.row(3);
    const DataMatrices r1 = low_rank_approx(dm, LowRankCutoff::with_rank(1));
    CHECK((r1.stacked() - H).cwiseAbs().maxCoeff() <= 1e-12);

    const StateSpace ss = random_controllable_system(2, 1, 1, 71);
    const DataMatrices full = lti_data(ss, 2, 3, 72);
    const Index rank = numeric_rank(full.stacked());
    const DataMatrices same = low_rank_approx(full, LowRankCutoff::with_rank(rank));
    CHECK((same.stacked() - full.stacked()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK_THROWS_AS(low_rank_approx(full, LowRankCutoff{}), Error);
    CHECK_THROWS_AS(low_rank_approx(full, LowRankCutoff::with_threshold(1.5)), Error);
}

TEST_CASE("low-rank truncation at the theoretical rank keeps the span")
{
    const StateSpace ss = random_controllable_system(3, 1, 2, 81);
    const Index t_ini = 3, N = 4, n = 3;
    const DataMatrices dm = lti_data(ss, t_ini, N, 82);
    const DataMatrices lr = low_rank_approx(dm, LowRankCutoff::with_rank(1 * (t_ini + N) + n));
    const Matrix H = lr.stacked();
    std::mt19937_64 rng(83);
    for (int k = 0; k < 5; ++k) {
        const Matrix u = uniform(rng, 1, t_ini + N);
        const Matrix y = simulate(ss, uniform(rng, n, 1), u).outputs;
        Vector w(H.rows());
        w << u.leftCols(t_ini).reshaped(), y.leftCols(t_ini).reshaped(), u.rightCols(N).reshaped(),
            y.rightCols(N).reshaped();
        const Vector g = H.completeOrthogonalDecomposition().solve(w);
        CHECK((H * g - w).norm() <= 1e-6 * std::max(1.0, w.norm()));
    }
    const DataMatrices th = low_rank_approx(dm, LowRankCutoff::with_threshold(1e-9));
    CHECK(numeric_rank(th.stacked()) == 1 * (t_ini + N) + n);
}

TEST_CASE("receding horizon at equilibrium stays at rest")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 91);
    LtiPlant plant(ss, Vector::Zero(2));
    MpcController mpc(ss, ControlProblem::make(1, 1, 5, 2));
    RunnerOptions opts;
    opts.steps = 12;
    const ClosedLoopResult res = run_receding_horizon(plant, mpc, Matrix::Zero(1, 1), opts);
    CHECK_FALSE(res.aborted);
    CHECK(res.length() == 12);
    CHECK(res.inputs.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(res.outputs.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("applying whole plans solves once per horizon")
{
    const StateSpace ss = random_controllable_system(2, 1, 1, 92);
    LtiPlant plant(ss, Vector::Zero(2));
    ControlProblem cp = ControlProblem::make(1, 1, 4, 2);
    cp.applied_inputs = 4;
    MpcController mpc(ss, cp);
    RunnerOptions opts;
    opts.steps = 10;
    const ClosedLoopResult res = run_receding_horizon(plant, mpc, Matrix::Ones(1, 1), opts);
    CHECK(res.solves == 3);
    CHECK(res.length() == 10);
}

TEST_CASE("closed-loop MPC and DeePC agree")
{
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Index n = 2 + static_cast<Index>(seed % 2);
        const StateSpace ss = random_controllable_system(n, 1, 1, seed + 100);
        const Index t_ini = n, N = 8;
        const DataMatrices dm = lti_data(ss, t_ini, N, seed + 200);
        ControlProblem cp = ControlProblem::make(1, 1, N, t_ini);
        cp.u_min = Vector::Constant(1, -1.0);
        cp.u_max = Vector::Constant(1, 1.0);
        cp.y_min = Vector::Constant(1, -10.0);
        cp.y_max = Vector::Constant(1, 10.0);
        std::mt19937_64 rng(seed);
        const Matrix ref = uniform(rng, 1, 20, -2.0, 2.0);
        RunnerOptions opts;
        opts.steps = 20;
        LtiPlant p1(ss, Vector::Zero(n)), p2(ss, Vector::Zero(n));
        MpcController mpc(ss, cp, {}, StateEstimator::Reconstruct);
        DeepcController deepc(dm, cp, false);
        const ClosedLoopResult a = run_receding_horizon(p1, mpc, ref, opts);
        const ClosedLoopResult b = run_receding_horizon(p2, deepc, ref, opts);
        REQUIRE_FALSE(a.aborted);
        REQUIRE_FALSE(b.aborted);
        CHECK((a.inputs - b.inputs).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("infeasible solves abort the run")
{
    const StateSpace ss = integrator();
    LtiPlant plant(ss, Vector::Constant(1, 5.0));
    ControlProblem cp = ControlProblem::make(1, 1, 3, 1);
    cp.u_min = Vector::Constant(1, -0.1);
    cp.u_max = Vector::Constant(1, 0.1);
    cp.y_max = Vector::Constant(1, 1.0);
    MpcController mpc(ss, cp);
    RunnerOptions opts;
    opts.steps = 5;
    const ClosedLoopResult res = run_receding_horizon(plant, mpc, Matrix::Zero(1, 1), opts);
    CHECK(res.aborted);
    CHECK(res.length() == 0);
    CHECK(res.abort_reason.find("infeasible") != std::string::npos);
}

TEST_CASE("reference window holds the last column")
{
    const Matrix ref = row({1, 2, 3});
    CHECK(reference_window(ref, 1, 4) == row({2, 3, 3, 3}));
    CHECK(reference_window(ref, 5, 2) == row({3, 3}));
}

TEST_CASE("diagnostics CSV layout")
{
    const StateSpace ss = integrator();
    LtiPlant plant(ss, Vector::Zero(1));
    ControlProblem cp = ControlProblem::make(1, 1, 3, 1);
    cp.y_max = Vector::Constant(1, 0.5);
    MpcController mpc(ss, cp);
    RunnerOptions opts;
    opts.steps = 3;
    const ClosedLoopResult res = run_receding_horizon(plant, mpc, Matrix::Ones(1, 1), opts);
    std::stringstream ss_out;
    write_step_diagnostics_csv(ss_out, res);
    std::string header;
    std::getline(ss_out, header);
    CHECK(header == "step,solve_status,objective,solve_ms,qp_iterations,violation_count,u1,y1");
    std::string line;
    int rows = 0;
    while (std::getline(ss_out, line)) ++rows;
    CHECK(rows == 3);
    for (const auto& rec : res.steps) CHECK(rec.solve_ms == 0.0);
}
