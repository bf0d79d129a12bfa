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

#include "deepc/sysid.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <random>

using namespace deepc;

namespace {

/// Full-state system: the outputs are the states.
StateSpace full_state(Index n, Index m, std::uint64_t seed)
{
    const StateSpace base = random_controllable_system(n, m, 1, seed);
    return StateSpace(base.A(), base.B(), Matrix::Identity(n, n), Matrix::Zero(n, m));
}

Trajectory full_state_data(const StateSpace& ss, Index T, std::uint64_t seed, double noise = 0.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u_dist(-1.0, 1.0);
    std::normal_distribution<double> n_dist(0.0, 1.0);
    Matrix u(ss.m(), T);
    for (Index j = 0; j < T; ++j)
        for (Index i = 0; i < ss.m(); ++i) u(i, j) = u_dist(rng);
    Vector x0(ss.n());
    for (Index i = 0; i < ss.n(); ++i) x0(i) = u_dist(rng);
    Matrix y = simulate(ss, x0, u).outputs;
    if (noise > 0.0)
        for (Index j = 0; j < T; ++j)
            for (Index i = 0; i < ss.p(); ++i) y(i, j) += noise * n_dist(rng);
    return Trajectory(u, y);
}

double operator_norm(const Matrix& M)
{
    return Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
}

} // namespace

TEST_CASE("noiseless data recovers the model exactly")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Index n = 1 + static_cast<Index>(seed % 4);
        const Index m = 1 + static_cast<Index>(seed % 2);
        const StateSpace ss = full_state(n, m, seed);
        const IdResult id = identify_full_state(full_state_data(ss, 60, seed + 100));
        CAPTURE(seed);
        CHECK_FALSE(id.rank_deficient);
        CHECK(id.order == n);
        CHECK((id.model.A() - ss.A()).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((id.model.B() - ss.B()).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(id.model.C() == Matrix::Identity(n, n));
        CHECK(id.model.D() == Matrix::Zero(n, m));
        CHECK(id.residual_norms.maxCoeff() <= 1e-8);
    }
}

TEST_CASE("empty excitation is flagged as rank deficient")
{
    const Trajectory quiet(Matrix::Zero(1, 20), Matrix::Zero(2, 20));
    const IdResult id = identify_full_state(quiet);
    CHECK(id.rank_deficient);
    CHECK(id.model.A().allFinite());
    CHECK(id.model.B().allFinite());
}

TEST_CASE("a dominant ridge weight shrinks the model to zero")
{
    const StateSpace ss = full_state(3, 1, 9);
    const Trajectory data = full_state_data(ss, 50, 10);
    const IdResult loose = identify_full_state(data, 1e-3);
    const IdResult tight = identify_full_state(data, 1e12);
    CHECK(loose.model.A().cwiseAbs().maxCoeff() > 0.01);
    CHECK(tight.model.A().cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(tight.model.B().cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("identification rejects short records and negative ridge")
{
    const Trajectory shortrec(Matrix::Zero(1, 3), Matrix::Zero(3, 3));
    CHECK_THROWS_AS(identify_full_state(shortrec), LengthError);
    const Trajectory ok(Matrix::Ones(1, 10), Matrix::Ones(1, 10));
    CHECK_THROWS_AS(identify_full_state(ok, -1.0), Error);
}

TEST_CASE("identification error shrinks with the noise level")
{
    std::vector<double> medians;
    for (double sigma : {0.1, 0.01, 0.001}) {
        std::vector<double> errors;
        for (std::uint64_t seed = 1; seed <= 12; ++seed) {
            const StateSpace ss = full_state(3, 2, seed);
            const IdResult id = identify_full_state(full_state_data(ss, 200, seed + 50, sigma));
            errors.push_back(operator_norm(id.model.A() - ss.A()));
        }
        std::nth_element(errors.begin(), errors.begin() + 6, errors.end());
        medians.push_back(errors[6]);
    }
    CAPTURE(medians[0]);
    CAPTURE(medians[1]);
    CAPTURE(medians[2]);
    CHECK(medians[0] > medians[1]);
    CHECK(medians[1] > medians[2]);
}
