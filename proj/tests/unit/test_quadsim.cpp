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

#include "deepc/behavioral.hpp"
#include "deepc/quadsim.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <numbers>
#include <random>

using namespace deepc;

namespace {

QuadParams quiet()
{
    QuadParams p;
    p.noise_std = 0.0;
    return p;
}

Eigen::Vector4d hover(const QuadParams& p)
{
    return Eigen::Vector4d::Constant(p.hover_input());
}

/// Translational plus rotational kinetic energy and potential energy.
double mechanical_energy(const QuadState& s, const QuadParams& p)
{
    const double ca = std::cos(s.attitude(0)), sa = std::sin(s.attitude(0));
    const double cb = std::cos(s.attitude(1)), sb = std::sin(s.attitude(1));
    Eigen::Matrix3d W;
    W << 1.0, 0.0, -sb, 0.0, ca, sa * cb, 0.0, -sa, ca * cb;
    const Vector3 omega = W * s.rates;
    return 0.5 * p.mass * s.velocity.squaredNorm() + p.mass * p.gravity * s.position(2) +
           0.5 * omega.dot(p.inertia.cwiseProduct(omega));
}

} // namespace

TEST_CASE("hover thrust balances gravity")
{
    const QuadParams p = quiet();
    std::mt19937_64 rng(1);
    QuadState s;
    s.position = Vector3(0.3, -0.2, 1.0);
    const QuadStepResult r = quad_step(s, hover(p), p, rng);
    CHECK((r.next.position - s.position).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(r.next.to_vector().tail(9).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(quad_dynamics(s.to_vector(), hover(p), p).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_FALSE(r.clamped);
}

TEST_CASE("zero thrust is free fall")
{
    const QuadParams p = quiet();
    std::mt19937_64 rng(1);
    const QuadStepResult r = quad_step(QuadState{}, Eigen::Vector4d::Zero(), p, rng);
    CHECK(r.next.velocity(2) == doctest::Approx(-p.gravity * p.dt).epsilon(1e-12));
    CHECK(r.next.position(2) == doctest::Approx(-0.5 * p.gravity * p.dt * p.dt).epsilon(1e-12));
}

TEST_CASE("noiseless measurement equals the state")
{
    const QuadParams p = quiet();
    std::mt19937_64 rng(3);
    QuadState s;
    s.velocity = Vector3(0.1, 0.2, -0.1);
    s.rates = Vector3(0.05, -0.02, 0.01);
    const QuadStepResult r = quad_step(s, Eigen::Vector4d(0.3, 0.35, 0.32, 0.31), p, rng);
    CHECK(r.measurement == r.next.to_vector());
}

TEST_CASE("out-of-range thrusts are clamped and flagged")
{
    const QuadParams p = quiet();
    std::mt19937_64 rng(3);
    const QuadStepResult a = quad_step(QuadState{}, Eigen::Vector4d(1.5, 1.5, 1.5, 1.5), p, rng);
    const QuadStepResult b = quad_step(QuadState{}, Eigen::Vector4d::Ones(), p, rng);
    CHECK(a.clamped);
    CHECK_FALSE(b.clamped);
    CHECK(a.next.to_vector() == b.next.to_vector());
}

TEST_CASE("zero thrust injects no energy")
{
    const QuadParams p = quiet();
    std::mt19937_64 rng(4);
    QuadState s;
    s.position = Vector3(0.0, 0.0, 5.0);
    s.velocity = Vector3(0.5, -0.3, 0.2);
    s.attitude = Vector3(0.2, -0.1, 0.3);
    s.rates = Vector3(0.4, -0.3, 0.5);
    double e = mechanical_energy(s, p);
    for (int k = 0; k < 30; ++k) {
        s = quad_step(s, Eigen::Vector4d::Zero(), p, rng).next;
        const double next = mechanical_energy(s, p);
        CHECK(next <= e + 1e-6);
        e = next;
    }
}

TEST_CASE("measurement noise is white")
{
    QuadParams p;
    p.noise_std = 0.01;
    std::mt19937_64 rng(99);
    const Index samples = 10000;
    Vector noise(samples);
    for (Index k = 0; k < samples; ++k) {
        const QuadStepResult r = quad_step(QuadState{}, hover(p), p, rng);
        noise(k) = r.measurement(2) - r.next.position(2);
    }
    const double var = noise.squaredNorm() / samples;
    CHECK(std::sqrt(var) == doctest::Approx(0.01).epsilon(0.05));
    for (Index lag = 1; lag <= 5; ++lag) {
        const double c = noise.head(samples - lag).dot(noise.tail(samples - lag)) / samples / var;
        CAPTURE(lag);
        CHECK(std::abs(c) < 0.1);
    }
}

TEST_CASE("the simulator refuses pitch at ninety degrees")
{
    const QuadParams p = quiet();
    std::mt19937_64 rng(5);
    QuadState s;
    s.attitude(1) = std::numbers::pi / 2.0;
    CHECK_THROWS_AS(quad_step(s, hover(p), p, rng), DivergenceError);
    QuadState far;
    far.position(0) = 2e6;
    CHECK_THROWS_AS(quad_step(far, hover(p), p, rng), DivergenceError);
}

TEST_CASE("hover linearization predicts small perturbations")
{
    const QuadParams p = quiet();
    const StateSpace lin = hover_linearization(p);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Vector dx(12);
    Eigen::Vector4d du;
    for (Index i = 0; i < 12; ++i) dx(i) = 1e-4 * d(rng);
    for (Index i = 0; i < 4; ++i) du(i) = 1e-4 * d(rng);
    const Vector next = quad_step(QuadState::from_vector(dx), hover(p) + du, p, rng).next.to_vector();
    const Vector predicted = lin.A() * dx + lin.B() * du;
    CHECK((next - predicted).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("LQR gain satisfies the Riccati equation")
{
    // Double integrator with dt = 1.
    Matrix A(2, 2), B(2, 1);
    A << 1, 1, 0, 1;
    B << 0.5, 1;
    const StateSpace ss(A, B, Matrix::Identity(2, 2), Matrix::Zero(2, 1));
    const Matrix Q = Matrix::Identity(2, 2);
    const Matrix R = Matrix::Identity(1, 1);
    const Matrix K = dlqr(ss, Q, R);
    // Closed-loop value recursion: P = Q + K'RK + (A-BK)'P(A-BK), solved by a
    // Kronecker linear system, then K must equal (R + B'PB)^{-1} B'PA.
    const Matrix Acl = A - B * K;
    const Matrix M = Matrix::Identity(4, 4) - Eigen::kroneckerProduct(Acl.transpose(), Acl.transpose()).eval();
    const Matrix S = Q + K.transpose() * R * K;
    const Vector vecP = M.lu().solve(Eigen::Map<const Vector>(S.data(), 4));
    const Matrix P = Eigen::Map<const Matrix>(vecP.data(), 2, 2);
    const Matrix K_check = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    CHECK((K - K_check).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(spectral_radius(Acl) < 1.0);
}

TEST_CASE("excitation data has the expected budget and is reproducible")
{
    const QuadParams p;
    const ExcitationData a = collect_excitation_data(p, 214, 17);
    const ExcitationData b = collect_excitation_data(p, 214, 17);
    const ExcitationData c = collect_excitation_data(p, 214, 18);
    CHECK(a.trajectory.length() == 214);
    CHECK(a.trajectory.m() == 4);
    CHECK(a.trajectory.p() == 12);
    CHECK(a.trajectory.inputs() == b.trajectory.inputs());
    CHECK(a.trajectory.outputs() == b.trajectory.outputs());
    CHECK(a.trajectory.inputs() != c.trajectory.inputs());
    CHECK(a.persistently_exciting);
    const ExcitationCheck pe = is_persistently_exciting(a.trajectory.inputs(), 1 + 30 + 12);
    CHECK(pe.exciting);
    CHECK(pe.rank == 4 * 43);
    CHECK((a.trajectory.inputs().array() >= 0.0).all());
    CHECK((a.trajectory.inputs().array() <= 1.0).all());
    CHECK_THROWS_AS(collect_excitation_data(p, 0, 1), LengthError);
}
