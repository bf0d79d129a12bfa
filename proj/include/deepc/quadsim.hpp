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
#ifndef DEEPC_QUADSIM_HPP
#define DEEPC_QUADSIM_HPP

#include "deepc/behavioral.hpp"
#include "deepc/controllers.hpp"
#include "deepc/ltisys.hpp"

#include <random>

namespace deepc {

using Vector3 = Eigen::Vector3d;

/// Rigid-body quadrotor state. Attitude is ZYX Euler (roll, pitch, yaw);
/// `rates` are the Euler-angle rates, not body rates.
struct QuadState {
    Vector3 position = Vector3::Zero();
    Vector3 velocity = Vector3::Zero();
    Vector3 attitude = Vector3::Zero();
    Vector3 rates = Vector3::Zero();

    static constexpr Index kSize = 12;

    /// (x, y, z, vx, vy, vz, roll, pitch, yaw, roll rate, pitch rate, yaw rate)
    Vector to_vector() const;
    static QuadState from_vector(const Vector& v);
};

struct QuadParams {
    double mass = 0.5;
    double gravity = 9.81;
    Vector3 inertia = Vector3(4.9e-3, 4.9e-3, 8.8e-3);
    double arm = 0.25;
    /// Rotor thrust in newtons at unit input; full input gives 2.5x the hover share.
    double k_thrust = 2.5 * 0.5 * 9.81 / 4.0;
    /// Yaw torque per newton of rotor thrust.
    double yaw_coefficient = 0.016;
    double dt = 0.1;
    double noise_std = 0.01;

    /// Per-rotor input that balances gravity.
    double hover_input() const { return mass * gravity / (4.0 * k_thrust); }
    void validate() const;
};

struct QuadStepResult {
    QuadState next;
    Vector measurement;    ///< next state plus white noise
    bool clamped = false;  ///< an input was outside [0, 1]
};

/// Time derivative of the 12-vector state under rotor thrust inputs u
/// (plus configuration: rotors 1 and 3 on the x axis, 2 and 4 on y).
Vector quad_dynamics(const Vector& state, const Eigen::Vector4d& u, const QuadParams& params);

/// One RK4 step of length params.dt. Inputs are clamped to [0, 1].
/// Throws DivergenceError past 1e6 in magnitude or near pitch +-pi/2.
QuadStepResult quad_step(const QuadState& state, const Eigen::Vector4d& thrusts, const QuadParams& params,
                         std::mt19937_64& rng);

/// Discrete-time linearization of the noiseless step map about hover,
/// by central differences. Outputs are the full state.
StateSpace hover_linearization(const QuadParams& params);

/// Infinite-horizon discrete LQR gain, u = -K x, by Riccati iteration.
Matrix dlqr(const StateSpace& ss, const Matrix& Q, const Matrix& R, int max_iter = 10000, double tol = 1e-10);

/// Quadrotor as a closed-loop plant. `apply(u_t)` returns the noisy full-state
/// measurement y_t of the current state, then integrates one step.
/// `state()` exposes the same measurement, so state feedback sees noise too.
class QuadPlant : public Plant {
public:
    QuadPlant(QuadParams params, QuadState initial, std::uint64_t noise_seed);

    Index m() const override { return 4; }
    Index p() const override { return QuadState::kSize; }
    std::optional<Vector> state() const override { return measurement_; }
    Vector apply(const Vector& u) override;

    const QuadState& true_state() const { return state_; }
    bool clamped() const { return clamped_; }

private:
    QuadParams params_;
    QuadState state_;
    std::mt19937_64 rng_;
    Vector measurement_;
    bool clamped_ = false;
};

struct ExcitationOptions {
    /// Weights of the stabilizing LQR law: position and velocity states,
    /// attitude and rate states, and inputs.
    double lqr_translation_weight = 0.01;
    double lqr_attitude_weight = 0.1;
    double lqr_input_weight = 10.0;
    /// Half-width of the uniform input perturbation about the stabilizing law.
    double band = 0.05;
    /// Attempts after a divergence, halving the band each time.
    int max_retries = 4;
    /// Order checked for persistency of excitation (T_ini + N + n).
    Index pe_order = 43;
};

struct ExcitationData {
    Trajectory trajectory;
    bool persistently_exciting = false;
    Index pe_rank = 0;
    double band = 0.0;
    int retries = 0;
};

/**
 * @brief Input/output data from hover.
 *
 * Inputs are u = clamp(u_hover - K (y - x_hover) + w, 0, 1) with w uniform in
 * [-band, band]^4 and K a hover LQR gain; an open-loop uniform law cannot keep
 * the vehicle airborne for the whole record. Seeded and deterministic.
 */
ExcitationData collect_excitation_data(const QuadParams& params, Index samples, std::uint64_t seed,
                                       const ExcitationOptions& options = {});

} // namespace deepc

#endif // DEEPC_QUADSIM_HPP
