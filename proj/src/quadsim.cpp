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
#include "deepc/quadsim.hpp"

#include <cmath>
#include <numbers>

namespace deepc {

namespace {

constexpr double kDivergence = 1e6;
constexpr double kMinPitchCosine = 1e-6;

double wrap_angle(double a)
{
    constexpr double pi = std::numbers::pi;
    double w = std::remainder(a, 2.0 * pi);
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

void check_finite(const Vector& x)
{
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergence) {
        throw DivergenceError("quadrotor state diverged");
    }
    if (std::abs(std::cos(x(7))) < kMinPitchCosine) throw DivergenceError("quadrotor pitch reached +-pi/2");
}

Eigen::Vector4d clamp_inputs(const Eigen::Vector4d& u, bool& clamped)
{
    const Eigen::Vector4d c = u.cwiseMax(0.0).cwiseMin(1.0);
    clamped = clamped || (c != u);
    return c;
}

} // namespace

Vector QuadState::to_vector() const
{
    Vector v(kSize);
    v << position, velocity, attitude, rates;
    return v;
}

QuadState QuadState::from_vector(const Vector& v)
{
    if (v.size() != kSize) throw DimensionError("quadrotor state must have 12 entries");
    QuadState s;
    s.position = v.segment<3>(0);
    s.velocity = v.segment<3>(3);
    s.attitude = v.segment<3>(6);
    s.rates = v.segment<3>(9);
    return s;
}

void QuadParams::validate() const
{
    if (!(mass > 0 && gravity > 0 && arm > 0 && k_thrust > 0 && yaw_coefficient > 0 && dt > 0)) {
        throw Error("quadrotor parameters must be positive");
    }
    if (!(inertia.array() > 0).all()) throw Error("quadrotor inertia must be positive");
    if (!(noise_std >= 0)) throw Error("quadrotor noise level must be nonnegative");
}

Vector quad_dynamics(const Vector& s, const Eigen::Vector4d& u, const QuadParams& prm)
{
    const double roll = s(6), pitch = s(7), yaw = s(8);
    const Vector3 eta_dot = s.segment<3>(9);
    const double sa = std::sin(roll), ca = std::cos(roll);
    const double sb = std::sin(pitch), cb = std::cos(pitch);
    const double sg = std::sin(yaw), cg = std::cos(yaw);

    const Eigen::Vector4d T = prm.k_thrust * u;
    const double total = T.sum();
    // Third column of R = Rz(yaw) Ry(pitch) Rx(roll).
    const Vector3 body_z(cg * sb * ca + sg * sa, sg * sb * ca - cg * sa, cb * ca);
    const Vector3 accel = (total / prm.mass) * body_z - Vector3(0.0, 0.0, prm.gravity);

    const Vector3 torque(prm.arm * (T(1) - T(3)), prm.arm * (T(2) - T(0)),
                         prm.yaw_coefficient * (T(0) - T(1) + T(2) - T(3)));

    // Body rates from Euler rates, omega = W eta_dot.
    Eigen::Matrix3d W;
    W << 1.0, 0.0, -sb, 0.0, ca, sa * cb, 0.0, -sa, ca * cb;
    const Vector3 omega = W * eta_dot;
    const Vector3 I = prm.inertia;
    const Vector3 I_omega = I.cwiseProduct(omega);
    const Vector3 omega_dot = (torque - omega.cross(I_omega)).cwiseQuotient(I);

    const double ad = eta_dot(0), bd = eta_dot(1), gd = eta_dot(2);
    const Vector3 W_dot_eta(-cb * bd * gd,
                            -sa * ad * bd + ca * cb * ad * gd - sa * sb * bd * gd,
                            -ca * ad * bd - sa * cb * ad * gd - ca * sb * bd * gd);
    const Vector3 eta_ddot = W.partialPivLu().solve(omega_dot - W_dot_eta);

    Vector d(QuadState::kSize);
    d << s.segment<3>(3), accel, eta_dot, eta_ddot;
    return d;
}

QuadStepResult quad_step(const QuadState& state, const Eigen::Vector4d& thrusts, const QuadParams& params,
                         std::mt19937_64& rng)
{
    QuadStepResult out;
    const Eigen::Vector4d u = clamp_inputs(thrusts, out.clamped);
    const Vector x = state.to_vector();
    check_finite(x);
    const double h = params.dt;
    const Vector k1 = quad_dynamics(x, u, params);
    const Vector k2 = quad_dynamics(x + 0.5 * h * k1, u, params);
    const Vector k3 = quad_dynamics(x + 0.5 * h * k2, u, params);
    const Vector k4 = quad_dynamics(x + h * k3, u, params);
    Vector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_finite(next);
    for (Index i = 6; i < 9; ++i) next(i) = wrap_angle(next(i));
    out.next = QuadState::from_vector(next);

    out.measurement = next;
    if (params.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, params.noise_std);
        for (Index i = 0; i < next.size(); ++i) out.measurement(i) += noise(rng);
    }
    return out;
}

StateSpace hover_linearization(const QuadParams& params)
{
    const Index n = QuadState::kSize;
    QuadParams quiet = params;
    quiet.noise_std = 0.0;
    std::mt19937_64 rng(0);
    const Eigen::Vector4d u0 = Eigen::Vector4d::Constant(params.hover_input());
    constexpr double h = 1e-5;
    Matrix A(n, n), B(n, 4);
    for (Index j = 0; j < n; ++j) {
        Vector xp = Vector::Zero(n), xm = Vector::Zero(n);
        xp(j) = h;
        xm(j) = -h;
        const Vector fp = quad_step(QuadState::from_vector(xp), u0, quiet, rng).next.to_vector();
        const Vector fm = quad_step(QuadState::from_vector(xm), u0, quiet, rng).next.to_vector();
        A.col(j) = (fp - fm) / (2.0 * h);
    }
    for (Index j = 0; j < 4; ++j) {
        Eigen::Vector4d up = u0, um = u0;
        up(j) += h;
        um(j) -= h;
        const Vector fp = quad_step(QuadState{}, up, quiet, rng).next.to_vector();
        const Vector fm = quad_step(QuadState{}, um, quiet, rng).next.to_vector();
        B.col(j) = (fp - fm) / (2.0 * h);
    }
    return StateSpace(A, B, Matrix::Identity(n, n), Matrix::Zero(n, 4));
}

Matrix dlqr(const StateSpace& ss, const Matrix& Q, const Matrix& R, int max_iter, double tol)
{
    const Matrix& A = ss.A();
    const Matrix& B = ss.B();
    Matrix P = Q;
    for (int it = 0; it < max_iter; ++it) {
        const Matrix BtP = B.transpose() * P;
        const Matrix K = (R + BtP * B).ldlt().solve(BtP * A);
        Matrix next = Q + A.transpose() * P * (A - B * K);
        next = 0.5 * (next + next.transpose());
        const double change = (next - P).cwiseAbs().maxCoeff();
        P = std::move(next);
        if (change <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) break;
    }
    const Matrix BtP = B.transpose() * P;
    return (R + BtP * B).ldlt().solve(BtP * A);
}

QuadPlant::QuadPlant(QuadParams params, QuadState initial, std::uint64_t noise_seed)
    : params_(std::move(params)), state_(initial), rng_(noise_seed)
{
    params_.validate();
    measurement_ = state_.to_vector();
    if (params_.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, params_.noise_std);
        for (Index i = 0; i < measurement_.size(); ++i) measurement_(i) += noise(rng_);
    }
}

Vector QuadPlant::apply(const Vector& u)
{
    if (u.size() != 4) throw DimensionError("quadrotor input must have 4 entries");
    const Vector y = measurement_;
    const QuadStepResult r = quad_step(state_, u, params_, rng_);
    state_ = r.next;
    measurement_ = r.measurement;
    clamped_ = clamped_ || r.clamped;
    return y;
}

ExcitationData collect_excitation_data(const QuadParams& params, Index samples, std::uint64_t seed,
                                       const ExcitationOptions& options)
{
    if (samples < 1) throw LengthError("collect_excitation_data: need at least one sample");
    params.validate();
    const StateSpace lin = hover_linearization(params);
    Vector q(12);
    q << Vector::Constant(6, options.lqr_translation_weight), Vector::Constant(6, options.lqr_attitude_weight);
    const Matrix K = dlqr(lin, q.asDiagonal(), options.lqr_input_weight * Matrix::Identity(4, 4));
    const Eigen::Vector4d u_hover = Eigen::Vector4d::Constant(params.hover_input());

    double band = options.band;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        // Input and noise streams are separate so the band does not shift the noise.
        std::mt19937_64 input_rng(derive_seed(seed, 0));
        std::uniform_real_distribution<double> w(-band, band);
        QuadPlant plant(params, QuadState{}, derive_seed(seed, 1));
        Matrix u(4, samples), y(12, samples);
        try {
            for (Index t = 0; t < samples; ++t) {
                const Vector meas = *plant.state();
                Eigen::Vector4d ut = u_hover - K * meas;
                for (Index i = 0; i < 4; ++i) ut(i) += w(input_rng);
                ut = ut.cwiseMax(0.0).cwiseMin(1.0);
                u.col(t) = ut;
                y.col(t) = plant.apply(ut);
            }
        } catch (const DivergenceError&) {
            if (attempt == options.max_retries) throw;
            band *= 0.5;
            continue;
        }
        ExcitationData out;
        out.trajectory = Trajectory(u, y, params.dt);
        const ExcitationCheck pe = is_persistently_exciting(u, options.pe_order);
        out.persistently_exciting = pe.exciting;
        out.pe_rank = pe.rank;
        out.band = band;
        out.retries = attempt;
        return out;
    }
    throw DivergenceError("collect_excitation_data: no stable record");
}

} // namespace deepc
