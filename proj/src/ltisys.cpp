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
#include "deepc/ltisys.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace deepc {

StateSpace::StateSpace(Matrix A, Matrix B, Matrix C, Matrix D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D))
{
    if (A_.rows() != A_.cols()) throw DimensionError("state space: A must be square");
    if (B_.rows() != A_.rows()) throw DimensionError("state space: B rows must equal n");
    if (C_.cols() != A_.rows()) throw DimensionError("state space: C columns must equal n");
    if (D_.rows() != C_.rows() || D_.cols() != B_.cols()) {
        throw DimensionError("state space: D must be p x m");
    }
}

SimulationResult simulate(const StateSpace& ss, const Vector& x0, const Matrix& inputs)
{
    if (x0.size() != ss.n()) throw DimensionError("simulate: initial state has wrong dimension");
    if (inputs.rows() != ss.m()) throw DimensionError("simulate: input dimension mismatch");
    SimulationResult res;
    res.outputs.resize(ss.p(), inputs.cols());
    Vector x = x0;
    for (Index k = 0; k < inputs.cols(); ++k) {
        res.outputs.col(k).noalias() = ss.C() * x + ss.D() * inputs.col(k);
        x = ss.A() * x + ss.B() * inputs.col(k);
    }
    res.final_state = std::move(x);
    return res;
}

Matrix observability_matrix(const StateSpace& ss, Index ell)
{
    if (ell < 1) throw LengthError("observability_matrix: ell must be positive");
    const Index p = ss.p();
    Matrix O(ell * p, ss.n());
    Matrix CAk = ss.C();
    for (Index k = 0; k < ell; ++k) {
        O.middleRows(k * p, p) = CAk;
        if (k + 1 < ell) CAk = CAk * ss.A();
    }
    return O;
}

Matrix controllability_matrix(const StateSpace& ss)
{
    const Index n = ss.n();
    const Index m = ss.m();
    Matrix W(n, n * m);
    Matrix AkB = ss.B();
    for (Index k = 0; k < n; ++k) {
        W.middleCols(k * m, m) = AkB;
        AkB = ss.A() * AkB;
    }
    return W;
}

Index lag(const StateSpace& ss, double tol)
{
    const Index n = ss.n();
    for (Index ell = 1; ell <= n; ++ell) {
        if (numeric_rank(observability_matrix(ss, ell), tol) == n) return ell;
    }
    throw UnobservableError("lag: (A, C) is not observable");
}

SystemOrderInfo order_info(const StateSpace& ss, double tol)
{
    return SystemOrderInfo{ss.n(), lag(ss, tol)};
}

Matrix toeplitz_impulse(const StateSpace& ss, Index horizon)
{
    if (horizon < 1) throw LengthError("toeplitz_impulse: horizon must be positive");
    const Index p = ss.p();
    const Index m = ss.m();
    Matrix T = Matrix::Zero(horizon * p, horizon * m);
    // markov[k] = C A^{k-1} B for k >= 1, markov[0] = D
    std::vector<Matrix> markov;
    markov.reserve(static_cast<std::size_t>(horizon));
    markov.push_back(ss.D());
    Matrix AkB = ss.B();
    for (Index k = 1; k < horizon; ++k) {
        markov.push_back(ss.C() * AkB);
        AkB = ss.A() * AkB;
    }
    for (Index i = 0; i < horizon; ++i) {
        for (Index j = 0; j <= i; ++j) {
            T.block(i * p, j * m, p, m) = markov[static_cast<std::size_t>(i - j)];
        }
    }
    return T;
}

StateReconstruction reconstruct_initial_state(const StateSpace& ss, const Matrix& u_ini, const Matrix& y_ini,
                                              double residual_tol)
{
    if (u_ini.rows() != ss.m() || y_ini.rows() != ss.p()) {
        throw DimensionError("reconstruct_initial_state: window dimension mismatch");
    }
    if (u_ini.cols() != y_ini.cols() || u_ini.cols() < 1) {
        throw LengthError("reconstruct_initial_state: input and output windows must have equal positive length");
    }
    const Index T = u_ini.cols();
    const Matrix O = observability_matrix(ss, T);
    const Matrix Tm = toeplitz_impulse(ss, T);
    const Vector u = u_ini.reshaped();
    const Vector y = y_ini.reshaped();
    const Vector rhs = y - Tm * u;

    Eigen::ColPivHouseholderQR<Matrix> qr(O);
    qr.setThreshold(1e-10);
    if (qr.rank() < ss.n()) {
        throw RankDeficiencyError("reconstruct_initial_state: window shorter than the lag");
    }
    StateReconstruction out;
    out.window_start = qr.solve(rhs);
    out.residual = (O * out.window_start - rhs).norm();
    const double scale = std::max(1.0, y.norm());
    if (out.residual > residual_tol * scale) {
        throw InconsistentDataError("reconstruct_initial_state: window inconsistent with the model");
    }
    out.current = simulate(ss, out.window_start, u_ini).final_state;
    return out;
}

double spectral_radius(const Matrix& A)
{
    if (A.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

double normalized_min_singular(const Matrix& M)
{
    Eigen::JacobiSVD<Matrix> svd(M);
    const Vector& s = svd.singularValues();
    return s(s.size() - 1) / s(0);
}

} // namespace

StateSpace random_controllable_system(Index n, Index m, Index p, std::uint64_t seed)
{
    if (n < 1 || m < 1 || p < 1) throw DimensionError("random_controllable_system: dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> radius(0.5, 1.0);
    auto draw = [&](Index rows, Index cols) {
        Matrix M(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
        return M;
    };
    constexpr int kMaxDraws = 200;
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
        Matrix A = draw(n, n);
        Matrix B = draw(n, m);
        Matrix C = draw(p, n);
        Matrix D = draw(p, m);
        const double rho = spectral_radius(A);
        const double target = radius(rng);
        if (rho < 1e-6) continue;
        A *= target / rho;
        StateSpace ss(std::move(A), std::move(B), std::move(C), std::move(D));
        const Matrix W = controllability_matrix(ss);
        const Matrix O = observability_matrix(ss, n);
        if (normalized_min_singular(W.transpose()) < 1e-3) continue;
        if (normalized_min_singular(O) < 1e-3) continue;
        return ss;
    }
    throw Error("random_controllable_system: no controllable and observable draw found");
}

void write_state_space(std::ostream& os, const StateSpace& ss)
{
    os << ss.n() << ' ' << ss.m() << ' ' << ss.p() << '\n';
    auto block = [&](const Matrix& M) {
        for (Index i = 0; i < M.rows(); ++i) {
            for (Index j = 0; j < M.cols(); ++j) {
                if (j > 0) os << ' ';
                os << format_double(M(i, j));
            }
            os << '\n';
        }
    };
    block(ss.A());
    block(ss.B());
    block(ss.C());
    block(ss.D());
}

StateSpace read_state_space(std::istream& in)
{
    // '#' starts a comment that runs to the end of the line.
    std::stringstream is;
    for (std::string line; std::getline(in, line);) is << line.substr(0, line.find('#')) << '\n';
    Index n = 0, m = 0, p = 0;
    if (!(is >> n >> m >> p) || n < 1 || m < 1 || p < 1) {
        throw ParseError("state space: expected positive dimensions `n m p`");
    }
    auto block = [&](Index rows, Index cols, const char* name) {
        Matrix M(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j)
                if (!(is >> M(i, j))) throw ParseError(std::string("state space: truncated block ") + name);
        return M;
    };
    Matrix A = block(n, n, "A");
    Matrix B = block(n, m, "B");
    Matrix C = block(p, n, "C");
    Matrix D = block(p, m, "D");
    return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

} // namespace deepc
