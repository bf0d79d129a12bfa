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
#ifndef DEEPC_LTISYS_HPP
#define DEEPC_LTISYS_HPP

#include "deepc/common.hpp"

#include <cstdint>
#include <iosfwd>

namespace deepc {

/**
 * @brief Discrete-time LTI system x+ = A x + B u, y = C x + D u.
 */
class StateSpace {
public:
    StateSpace() = default;
    StateSpace(Matrix A, Matrix B, Matrix C, Matrix D);

    Index n() const { return A_.rows(); }
    Index m() const { return B_.cols(); }
    Index p() const { return C_.rows(); }

    const Matrix& A() const { return A_; }
    const Matrix& B() const { return B_; }
    const Matrix& C() const { return C_; }
    const Matrix& D() const { return D_; }

private:
    Matrix A_, B_, C_, D_;
};

struct SystemOrderInfo {
    Index order = 0;
    Index lag = 0;
};

struct SimulationResult {
    Matrix outputs;      ///< p x N
    Vector final_state;  ///< state after the last input
};

/// Exact recursion from x0 under the columns of `inputs` (m x N).
SimulationResult simulate(const StateSpace& ss, const Vector& x0, const Matrix& inputs);

/// col(C, CA, ..., CA^{ell-1}).
Matrix observability_matrix(const StateSpace& ss, Index ell);

/// [B, AB, ..., A^{n-1}B].
Matrix controllability_matrix(const StateSpace& ss);

/// Smallest ell with rank O_ell = n. Throws UnobservableError otherwise.
Index lag(const StateSpace& ss, double tol = 1e-9);

/// Order and lag of a (minimal) realization.
SystemOrderInfo order_info(const StateSpace& ss, double tol = 1e-9);

/// Block lower-triangular Toeplitz matrix of Markov parameters:
/// block (i, j) is D for i == j, C A^{i-j-1} B for i > j.
Matrix toeplitz_impulse(const StateSpace& ss, Index horizon);

struct StateReconstruction {
    Vector window_start;  ///< state at the first sample of the window
    Vector current;       ///< state after applying the whole input window
    double residual = 0.0;
};

/**
 * @brief Recovers the state fixed by an input/output window.
 *
 * Solves y_ini = O x + T u_ini in the least-squares sense with a
 * column-pivoted QR and propagates x over the window, so `current` is the
 * state at the time the next input is applied.
 *
 * Throws RankDeficiencyError when the window is shorter than the lag and
 * InconsistentDataError when the relative residual exceeds `residual_tol`
 * (pass infinity to accept noisy data).
 */
StateReconstruction reconstruct_initial_state(const StateSpace& ss, const Matrix& u_ini, const Matrix& y_ini,
                                              double residual_tol = 1e-8);

/// Random system that passes controllability and observability rank tests,
/// with spectral radius in [0.5, 1.0). Deterministic in `seed`.
StateSpace random_controllable_system(Index n, Index m, Index p, std::uint64_t seed);

double spectral_radius(const Matrix& A);

/// Text form: a line `n m p`, then A, B, C, D row by row. `#` starts a comment.
void write_state_space(std::ostream& os, const StateSpace& ss);
StateSpace read_state_space(std::istream& is);

} // namespace deepc

#endif // DEEPC_LTISYS_HPP
