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
#ifndef DEEPC_QP_HPP
#define DEEPC_QP_HPP

#include "deepc/common.hpp"

#include <iosfwd>
#include <memory>
#include <string>

namespace deepc {

/**
 * @brief Convex QP in the form
 *
 *     minimize    1/2 x'Px + q'x + l1'|x| + constant
 *     subject to  Aeq x = beq
 *                 lin <= Ain x <= uin
 *                 lb <= x <= ub
 *
 * Empty `Aeq`/`Ain` mean no rows of that kind; empty `lb`/`ub` mean
 * unbounded; empty `l1` means no one-norm term. Infinite entries are
 * allowed in lin/uin/lb/ub.
 */
struct QpProblem {
    Matrix P;
    Vector q;
    double constant = 0.0;
    Matrix Aeq;
    Vector beq;
    Matrix Ain;
    Vector lin;
    Vector uin;
    Vector lb;
    Vector ub;
    Vector l1;  ///< nonnegative per-variable one-norm weights

    Index num_variables() const { return q.size(); }

    /// Copy with empty blocks expanded to their conformal (0-row or infinite) form.
    QpProblem normalized() const;

    /// Throws DimensionError / Error on non-conformal sizes, asymmetric P,
    /// lb > ub or negative one-norm weights.
    void validate() const;
};

enum class QpStatus { Optimal, Infeasible, Unbounded, MaxIterations };

std::string to_string(QpStatus status);

enum class QpMethod {
    Admm,           ///< operator splitting with active-set polishing
    InteriorPoint,  ///< primal-dual interior point, polished; falls back to ADMM
};

// The interior point is the default: ADMM stalls on the poorly conditioned
// DeePC problems with large penalty weights but still certifies
// infeasibility and unboundedness when the interior point does not converge.

std::string to_string(QpMethod method);
QpMethod parse_qp_method(const std::string& text);

struct QpSettings {
    QpMethod method = QpMethod::InteriorPoint;
    double eps_abs = 1e-6;
    double eps_rel = 0.0;
    /// Relative tolerance of the infeasibility certificates.
    double eps_infeasible = 1e-6;
    int max_iter = 50000;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;
    bool adaptive_rho = true;
    int scaling_iterations = 10;
    bool polish = true;
    int check_interval = 10;
    /// Iteration cap of the interior-point method before the ADMM fallback.
    int ipm_max_iter = 60;
};

/**
 * @brief Primal/dual solution.
 *
 * Duals follow the convention P x + q + Aeq'y_eq + Ain'y_in + y_bound = 0,
 * with positive entries on active upper bounds and negative entries on
 * active lower bounds. `y_bound` also carries the one-norm subgradient.
 */
struct QpSolution {
    Vector x;
    Vector y_eq;
    Vector y_in;
    Vector y_bound;
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIterations;
    double primal_residual = kInf;   ///< max constraint violation
    double dual_residual = kInf;     ///< inf-norm of the stationarity residual
    double complementarity = kInf;   ///< max |y_i| times distance to its bound
    int iterations = 0;
    bool polished = false;
};

/**
 * @brief Operator-splitting QP solver with a cached factorization.
 *
 * The matrices P, Aeq and Ain are fixed at construction; every call to
 * `solve` supplies the vectors. Each solve starts cold from the configured
 * penalty so its result only depends on its arguments. The factorization
 * for the initial penalty is reused while the pattern of finite bounds does
 * not change. The one-norm weights `l1` are fixed at construction and
 * handled by soft thresholding, so no variables are split. Not safe for
 * concurrent use; give each thread its own solver.
 */
class QpSolver {
public:
    QpSolver(Matrix P, Matrix Aeq, Matrix Ain, QpSettings settings = {}, Vector l1 = {});
    ~QpSolver();
    QpSolver(QpSolver&&) noexcept;
    QpSolver& operator=(QpSolver&&) noexcept;

    QpSolution solve(const Vector& q, const Vector& beq, const Vector& lin, const Vector& uin, const Vector& lb,
                     const Vector& ub, double constant = 0.0);

    Index num_variables() const;
    const QpSettings& settings() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/**
 * @brief QP with a weighted one-norm term w'|v| folded in by variable splitting.
 *
 * An alternative to the native `l1` term for callers that need a plain QP.
 *
 * v = v+ - v- with v+, v- >= 0 and cost w'(v+ + v-). Variable i of the
 * penalized range keeps its index for v+; v- is appended at
 * `negative_index(i)`. Bounds the original problem had on v become general
 * inequality rows on v+ - v-.
 */
struct OneNormEmbedding {
    QpProblem problem;
    Index original_variables = 0;
    Index first = 0;
    Index count = 0;
    Vector weights;

    Index positive_index(Index i) const { return i; }
    Index negative_index(Index i) const { return original_variables + (i - first); }

    /// Maps an optimizer of the enlarged problem back to the original variables.
    Vector recover(const Vector& x) const;

    /// Linear cost of the enlarged problem for original linear cost `q`.
    Vector lift_cost(const Vector& q) const;
};

OneNormEmbedding embed_one_norm(const QpProblem& problem, const Vector& weights, Index first, Index count);

/// Human-readable dump of a problem for reproducing solver issues.
void write_qp_problem(std::ostream& os, const QpProblem& problem);

} // namespace deepc

#endif // DEEPC_QP_HPP
