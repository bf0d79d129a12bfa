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
#include "deepc/sysid.hpp"

#include <Eigen/QR>

#include <cmath>

namespace deepc {

IdResult identify_full_state(const Trajectory& traj, double ridge)
{
    if (!(ridge >= 0.0)) throw Error("identify_full_state: ridge weight must be nonnegative");
    const Index n = traj.p();
    const Index m = traj.m();
    const Index T = traj.length();
    if (T < n + m + 1) throw LengthError("identify_full_state: need at least n + m + 1 samples");

    // Phi' Theta' = X+'  with Phi = [x_0 .. x_{T-2}; u_0 .. u_{T-2}].
    const Index k = n + m;
    const Index samples = T - 1;
    Matrix Phi(k, samples);
    Phi.topRows(n) = traj.outputs().leftCols(samples);
    Phi.bottomRows(m) = traj.inputs().leftCols(samples);
    const Matrix Xnext = traj.outputs().rightCols(samples);

    Matrix lhs(samples + (ridge > 0.0 ? k : 0), k);
    Matrix rhs = Matrix::Zero(lhs.rows(), n);
    lhs.topRows(samples) = Phi.transpose();
    rhs.topRows(samples) = Xnext.transpose();
    if (ridge > 0.0) lhs.bottomRows(k) = std::sqrt(ridge) * Matrix::Identity(k, k);

    IdResult out{StateSpace(Matrix::Zero(n, n), Matrix::Zero(n, m), Matrix::Identity(n, n), Matrix::Zero(n, m)),
                 Vector::Zero(n), n, false};
    out.rank_deficient = numeric_rank(Phi) < k;

    Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
    const Matrix theta = qr.solve(rhs).transpose();  // n x (n + m)
    Matrix A = theta.leftCols(n);
    Matrix B = theta.rightCols(m);
    if (!A.allFinite() || !B.allFinite()) {
        A.setZero();
        B.setZero();
    }
    const Matrix resid = Xnext - A * Phi.topRows(n) - B * Phi.bottomRows(m);
    out.residual_norms = resid.rowwise().norm();
    out.model = StateSpace(std::move(A), std::move(B), Matrix::Identity(n, n), Matrix::Zero(n, m));
    return out;
}

} // namespace deepc
