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
#ifndef DEEPC_BEHAVIORAL_HPP
#define DEEPC_BEHAVIORAL_HPP

#include "deepc/common.hpp"

#include <iosfwd>
#include <optional>

namespace deepc {

/**
 * @brief Sampled input/output trajectory w = col(u, y).
 *
 * Samples are stored column-wise: column t of `inputs()` is u_t (length m),
 * column t of `outputs()` is y_t (length p). The sample period is metadata
 * and plays no role in any computation.
 */
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(Matrix inputs, Matrix outputs, double dt = 1.0);

    Index m() const { return inputs_.rows(); }
    Index p() const { return outputs_.rows(); }
    Index length() const { return inputs_.cols(); }
    double dt() const { return dt_; }

    const Matrix& inputs() const { return inputs_; }
    const Matrix& outputs() const { return outputs_; }

    /// Samples [first, first + count) as a new trajectory.
    Trajectory window(Index first, Index count) const;

private:
    Matrix inputs_;
    Matrix outputs_;
    double dt_ = 1.0;
};

/**
 * @brief Past/future partition of the depth-(T_ini + N) data Hankel matrices.
 *
 * Up and Yp hold the first `t_ini` block rows, Uf and Yf the last `horizon`
 * block rows. All four share the same column count g_dim = T - T_ini - N + 1.
 * After a low-rank approximation the blocks are no longer Hankel.
 */
struct DataMatrices {
    Matrix Up;
    Matrix Yp;
    Matrix Uf;
    Matrix Yf;
    Index t_ini = 0;
    Index horizon = 0;
    /// Set when the data is shorter than min_data_length for the supplied
    /// state-dimension bound.
    bool below_min_length = false;

    Index g_dim() const { return Up.cols(); }
    Index m() const;
    Index p() const;

    /// col(Up, Yp, Uf, Yf).
    Matrix stacked() const;
};

/// Block-Hankel matrix of depth `depth` built from the columns of `signal`
/// (q x T). Column j stacks signal[j], ..., signal[j + depth - 1].
/// Throws LengthError when T < depth.
Matrix hankel(const Matrix& signal, Index depth);

struct ExcitationCheck {
    bool exciting = false;
    Index rank = 0;
    Index required_rank = 0;
};

/// Persistency of excitation of order `order`: rank of hankel(inputs, order)
/// equals order * m, using a relative singular-value threshold.
ExcitationCheck is_persistently_exciting(const Matrix& inputs, Index order, double tol = 1e-9);

/// (m + 1)(T_ini + N + n_upper) - 1.
Index min_data_length(Index m, Index t_ini, Index horizon, Index n_upper);

/// Splits the depth-(T_ini + N) Hankel matrices of `data` into past and
/// future blocks. When `n_upper` is given and T < min_data_length the
/// result carries `below_min_length = true`; this is a warning only.
DataMatrices partition_data(const Trajectory& data, Index t_ini, Index horizon,
                            std::optional<Index> n_upper = std::nullopt);

/// Writes `t,u1..um,y1..yp` with t = k * dt.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Reads the CSV produced by write_trajectory_csv. The column count must be
/// 1 + m + p; dt is taken from the first two time stamps (1.0 for a single row).
Trajectory read_trajectory_csv(std::istream& is, Index m, Index p);

} // namespace deepc

#endif // DEEPC_BEHAVIORAL_HPP
