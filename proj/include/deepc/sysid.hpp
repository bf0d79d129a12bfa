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
#ifndef DEEPC_SYSID_HPP
#define DEEPC_SYSID_HPP

#include "deepc/behavioral.hpp"
#include "deepc/ltisys.hpp"

namespace deepc {

struct IdResult {
    StateSpace model;
    Vector residual_norms;  ///< per state equation, ||x_{t+1,i} - (A x_t + B u_t)_i||
    Index order = 0;
    bool rank_deficient = false;  ///< regressor [x; u] lacked full row rank
};

/**
 * One-step least-squares fit of x_{t+1} = A x_t + B u_t from full-state
 * measurements (outputs are read as the state). Returns C = I and D = 0.
 *
 * With ridge > 0 the cost gains ridge * ||[A B]||_F^2.
 * Throws LengthError when the trajectory has fewer than n + m + 1 samples.
 */
IdResult identify_full_state(const Trajectory& traj, double ridge = 0.0);

} // namespace deepc

#endif // DEEPC_SYSID_HPP
