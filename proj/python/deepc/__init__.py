# Copyright 2026 The deepc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Data-enabled predictive control with a C++ core."""

from deepc._core import (
    DataMatrices,
    DimensionError,
    DivergenceError,
    Error,
    InconsistentDataError,
    LengthError,
    ParseError,
    RankDeficiencyError,
    StateSpace,
    UnobservableError,
    collect_quad_data,
    derive_seed,
    hankel,
    identify_full_state,
    is_persistently_exciting,
    lag,
    min_data_length,
    numeric_rank,
    partition_data,
    quad_hover_input,
    random_controllable_system,
    reconstruct_initial_state,
    run_equivalence,
    simulate,
    solve_deepc,
    solve_mpc,
    solve_qp,
)

__all__ = [
    "DataMatrices",
    "DimensionError",
    "DivergenceError",
    "Error",
    "InconsistentDataError",
    "LengthError",
    "ParseError",
    "RankDeficiencyError",
    "StateSpace",
    "UnobservableError",
    "collect_quad_data",
    "derive_seed",
    "hankel",
    "identify_full_state",
    "is_persistently_exciting",
    "lag",
    "min_data_length",
    "numeric_rank",
    "partition_data",
    "quad_hover_input",
    "random_controllable_system",
    "reconstruct_initial_state",
    "run_equivalence",
    "simulate",
    "solve_deepc",
    "solve_mpc",
    "solve_qp",
]
