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
#ifndef DEEPC_COMMON_HPP
#define DEEPC_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace deepc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A signal is shorter than the window or data budget requires.
class LengthError : public Error {
public:
    using Error::Error;
};

class UnobservableError : public Error {
public:
    using Error::Error;
};

class RankDeficiencyError : public Error {
public:
    using Error::Error;
};

/// Measured data does not fit the model within tolerance.
class InconsistentDataError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

/// Number of singular values strictly above `tol` times the largest one.
/// A zero matrix (or an empty one) has rank 0.
Index numeric_rank(const Matrix& M, double tol = 1e-9);

/// Counter-based seed fan-out: splitmix64 applied to
/// master + (index + 1) * 0x9e3779b97f4a7c15. Streams for different indices
/// never depend on how many other indices are used.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

} // namespace deepc

#endif // DEEPC_COMMON_HPP
