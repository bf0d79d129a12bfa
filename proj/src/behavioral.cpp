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
#include "deepc/behavioral.hpp"

#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace deepc {

Trajectory::Trajectory(Matrix inputs, Matrix outputs, double dt)
    : inputs_(std::move(inputs)), outputs_(std::move(outputs)), dt_(dt)
{
    if (inputs_.cols() != outputs_.cols()) {
        throw DimensionError("trajectory: input and output sample counts differ");
    }
    if (inputs_.cols() < 1) throw LengthError("trajectory: at least one sample required");
    if (inputs_.rows() < 1 || outputs_.rows() < 1) {
        throw DimensionError("trajectory: input and output dimensions must be positive");
    }
}

Trajectory Trajectory::window(Index first, Index count) const
{
    if (first < 0 || count < 1 || first + count > length()) {
        throw LengthError("trajectory: window out of range");
    }
    return Trajectory(inputs_.middleCols(first, count), outputs_.middleCols(first, count), dt_);
}

Index DataMatrices::m() const { return t_ini > 0 ? Up.rows() / t_ini : Uf.rows() / horizon; }
Index DataMatrices::p() const { return t_ini > 0 ? Yp.rows() / t_ini : Yf.rows() / horizon; }

Matrix DataMatrices::stacked() const
{
    Matrix H(Up.rows() + Yp.rows() + Uf.rows() + Yf.rows(), g_dim());
    H << Up, Yp, Uf, Yf;
    return H;
}

Matrix hankel(const Matrix& signal, Index depth)
{
    const Index q = signal.rows();
    const Index T = signal.cols();
    if (depth < 1) throw LengthError("hankel: depth must be positive");
    if (T < depth) throw LengthError("hankel: signal shorter than depth");
    const Index cols = T - depth + 1;
    Matrix H(depth * q, cols);
    for (Index i = 0; i < depth; ++i) {
        H.middleRows(i * q, q) = signal.middleCols(i, cols);
    }
    return H;
}

ExcitationCheck is_persistently_exciting(const Matrix& inputs, Index order, double tol)
{
    ExcitationCheck check;
    const Index m = inputs.rows();
    const Index T = inputs.cols();
    check.required_rank = order * m;
    if (order < 1 || T < order) return check;
    check.rank = numeric_rank(hankel(inputs, order), tol);
    // Full row rank needs at least as many columns as rows.
    if (T < (m + 1) * order - 1) {
        return check;
    }
    check.exciting = check.rank == check.required_rank;
    return check;
}

Index min_data_length(Index m, Index t_ini, Index horizon, Index n_upper)
{
    return (m + 1) * (t_ini + horizon + n_upper) - 1;
}

DataMatrices partition_data(const Trajectory& data, Index t_ini, Index horizon, std::optional<Index> n_upper)
{
    if (t_ini < 0 || horizon < 1) throw LengthError("partition_data: invalid window lengths");
    const Index depth = t_ini + horizon;
    if (data.length() < depth) {
        throw LengthError("partition_data: trajectory shorter than T_ini + N");
    }
    const Index m = data.m();
    const Index p = data.p();
    const Matrix Hu = hankel(data.inputs(), depth);
    const Matrix Hy = hankel(data.outputs(), depth);

    DataMatrices dm;
    dm.t_ini = t_ini;
    dm.horizon = horizon;
    dm.Up = Hu.topRows(t_ini * m);
    dm.Uf = Hu.bottomRows(horizon * m);
    dm.Yp = Hy.topRows(t_ini * p);
    dm.Yf = Hy.bottomRows(horizon * p);
    if (n_upper) {
        dm.below_min_length = data.length() < min_data_length(m, t_ini, horizon, *n_upper);
    }
    return dm;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    os << "t";
    for (Index i = 0; i < traj.m(); ++i) os << ",u" << i + 1;
    for (Index i = 0; i < traj.p(); ++i) os << ",y" << i + 1;
    os << '\n';
    for (Index k = 0; k < traj.length(); ++k) {
        os << format_double(static_cast<double>(k) * traj.dt());
        for (Index i = 0; i < traj.m(); ++i) os << ',' << format_double(traj.inputs()(i, k));
        for (Index i = 0; i < traj.p(); ++i) os << ',' << format_double(traj.outputs()(i, k));
        os << '\n';
    }
}

namespace {

std::vector<double> parse_row(const std::string& line, Index line_no)
{
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(cell, &used));
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw ParseError("trajectory csv line " + std::to_string(line_no) + ": bad number '" + cell + "'");
        }
    }
    return values;
}

} // namespace

Trajectory read_trajectory_csv(std::istream& is, Index m, Index p)
{
    std::string line;
    if (!std::getline(is, line)) throw ParseError("trajectory csv: missing header");
    const Index expected = 1 + m + p;
    {
        Index header_cols = 1;
        for (char c : line) header_cols += (c == ',');
        if (header_cols != expected) {
            throw ParseError("trajectory csv: header has " + std::to_string(header_cols) + " columns, expected " +
                             std::to_string(expected));
        }
    }
    std::vector<std::vector<double>> rows;
    Index line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto row = parse_row(line, line_no);
        if (static_cast<Index>(row.size()) != expected) {
            throw ParseError("trajectory csv line " + std::to_string(line_no) + ": expected " +
                             std::to_string(expected) + " columns");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("trajectory csv: no samples");
    const Index T = static_cast<Index>(rows.size());
    Matrix u(m, T), y(p, T);
    for (Index k = 0; k < T; ++k) {
        for (Index i = 0; i < m; ++i) u(i, k) = rows[k][1 + i];
        for (Index i = 0; i < p; ++i) y(i, k) = rows[k][1 + m + i];
    }
    const double dt = T > 1 ? rows[1][0] - rows[0][0] : 1.0;
    return Trajectory(std::move(u), std::move(y), dt);
}

} // namespace deepc
