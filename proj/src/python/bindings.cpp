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
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deepc/behavioral.hpp"
#include "deepc/bench/experiments.hpp"
#include "deepc/controllers.hpp"
#include "deepc/ltisys.hpp"
#include "deepc/qp.hpp"
#include "deepc/quadsim.hpp"
#include "deepc/sysid.hpp"

namespace py = pybind11;
using namespace deepc;

namespace {

ControlProblem make_problem(Index m, Index p, Index horizon, Index t_ini, const std::optional<Matrix>& Q,
                            const std::optional<Matrix>& R, const std::optional<Vector>& u_min,
                            const std::optional<Vector>& u_max, const std::optional<Vector>& y_min,
                            const std::optional<Vector>& y_max, double lambda_g, double lambda_y)
{
    ControlProblem cp = ControlProblem::make(m, p, horizon, t_ini);
    if (Q) cp.Q = *Q;
    if (R) cp.R = *R;
    if (u_min) cp.u_min = *u_min;
    if (u_max) cp.u_max = *u_max;
    if (y_min) cp.y_min = *y_min;
    if (y_max) cp.y_max = *y_max;
    cp.lambda_g = lambda_g;
    cp.lambda_y = lambda_y;
    cp.validate(m, p);
    return cp;
}

py::dict solve_dict(const SolveResult& r)
{
    py::dict d;
    d["u"] = r.u;
    d["y"] = r.y;
    d["g"] = r.g;
    d["sigma_y"] = r.sigma_y;
    d["objective"] = r.objective;
    d["status"] = to_string(r.status);
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Data-enabled predictive control: behavioral data, solvers and benchmarks";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<LengthError>(m, "LengthError", base.ptr());
    py::register_exception<UnobservableError>(m, "UnobservableError", base.ptr());
    py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", base.ptr());
    py::register_exception<InconsistentDataError>(m, "InconsistentDataError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("index"));
    m.def("numeric_rank", &numeric_rank, py::arg("M"), py::arg("tol") = 1e-9);

    // Behavioral data
    m.def("hankel", &hankel, py::arg("signal"), py::arg("depth"));
    m.def("min_data_length", &min_data_length, py::arg("m"), py::arg("t_ini"), py::arg("horizon"),
          py::arg("n_upper"));
    m.def(
        "is_persistently_exciting",
        [](const Matrix& u, Index order, double tol) {
            const ExcitationCheck c = is_persistently_exciting(u, order, tol);
            return py::make_tuple(c.exciting, c.rank, c.required_rank);
        },
        py::arg("inputs"), py::arg("order"), py::arg("tol") = 1e-9,
        "Returns (exciting, rank, required_rank).");

    py::class_<DataMatrices>(m, "DataMatrices")
        .def_readonly("Up", &DataMatrices::Up)
        .def_readonly("Yp", &DataMatrices::Yp)
        .def_readonly("Uf", &DataMatrices::Uf)
        .def_readonly("Yf", &DataMatrices::Yf)
        .def_readonly("t_ini", &DataMatrices::t_ini)
        .def_readonly("horizon", &DataMatrices::horizon)
        .def_readonly("below_min_length", &DataMatrices::below_min_length);
    m.def(
        "partition_data",
        [](const Matrix& u, const Matrix& y, Index t_ini, Index horizon, std::optional<Index> n_upper) {
            return partition_data(Trajectory(u, y), t_ini, horizon, n_upper);
        },
        py::arg("u"), py::arg("y"), py::arg("t_ini"), py::arg("horizon"), py::arg("n_upper") = py::none());

    // LTI systems
    py::class_<StateSpace>(m, "StateSpace")
        .def(py::init<Matrix, Matrix, Matrix, Matrix>(), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"))
        .def_property_readonly("A", &StateSpace::A)
        .def_property_readonly("B", &StateSpace::B)
        .def_property_readonly("C", &StateSpace::C)
        .def_property_readonly("D", &StateSpace::D)
        .def_property_readonly("n", &StateSpace::n)
        .def_property_readonly("m", &StateSpace::m)
        .def_property_readonly("p", &StateSpace::p);
    m.def(
        "simulate", [](const StateSpace& ss, const Vector& x0, const Matrix& u) { return simulate(ss, x0, u).outputs; },
        py::arg("system"), py::arg("x0"), py::arg("inputs"));
    m.def("random_controllable_system", &random_controllable_system, py::arg("n"), py::arg("m"), py::arg("p"),
          py::arg("seed"));
    m.def("lag", &lag, py::arg("system"), py::arg("tol") = 1e-9);
    m.def(
        "reconstruct_initial_state",
        [](const StateSpace& ss, const Matrix& u_ini, const Matrix& y_ini) {
            const StateReconstruction r = reconstruct_initial_state(ss, u_ini, y_ini);
            return py::make_tuple(r.window_start, r.current);
        },
        py::arg("system"), py::arg("u_ini"), py::arg("y_ini"), "Returns (window_start, current).");

    // Quadratic programs
    m.def(
        "solve_qp",
        [](const Matrix& P, const Vector& q, std::optional<Matrix> Aeq, std::optional<Vector> beq,
           std::optional<Vector> lb, std::optional<Vector> ub, std::optional<Vector> l1, const std::string& method) {
            QpProblem prob;
            prob.P = P;
            prob.q = q;
            if (Aeq) prob.Aeq = *Aeq;
            if (beq) prob.beq = *beq;
            if (lb) prob.lb = *lb;
            if (ub) prob.ub = *ub;
            if (l1) prob.l1 = *l1;
            QpSettings settings;
            settings.method = parse_qp_method(method);
            const QpSolution s = solve_qp(prob, settings);
            py::dict d;
            d["x"] = s.x;
            d["objective"] = s.objective;
            d["status"] = to_string(s.status);
            d["iterations"] = s.iterations;
            return d;
        },
        py::arg("P"), py::arg("q"), py::arg("Aeq") = py::none(), py::arg("beq") = py::none(),
        py::arg("lb") = py::none(), py::arg("ub") = py::none(), py::arg("l1") = py::none(),
        py::arg("method") = to_string(QpSettings{}.method),
        "minimize 1/2 x'Px + q'x + l1'|x| subject to Aeq x = beq and lb <= x <= ub.");

    // Controllers
    m.def(
        "solve_mpc",
        [](const StateSpace& ss, const Vector& x0, const Matrix& reference, Index horizon, std::optional<Matrix> Q,
           std::optional<Matrix> R, std::optional<Vector> u_min, std::optional<Vector> u_max,
           std::optional<Vector> y_min, std::optional<Vector> y_max) {
            const ControlProblem cp =
                make_problem(ss.m(), ss.p(), horizon, 1, Q, R, u_min, u_max, y_min, y_max, 0.0, 0.0);
            return solve_dict(solve_mpc(ss, x0, reference, cp));
        },
        py::arg("system"), py::arg("x0"), py::arg("reference"), py::arg("horizon"), py::arg("Q") = py::none(),
        py::arg("R") = py::none(), py::arg("u_min") = py::none(), py::arg("u_max") = py::none(),
        py::arg("y_min") = py::none(), py::arg("y_max") = py::none());
    m.def(
        "solve_deepc",
        [](const DataMatrices& dm, const Matrix& u_ini, const Matrix& y_ini, const Matrix& reference,
           std::optional<Matrix> Q, std::optional<Matrix> R, std::optional<Vector> u_min,
           std::optional<Vector> u_max, std::optional<Vector> y_min, std::optional<Vector> y_max, double lambda_g,
           double lambda_y, bool regularized) {
            const ControlProblem cp = make_problem(dm.m(), dm.p(), dm.horizon, dm.t_ini, Q, R, u_min, u_max, y_min,
                                                   y_max, lambda_g, lambda_y);
            return solve_dict(regularized ? solve_regularized_deepc(dm, u_ini, y_ini, reference, cp)
                                          : solve_deepc(dm, u_ini, y_ini, reference, cp));
        },
        py::arg("data"), py::arg("u_ini"), py::arg("y_ini"), py::arg("reference"), py::arg("Q") = py::none(),
        py::arg("R") = py::none(), py::arg("u_min") = py::none(), py::arg("u_max") = py::none(),
        py::arg("y_min") = py::none(), py::arg("y_max") = py::none(), py::arg("lambda_g") = 0.0,
        py::arg("lambda_y") = 0.0, py::arg("regularized") = false);

    // Identification and the quadrotor
    m.def(
        "identify_full_state",
        [](const Matrix& u, const Matrix& x, double ridge) {
            const IdResult id = identify_full_state(Trajectory(u, x), ridge);
            return py::make_tuple(id.model.A(), id.model.B(), id.rank_deficient);
        },
        py::arg("u"), py::arg("x"), py::arg("ridge") = 0.0, "Returns (A, B, rank_deficient).");
    m.def(
        "collect_quad_data",
        [](Index samples, std::uint64_t seed, double noise_std) {
            QuadParams params;
            params.noise_std = noise_std;
            const ExcitationData d = collect_excitation_data(params, samples, seed);
            return py::make_tuple(d.trajectory.inputs(), d.trajectory.outputs(), d.persistently_exciting);
        },
        py::arg("samples") = 214, py::arg("seed") = 1, py::arg("noise_std") = 0.01,
        "Returns (u, y, persistently_exciting) with raw rotor inputs.");
    m.def(
        "quad_hover_input", [] { return QuadParams{}.hover_input(); }, "Per-rotor hover input of the default plant.");

    // Benchmarks
    m.def(
        "run_equivalence",
        [](Index systems, std::uint64_t seed) {
            bench::EquivalenceSettings s;
            s.systems = systems;
            s.seed = seed;
            const bench::EquivalenceReport r = bench::run_equivalence(s);
            py::list deviations;
            for (const auto& c : r.cases) deviations.append(c.max_deviation);
            py::dict d;
            d["pass"] = r.pass();
            d["evaluated"] = r.evaluated();
            d["max_deviation"] = deviations;
            return d;
        },
        py::arg("systems") = 10, py::arg("seed") = 1);
}
