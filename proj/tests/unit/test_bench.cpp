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
#include "doctest.h"

#include "deepc/bench/experiments.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

using namespace deepc;
using namespace deepc::bench;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    const auto dir =
        std::filesystem::temp_directory_path() / ("deepc_test_bench_" + std::to_string(::getpid())) / name;
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    return std::string(std::istreambuf_iterator<char>(is), {});
}

Config parse(const std::string& text)
{
    std::istringstream is(text);
    return Config::parse(is);
}

RunRecord record(double cost, bool failed = false, Index steps = 10, double violation = 0.0)
{
    RunRecord r;
    r.cost = cost;
    r.failed = failed;
    r.steps = steps;
    r.violation_seconds = violation;
    return r;
}

/// Small quadrotor setup for quick closed loops.
Config quick_quad(const std::string& extra = "")
{
    return parse("steps = 15\nreps = 1\n" + extra);
}

} // namespace

TEST_CASE("config parsing")
{
    const Config cfg = parse("# comment\n  horizon = 12 \nlambda_g=30\nlambda_g = 40\nq_diag = 1, 2,3\n"
                             "flag = yes\nbig = inf\n");
    CHECK(cfg.get_index("horizon", 0) == 12);
    CHECK(cfg.get_double("lambda_g", 0.0) == 40.0);
    CHECK(cfg.get_doubles("q_diag", {}) == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_double("big", 0.0) == kInf);
    CHECK(cfg.get_double("missing", 2.5) == 2.5);
    CHECK_THROWS_AS(parse("no equals sign\n"), ParseError);
    CHECK_THROWS_AS(parse("x = abc\n").get_double("x", 0.0), ParseError);
    CHECK_THROWS_AS(parse("x = 1.5\n").get_index("x", 0), ParseError);
    CHECK_THROWS_AS(parse("x = -1\n").get_seed("x", 0), ParseError);
    CHECK_THROWS_AS(parse("x = maybe\n").get_bool("x", false), ParseError);
    CHECK_THROWS_AS(parse("horizon = 3\ntypo = 1\n").require_known({"horizon"}), ParseError);
    CHECK_THROWS_AS(Config::load("/nonexistent/deepc.cfg"), ParseError);
}

TEST_CASE("seed fan-out matches the splitmix64 reference stream")
{
    // First outputs of splitmix64 started from state 0.
    CHECK(derive_seed(0, 0) == 0xe220a8397b1dcdafULL);
    CHECK(derive_seed(0, 1) == 0x6e789e6aa1b965f4ULL);
    CHECK(derive_seed(0, 2) == 0x06c45d188009454fULL);
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
    CHECK(derive_seed(7, 3) != derive_seed(8, 3));
}

TEST_CASE("quadrotor setup reads its keys")
{
    const QuadSetup d;
    CHECK(d.horizon == 30);
    CHECK(d.t_ini == 1);
    CHECK(d.samples == min_data_length(4, 1, 30, 12));
    CHECK(d.lambda_g == 30.0);
    CHECK(d.lambda_y == 1e5);
    const ControlProblem cp = d.control_problem();
    CHECK(cp.Q(0, 0) == 200.0);
    CHECK(cp.Q(2, 2) == 300.0);
    CHECK(cp.Q(5, 5) == 1.0);
    CHECK(cp.R == Matrix::Identity(4, 4));
    CHECK(cp.u_min(0) == doctest::Approx(-d.plant.hover_input()));
    CHECK(cp.u_max(0) == doctest::Approx(1.0 - d.plant.hover_input()));
    CHECK(cp.y_max(0) == 3.0);
    CHECK(std::isinf(cp.y_max(3)));

    const QuadSetup s = QuadSetup::from_config(parse("horizon = 10\nlambda_g = 5\nquad.mass = 1\nqp.method = admm\n"));
    CHECK(s.horizon == 10);
    CHECK(s.excitation.pe_order == 1 + 10 + 12);
    CHECK(s.lambda_g == 5.0);
    CHECK(s.plant.mass == 1.0);
    CHECK(s.plant.hover_input() == doctest::Approx(1.0 / 2.5));
    CHECK(s.qp.method == QpMethod::Admm);
    CHECK_THROWS_AS(QuadSetup::from_config(parse("q_diag = 1, 2\n")), ParseError);
    CHECK_THROWS_AS(QuadSetup::from_config(parse("samples = 5\n")), ParseError);
}

TEST_CASE("references stay inside the position box")
{
    const Matrix f8 = figure8_reference(600, 0.1);
    CHECK(f8.rows() == 12);
    CHECK(f8.cols() == 600);
    CHECK(f8.topRows(3).cwiseAbs().maxCoeff() <= 2.0 + 1e-12);
    CHECK((f8.row(2).array() == 1.0).all());
    CHECK(f8.bottomRows(9).cwiseAbs().maxCoeff() == 0.0);
    // Four laps: back at the start every 150 samples.
    CHECK(std::abs(f8(0, 150)) <= 1e-12);
    const Matrix st = step_reference(100, 0.1);
    CHECK(st.col(9).isZero());
    CHECK((st.col(10).head(3).array() == 1.0).all());
    CHECK(st.col(10).tail(9).isZero());
}

TEST_CASE("failed runs rank behind completed ones")
{
    CHECK(ranked_median({record(3.0), record(1.0), record(2.0)}) == 2.0);
    CHECK(ranked_median({record(3.0), record(1.0), record(0.5, true), record(2.0)}) == 2.5);
    CHECK(std::isinf(ranked_median({record(1.0), record(0.5, true)})));
    CHECK(std::isinf(ranked_median({})));
    CHECK(effective_violation(record(1.0, false, 10, 0.3), 20, 0.1) == 0.3);
    CHECK(effective_violation(record(1.0, true, 10, 0.3), 20, 0.1) == doctest::Approx(1.3));

    SweepPoint a{"lambda_g", 0.0, 1e5, {record(10.0), record(1.0, true)}};
    SweepPoint b{"lambda_g", 30.0, 1e5, {record(50.0), record(60.0)}};
    SweepPoint c{"lambda_g", 100.0, 1e5, {record(40.0), record(70.0)}};
    CHECK(a.failures() == 1);
    CHECK(a.mean_cost() == 10.0);
    CHECK(b.better_than(a));
    CHECK_FALSE(a.better_than(b));
    CHECK(b.better_than(c) == false);
    CHECK_FALSE(c.better_than(b));  // equal means
    SweepReport rep;
    rep.points = {a, b, c};
    REQUIRE(rep.zero_lambda_g() != nullptr);
    REQUIRE(rep.best_lambda_g() != nullptr);
    CHECK(rep.best_lambda_g()->lambda_g == 30.0);
    CHECK(rep.regularization_helps() == std::optional<bool>(true));
}

TEST_CASE("summary lines are machine readable")
{
    Summary s;
    s.experiment = "demo";
    s.add("x", 0.5);
    std::ostringstream none;
    s.write(none);
    CHECK(none.str() == "experiment = demo\nx = 0.5\nresult = NONE\n");
    s.check("first", true);
    s.check("second", false);
    std::ostringstream os;
    s.write(os);
    CHECK(os.str() == "experiment = demo\nx = 0.5\nPASS first\nFAIL second\nresult = FAIL\n");
    CHECK_FALSE(s.pass());
}

TEST_CASE("equivalence on a few systems")
{
    EquivalenceSettings s = EquivalenceSettings::from_config(parse("reps = 3\nseed = 5\n"));
    const EquivalenceReport r = run_equivalence(s);
    REQUIRE(r.cases.size() == 3);
    CHECK(r.evaluated() == 3);
    CHECK(r.pass());
    for (const EquivalenceCase& c : r.cases) {
        CHECK(c.n <= 4);
        CHECK(c.m <= 2);
        CHECK(c.p <= 2);
        CHECK(c.data_length == min_data_length(c.m, c.n, 10, c.n) + 10);
    }
}

TEST_CASE("starved data is reported and excluded")
{
    EquivalenceSettings s = EquivalenceSettings::from_config(parse("reps = 2\nextra_samples = -3\n"));
    const EquivalenceReport r = run_equivalence(s);
    CHECK(r.evaluated() == 0);
    for (const EquivalenceCase& c : r.cases) CHECK(c.note == "pe violation");
    CHECK_FALSE(r.pass());
}

TEST_CASE("equivalence files are reproducible")
{
    const EquivalenceSettings s = EquivalenceSettings::from_config(parse("reps = 2\n"));
    const auto a = scratch("eq_a"), b = scratch("eq_b");
    const Summary sa = write_equivalence(run_equivalence(s), a);
    write_equivalence(run_equivalence(s), b);
    CHECK(sa.pass());
    CHECK(slurp(a / "equivalence.csv") == slurp(b / "equivalence.csv"));
    CHECK(slurp(a / "summary.txt").find("result = PASS") != std::string::npos);
}

TEST_CASE("noiseless figure eight keeps the slack at zero")
{
    Figure8Settings s = Figure8Settings::from_config(quick_quad("quad.noise_std = 0\n"));
    REQUIRE(s.steps == 15);
    const Figure8Report r = run_figure8(s);
    REQUIRE_FALSE(r.deepc.failed);
    CHECK(r.deepc_loop.length() == 15);
    for (const StepRecord& step : r.deepc_loop.steps) CHECK(step.slack_norm <= 1e-6);
    CHECK(r.deepc.violation_seconds == 0.0);
    const auto out = scratch("f8");
    write_figure8(r, out);
    CHECK(std::filesystem::exists(out / "figure8_deepc.csv"));
    CHECK(std::filesystem::exists(out / "figure8_id_mpc.csv"));
    CHECK(std::filesystem::exists(out / "figure8_reference.csv"));
}

TEST_CASE("step statistics pair the seeds and reproduce")
{
    StepStatsSettings s = StepStatsSettings::from_config(quick_quad("reps = 2\nquad.noise_std = 0\n"));
    const StepStatsReport a = run_step_stats(s);
    const StepStatsReport b = run_step_stats(s);
    REQUIRE(a.runs.size() == 2);
    CHECK(a.runs[0].data_seed == derive_seed(s.seed, 0));
    CHECK(a.runs[0].noise_seed == derive_seed(s.seed, 1));
    CHECK(a.runs[1].data_seed == derive_seed(s.seed, 2));
    CHECK(a.runs[0].deepc.cost == b.runs[0].deepc.cost);
    CHECK(a.runs[1].id_mpc.cost == b.runs[1].id_mpc.cost);
    CHECK(a.required_wins() == 2);
    const auto out = scratch("ss");
    write_step_stats(a, out);
    const std::string csv = slurp(out / "step_stats.csv");
    // Header plus one line per method and repetition.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("regularization sweep shares data across grid points")
{
    SweepSettings s = SweepSettings::from_config(
        quick_quad("lambda_g_grid = 0, 30\nsweep_lambda_y = false\nsteps = 5\nreps = 2\n"));
    const SweepReport r = run_reg_sweep(s);
    REQUIRE(r.points.size() == 2);
    for (const SweepPoint& p : r.points) {
        CHECK(p.sweep == "lambda_g");
        CHECK(p.lambda_y == 1e5);
        CHECK(p.runs.size() == 2);
    }
    const auto out = scratch("sw");
    const Summary sum = write_reg_sweep(r, out);
    CHECK(sum.checks.size() == 1);
    const std::string points = slurp(out / "reg_sweep_points.csv");
    CHECK(points.rfind("sweep,lambda_g,lambda_y,runs,failures,mean_cost", 0) == 0);

    const SweepSettings both = SweepSettings::from_config(Config{});
    CHECK(std::count(both.lambda_g_grid.begin(), both.lambda_g_grid.end(), 300.0) == 1);
    CHECK(std::count(both.lambda_y_grid.begin(), both.lambda_y_grid.end(), 1e5) == 1);
    CHECK(both.fixed_lambda_g == 300.0);
    CHECK(both.fixed_lambda_y == 1e5);
    CHECK(both.reps == 8);
}

TEST_CASE("collect writes a reproducible quadrotor record")
{
    const auto a = scratch("col_a"), b = scratch("col_b");
    RunOptions opts;
    opts.seed = 3;
    const Summary s = cmd_collect(Config{}, opts, a);
    cmd_collect(Config{}, opts, b);
    CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
    std::ifstream is(a / "data.csv");
    const Trajectory t = read_trajectory_csv(is, 4, 12);
    CHECK(t.length() == 214);
    CHECK(t.dt() == doctest::Approx(0.1));
}

TEST_CASE("solve from files reproduces the in-memory plan")
{
    const auto dir = scratch("solve");
    std::filesystem::create_directories(dir);
    const StateSpace ss = random_controllable_system(2, 1, 1, 21);
    {
        std::ofstream os(dir / "sys.txt");
        write_state_space(os, ss);
    }
    Config cfg = parse("samples = 60\n");
    cfg.set("system_file", (dir / "sys.txt").string());
    RunOptions opts;
    opts.seed = 4;
    cmd_collect(cfg, opts, dir / "data");
    {
        std::ofstream os(dir / "ini.csv");
        const Matrix u = Matrix::Constant(1, 2, 0.5);
        write_trajectory_csv(os, Trajectory(u, simulate(ss, Vector::Zero(2), u).outputs));
    }
    Config solve = parse("method = deepc\nhorizon = 5\nt_ini = 2\nreference = 1\nu_min = -1\nu_max = 1\n");
    solve.set("data_file", (dir / "data" / "data.csv").string());
    solve.set("ini_file", (dir / "ini.csv").string());
    solve.require_known(experiment_keys("solve"));
    const Summary s = cmd_solve(solve, {}, dir / "out_deepc");
    CHECK(s.pass());

    Config mpc = parse("method = mpc\nhorizon = 5\nt_ini = 2\nreference = 1\nu_min = -1\nu_max = 1\n");
    mpc.set("system_file", (dir / "sys.txt").string());
    mpc.set("ini_file", (dir / "ini.csv").string());
    CHECK(cmd_solve(mpc, {}, dir / "out_mpc").pass());

    std::ifstream pa(dir / "out_deepc" / "plan.csv"), pb(dir / "out_mpc" / "plan.csv");
    const Trajectory a = read_trajectory_csv(pa, 1, 1), b = read_trajectory_csv(pb, 1, 1);
    CHECK((a.inputs() - b.inputs()).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_THROWS_AS(cmd_solve(parse("method = magic\n"), {}, dir / "bad"), ParseError);
}

TEST_CASE("experiment key sets")
{
    CHECK(experiment_keys("step-stats").count("lambda_g") == 1);
    CHECK(experiment_keys("equivalence").count("lambda_g") == 0);
    CHECK_THROWS_AS(experiment_keys("nope"), ParseError);
}
