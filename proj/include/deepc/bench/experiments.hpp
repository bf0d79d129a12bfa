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
#ifndef DEEPC_BENCH_EXPERIMENTS_HPP
#define DEEPC_BENCH_EXPERIMENTS_HPP

#include "deepc/bench/config.hpp"
#include "deepc/bench/quad.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace deepc::bench {

/// Overrides shared by every experiment. Command-line flags land here and
/// take precedence over the matching config keys.
struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<Index> reps;
    bool timing = false;
    /// Progress lines; nothing is printed when null.
    std::ostream* log = nullptr;
};

/// Outcome of one experiment, rendered as summary.txt. `checks` is empty
/// when the experiment has no pass condition.
struct Summary {
    std::string experiment;
    std::vector<std::pair<std::string, std::string>> values;
    std::vector<std::pair<std::string, bool>> checks;

    bool pass() const;
    void add(const std::string& key, const std::string& value) { values.emplace_back(key, value); }
    void add(const std::string& key, double value);
    void check(const std::string& name, bool ok) { checks.emplace_back(name, ok); }
    void write(std::ostream& os) const;
};

// ---------------------------------------------------------------------------
// Equivalence of MPC and DeePC on random LTI systems

struct EquivalenceSettings {
    Index systems = 10;
    Index max_order = 4;
    Index max_io = 2;
    Index horizon = 10;
    Index steps = 20;
    double u_bound = 1.0;
    double y_bound = 10.0;
    /// Samples beyond min_data_length; negative values starve the data.
    Index extra_samples = 10;
    double tolerance = 1e-5;
    double reference_amplitude = 3.0;
    std::uint64_t seed = 1;
    QpSettings qp;

    static EquivalenceSettings from_config(const Config& cfg, const RunOptions& opts = {});
};

struct EquivalenceCase {
    Index index = 0;
    std::uint64_t seed = 0;
    Index n = 0, m = 0, p = 0;
    Index data_length = 0;
    bool persistently_exciting = false;
    bool solved = false;
    std::string note;
    double max_deviation = kInf;

    bool passed(double tol) const { return persistently_exciting && solved && max_deviation <= tol; }
};

struct EquivalenceReport {
    EquivalenceSettings settings;
    std::vector<EquivalenceCase> cases;

    Index evaluated() const;
    /// Every case with enough excitation agrees within tolerance, and at least one was evaluated.
    bool pass() const;
};

EquivalenceReport run_equivalence(const EquivalenceSettings& s, std::ostream* log = nullptr);
/// `equivalence.csv` and `summary.txt`.
Summary write_equivalence(const EquivalenceReport& r, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// Quadrotor experiments

/// Failed runs are ranked behind every completed run. Their unflown time
/// counts as time outside the box.
double effective_violation(const RunRecord& rec, Index planned_steps, double dt);

/// Median that orders failed runs (cost +inf) after completed ones.
double ranked_median(const std::vector<RunRecord>& runs);

struct PairedRun {
    Index rep = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t noise_seed = 0;
    bool persistently_exciting = false;
    RunRecord deepc;
    RunRecord id_mpc;
};

struct StepStatsSettings {
    QuadSetup setup;
    Index reps = 30;
    Index steps = 100;
    double step_time = 1.0;
    double step_size = 1.0;
    /// Share of pairs in which DeePC must spend strictly less time outside the box.
    double win_fraction = 0.6;
    std::uint64_t seed = 1;
    bool timing = false;

    static StepStatsSettings from_config(const Config& cfg, const RunOptions& opts = {});
};

struct StepStatsReport {
    StepStatsSettings settings;
    std::vector<PairedRun> runs;

    double median_cost_deepc() const;
    double median_cost_id_mpc() const;
    Index violation_wins() const;
    Index required_wins() const;
    bool pass() const;
};

/// Repetition r uses data seed derive_seed(seed, 2r) and noise seed
/// derive_seed(seed, 2r + 1) for both methods.
StepStatsReport run_step_stats(const StepStatsSettings& s, std::ostream* log = nullptr);
/// `step_stats.csv` and `summary.txt`.
Summary write_step_stats(const StepStatsReport& r, const std::filesystem::path& out);

struct SweepSettings {
    QuadSetup setup;
    std::vector<double> lambda_g_grid{0.0, 1.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 10000.0};
    std::vector<double> lambda_y_grid{1e2, 1e3, 1e4, 1e5, 1e6, 1e7};
    double fixed_lambda_y = 1e5;  ///< during the lambda_g sweep
    double fixed_lambda_g = 300.0;  ///< during the lambda_y sweep
    bool sweep_lambda_g = true;
    bool sweep_lambda_y = true;
    /// lambda_g range searched for the best regularized point.
    double best_min = 10.0;
    double best_max = 1000.0;
    Index reps = 8;
    Index steps = 100;
    double step_time = 1.0;
    double step_size = 1.0;
    std::uint64_t seed = 1;

    static SweepSettings from_config(const Config& cfg, const RunOptions& opts = {});
};

struct SweepPoint {
    std::string sweep;  ///< "lambda_g" or "lambda_y"
    double lambda_g = 0.0;
    double lambda_y = 0.0;
    std::vector<RunRecord> runs;  ///< one per repetition

    Index failures() const;
    /// Mean cost over completed runs (+inf when none completed).
    double mean_cost() const;
    double mean_violation(Index planned_steps, double dt) const;
    /// Fewer failures first, then lower mean cost.
    bool better_than(const SweepPoint& other) const;
};

struct SweepReport {
    SweepSettings settings;
    std::vector<SweepPoint> points;

    const SweepPoint* zero_lambda_g() const;
    /// Best lambda_g sweep point with lambda_g in [best_min, best_max].
    const SweepPoint* best_lambda_g() const;
    /// Present only when the lambda_g sweep has both points to compare.
    std::optional<bool> regularization_helps() const;
};

/// Every grid point sees the same data and noise seeds per repetition.
SweepReport run_reg_sweep(const SweepSettings& s, std::ostream* log = nullptr);
/// `reg_sweep_runs.csv`, `reg_sweep_points.csv` and `summary.txt`.
Summary write_reg_sweep(const SweepReport& r, const std::filesystem::path& out);

struct Figure8Settings {
    QuadSetup setup;
    Index steps = 600;
    double amplitude = 2.0;
    double period = 15.0;
    double height = 1.0;
    std::uint64_t seed = 1;
    bool timing = false;

    static Figure8Settings from_config(const Config& cfg, const RunOptions& opts = {});
};

struct Figure8Report {
    Figure8Settings settings;
    Matrix reference;
    RunRecord deepc;
    RunRecord id_mpc;
    ClosedLoopResult deepc_loop;
    ClosedLoopResult id_mpc_loop;
};

Figure8Report run_figure8(const Figure8Settings& s, std::ostream* log = nullptr);
/// `figure8_runs.csv`, per-method trajectories, the reference and `summary.txt`.
Summary write_figure8(const Figure8Report& r, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// Data generation and single solves

/// Quadrotor excitation record, or uniform random inputs through the
/// state-space model in `system_file` when that key is set. Writes `data.csv`.
Summary cmd_collect(const Config& cfg, const RunOptions& opts, const std::filesystem::path& out);

/// One open-loop solve from files. Writes `plan.csv` with t, u and y columns.
Summary cmd_solve(const Config& cfg, const RunOptions& opts, const std::filesystem::path& out);

/// Keys accepted by an experiment ("equivalence", "figure8", ...).
const std::set<std::string>& experiment_keys(const std::string& experiment);

} // namespace deepc::bench

#endif // DEEPC_BENCH_EXPERIMENTS_HPP
