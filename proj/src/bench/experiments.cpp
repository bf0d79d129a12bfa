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
#include "deepc/bench/experiments.hpp"

#include "deepc/behavioral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace deepc::bench {

namespace {

std::ofstream open_output(const std::filesystem::path& out, const std::string& name)
{
    std::filesystem::create_directories(out);
    std::ofstream os(out / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (out / name).string());
    return os;
}

void write_summary(const Summary& s, const std::filesystem::path& out)
{
    std::ofstream os = open_output(out, "summary.txt");
    s.write(os);
}

/// Commas and newlines would break the CSV layout.
std::string csv_text(std::string text)
{
    std::replace(text.begin(), text.end(), ',', ';');
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

Matrix uniform_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) M(i, j) = dist(rng);
    return M;
}

std::uint64_t resolve_seed(const Config& cfg, const RunOptions& opts)
{
    return opts.seed ? *opts.seed : cfg.get_seed("seed", 1);
}

Index resolve_reps(const Config& cfg, const RunOptions& opts, Index fallback)
{
    const Index reps = opts.reps ? *opts.reps : cfg.get_index("reps", fallback);
    if (reps < 1) throw ParseError("reps must be at least 1");
    return reps;
}

void log_line(std::ostream* log, const std::string& text)
{
    if (log) *log << text << std::endl;
}

double dt_of(const QuadSetup& setup)
{
    return setup.plant.dt;
}

void write_run_columns(std::ostream& os, const RunRecord& rec, Index planned, double dt, bool timing)
{
    os << (rec.failed ? 1 : 0) << ',' << rec.steps << ',' << format_double(rec.cost) << ','
       << format_double(rec.violation_seconds) << ',' << format_double(effective_violation(rec, planned, dt)) << ','
       << format_double(rec.max_slack);
    if (timing) os << ',' << format_double(rec.total_solve_ms);
    os << ',' << csv_text(rec.reason);
}

const char* kRunHeader = "failed,steps,cost,violation_s,effective_violation_s,max_slack";

std::string run_header(bool timing)
{
    return std::string(kRunHeader) + (timing ? ",solve_ms" : "") + ",reason";
}

} // namespace

// ---------------------------------------------------------------------------
// Summary

bool Summary::pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
}

void Summary::add(const std::string& key, double value)
{
    add(key, format_double(value));
}

void Summary::write(std::ostream& os) const
{
    os << "experiment = " << experiment << '\n';
    for (const auto& [k, v] : values) os << k << " = " << v << '\n';
    for (const auto& [name, ok] : checks) os << (ok ? "PASS " : "FAIL ") << name << '\n';
    os << "result = " << (checks.empty() ? "NONE" : (pass() ? "PASS" : "FAIL")) << '\n';
}

// ---------------------------------------------------------------------------
// Equivalence

EquivalenceSettings EquivalenceSettings::from_config(const Config& cfg, const RunOptions& opts)
{
    EquivalenceSettings s;
    s.systems = resolve_reps(cfg, opts, s.systems);
    s.max_order = cfg.get_index("max_order", s.max_order);
    s.max_io = cfg.get_index("max_io", s.max_io);
    s.horizon = cfg.get_index("horizon", s.horizon);
    s.steps = cfg.get_index("steps", s.steps);
    s.u_bound = cfg.get_double("u_bound", s.u_bound);
    s.y_bound = cfg.get_double("y_bound", s.y_bound);
    s.extra_samples = cfg.get_index("extra_samples", s.extra_samples);
    s.tolerance = cfg.get_double("tolerance", s.tolerance);
    s.reference_amplitude = cfg.get_double("reference_amplitude", s.reference_amplitude);
    s.qp.method = parse_qp_method(cfg.get_string("qp.method", to_string(s.qp.method)));
    s.seed = resolve_seed(cfg, opts);
    if (s.max_order < 1 || s.max_io < 1 || s.horizon < 1 || s.steps < 1) {
        throw ParseError("equivalence: orders, horizon and steps must be positive");
    }
    return s;
}

Index EquivalenceReport::evaluated() const
{
    return static_cast<Index>(
        std::count_if(cases.begin(), cases.end(), [](const EquivalenceCase& c) { return c.persistently_exciting; }));
}

bool EquivalenceReport::pass() const
{
    if (evaluated() == 0) return false;
    return std::all_of(cases.begin(), cases.end(), [&](const EquivalenceCase& c) {
        return !c.persistently_exciting || c.passed(settings.tolerance);
    });
}

EquivalenceReport run_equivalence(const EquivalenceSettings& s, std::ostream* log)
{
    EquivalenceReport report{s, {}};
    for (Index i = 0; i < s.systems; ++i) {
        EquivalenceCase c;
        c.index = i;
        c.seed = derive_seed(s.seed, static_cast<std::uint64_t>(i));
        std::mt19937_64 rng(c.seed);
        c.n = std::uniform_int_distribution<Index>(1, s.max_order)(rng);
        c.m = std::uniform_int_distribution<Index>(1, s.max_io)(rng);
        c.p = std::uniform_int_distribution<Index>(1, s.max_io)(rng);
        const StateSpace ss = random_controllable_system(c.n, c.m, c.p, derive_seed(c.seed, 0));
        const Index t_ini = c.n;
        const Index order = t_ini + s.horizon + c.n;
        c.data_length = std::max<Index>(min_data_length(c.m, t_ini, s.horizon, c.n) + s.extra_samples, 1);

        const Matrix u = uniform_matrix(rng, c.m, c.data_length, -1.0, 1.0);
        const Matrix y = simulate(ss, Vector::Zero(c.n), u).outputs;
        const bool long_enough = c.data_length >= min_data_length(c.m, t_ini, s.horizon, c.n);
        c.persistently_exciting =
            long_enough && c.data_length >= order && is_persistently_exciting(u, order).exciting;
        if (!c.persistently_exciting) {
            c.note = "pe violation";
            report.cases.push_back(c);
            log_line(log, "system " + std::to_string(i) + ": pe violation, excluded");
            continue;
        }

        ControlProblem cp = ControlProblem::make(c.m, c.p, s.horizon, t_ini);
        cp.R = 0.01 * Matrix::Identity(c.m, c.m);
        cp.u_min = Vector::Constant(c.m, -s.u_bound);
        cp.u_max = Vector::Constant(c.m, s.u_bound);
        cp.y_min = Vector::Constant(c.p, -s.y_bound);
        cp.y_max = Vector::Constant(c.p, s.y_bound);
        const Matrix ref =
            uniform_matrix(rng, c.p, 1, -s.reference_amplitude, s.reference_amplitude).replicate(1, s.steps);
        const Vector x0 = uniform_matrix(rng, c.n, 1, -1.0, 1.0);

        try {
            RunnerOptions opts;
            opts.steps = s.steps;
            LtiPlant p_mpc(ss, x0), p_deepc(ss, x0);
            MpcController mpc(ss, cp, s.qp, StateEstimator::PlantState);
            DeepcController deepc(partition_data(Trajectory(u, y), t_ini, s.horizon, c.n), cp, false, s.qp);
            const ClosedLoopResult a = run_receding_horizon(p_mpc, mpc, ref, opts);
            const ClosedLoopResult b = run_receding_horizon(p_deepc, deepc, ref, opts);
            if (a.aborted || b.aborted) {
                c.note = a.aborted ? "mpc: " + a.abort_reason : "deepc: " + b.abort_reason;
            } else {
                c.solved = true;
                c.max_deviation = (a.inputs - b.inputs).cwiseAbs().maxCoeff();
            }
        } catch (const Error& e) {
            c.note = e.what();
        }
        log_line(log, "system " + std::to_string(i) + ": n=" + std::to_string(c.n) + " m=" + std::to_string(c.m) +
                          " p=" + std::to_string(c.p) + " max deviation " + format_double(c.max_deviation));
        report.cases.push_back(c);
    }
    return report;
}

Summary write_equivalence(const EquivalenceReport& r, const std::filesystem::path& out)
{
    {
        std::ofstream os = open_output(out, "equivalence.csv");
        os << "system,seed,n,m,p,data_length,persistently_exciting,solved,max_deviation,note\n";
        for (const EquivalenceCase& c : r.cases) {
            os << c.index << ',' << c.seed << ',' << c.n << ',' << c.m << ',' << c.p << ',' << c.data_length << ','
               << (c.persistently_exciting ? 1 : 0) << ',' << (c.solved ? 1 : 0) << ','
               << format_double(c.max_deviation) << ',' << csv_text(c.note) << '\n';
        }
    }
    Summary s;
    s.experiment = "equivalence";
    s.add("seed", std::to_string(r.settings.seed));
    s.add("systems", std::to_string(r.cases.size()));
    s.add("evaluated", std::to_string(r.evaluated()));
    double worst = 0.0;
    for (const EquivalenceCase& c : r.cases)
        if (c.persistently_exciting) worst = std::max(worst, c.max_deviation);
    s.add("max_deviation", worst);
    s.add("tolerance", r.settings.tolerance);
    s.check("max input deviation within tolerance on every evaluated system", r.pass());
    write_summary(s, out);
    return s;
}

// ---------------------------------------------------------------------------
// Quadrotor helpers

double effective_violation(const RunRecord& rec, Index planned_steps, double dt)
{
    if (!rec.failed) return rec.violation_seconds;
    const Index unflown = std::max<Index>(planned_steps - rec.steps, 0);
    return rec.violation_seconds + static_cast<double>(unflown) * dt;
}

double ranked_median(const std::vector<RunRecord>& runs)
{
    if (runs.empty()) return kInf;
    std::vector<double> costs;
    costs.reserve(runs.size());
    for (const RunRecord& r : runs) costs.push_back(r.failed ? kInf : r.cost);
    std::sort(costs.begin(), costs.end());
    const std::size_t k = costs.size() / 2;
    if (costs.size() % 2 == 1) return costs[k];
    if (std::isinf(costs[k - 1]) || std::isinf(costs[k])) return kInf;
    return 0.5 * (costs[k - 1] + costs[k]);
}

namespace {

QuadSetup quad_setup(const Config& cfg)
{
    return QuadSetup::from_config(cfg);
}

struct RepData {
    std::uint64_t data_seed = 0;
    std::uint64_t noise_seed = 0;
    std::optional<ExcitationData> data;
    std::string error;
};

RepData rep_data(const QuadSetup& setup, std::uint64_t seed, Index rep)
{
    RepData d;
    d.data_seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(rep));
    d.noise_seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(rep) + 1);
    try {
        d.data = quad_data(setup, d.data_seed);
    } catch (const Error& e) {
        d.error = std::string("data collection failed: ") + e.what();
    }
    return d;
}

RunRecord failed_record(const std::string& method, const std::string& reason)
{
    RunRecord r;
    r.method = method;
    r.failed = true;
    r.reason = reason;
    return r;
}

} // namespace

// ---------------------------------------------------------------------------
// Step statistics

StepStatsSettings StepStatsSettings::from_config(const Config& cfg, const RunOptions& opts)
{
    StepStatsSettings s;
    s.setup = quad_setup(cfg);
    s.reps = resolve_reps(cfg, opts, s.reps);
    s.steps = cfg.get_index("steps", s.steps);
    s.step_time = cfg.get_double("step_time", s.step_time);
    s.step_size = cfg.get_double("step_size", s.step_size);
    s.win_fraction = cfg.get_double("win_fraction", s.win_fraction);
    s.seed = resolve_seed(cfg, opts);
    s.timing = opts.timing;
    if (s.steps < 1) throw ParseError("steps must be at least 1");
    return s;
}

double StepStatsReport::median_cost_deepc() const
{
    std::vector<RunRecord> v;
    for (const PairedRun& p : runs) v.push_back(p.deepc);
    return ranked_median(v);
}

double StepStatsReport::median_cost_id_mpc() const
{
    std::vector<RunRecord> v;
    for (const PairedRun& p : runs) v.push_back(p.id_mpc);
    return ranked_median(v);
}

Index StepStatsReport::violation_wins() const
{
    const double dt = dt_of(settings.setup);
    Index wins = 0;
    for (const PairedRun& p : runs) {
        if (effective_violation(p.deepc, settings.steps, dt) < effective_violation(p.id_mpc, settings.steps, dt))
            ++wins;
    }
    return wins;
}

Index StepStatsReport::required_wins() const
{
    return static_cast<Index>(std::ceil(settings.win_fraction * static_cast<double>(runs.size()) - 1e-9));
}

bool StepStatsReport::pass() const
{
    return !runs.empty() && median_cost_deepc() <= median_cost_id_mpc() && violation_wins() >= required_wins();
}

StepStatsReport run_step_stats(const StepStatsSettings& s, std::ostream* log)
{
    StepStatsReport report{s, {}};
    const Matrix ref = step_reference(s.steps, dt_of(s.setup), s.step_time, s.step_size);
    for (Index r = 0; r < s.reps; ++r) {
        const RepData d = rep_data(s.setup, s.seed, r);
        PairedRun run;
        run.rep = r;
        run.data_seed = d.data_seed;
        run.noise_seed = d.noise_seed;
        if (!d.data) {
            run.deepc = failed_record("deepc", d.error);
            run.id_mpc = failed_record("id_mpc", d.error);
        } else {
            run.persistently_exciting = d.data->persistently_exciting;
            run.deepc = run_quad_deepc(s.setup, *d.data, ref, s.steps, d.noise_seed, s.timing);
            run.id_mpc = run_quad_id_mpc(s.setup, *d.data, ref, s.steps, d.noise_seed, s.timing);
        }
        log_line(log, "rep " + std::to_string(r) + ": deepc cost " + format_double(run.deepc.cost) +
                          (run.deepc.failed ? " (failed)" : "") + ", id_mpc cost " + format_double(run.id_mpc.cost) +
                          (run.id_mpc.failed ? " (failed)" : ""));
        report.runs.push_back(std::move(run));
    }
    return report;
}

Summary write_step_stats(const StepStatsReport& r, const std::filesystem::path& out)
{
    const double dt = dt_of(r.settings.setup);
    const bool timing = r.settings.timing;
    {
        std::ofstream os = open_output(out, "step_stats.csv");
        os << "rep,data_seed,noise_seed,persistently_exciting,method," << run_header(timing) << '\n';
        for (const PairedRun& p : r.runs) {
            for (const RunRecord* rec : {&p.deepc, &p.id_mpc}) {
                os << p.rep << ',' << p.data_seed << ',' << p.noise_seed << ',' << (p.persistently_exciting ? 1 : 0)
                   << ',' << rec->method << ',';
                write_run_columns(os, *rec, r.settings.steps, dt, timing);
                os << '\n';
            }
        }
    }
    Summary s;
    s.experiment = "step-stats";
    s.add("seed", std::to_string(r.settings.seed));
    s.add("reps", std::to_string(r.runs.size()));
    s.add("steps", std::to_string(r.settings.steps));
    Index deepc_failed = 0, id_failed = 0;
    for (const PairedRun& p : r.runs) {
        deepc_failed += p.deepc.failed ? 1 : 0;
        id_failed += p.id_mpc.failed ? 1 : 0;
    }
    s.add("deepc_failed", std::to_string(deepc_failed));
    s.add("id_mpc_failed", std::to_string(id_failed));
    s.add("deepc_median_cost", r.median_cost_deepc());
    s.add("id_mpc_median_cost", r.median_cost_id_mpc());
    s.add("deepc_violation_wins", std::to_string(r.violation_wins()));
    s.add("required_violation_wins", std::to_string(r.required_wins()));
    if (timing) {
        double total = 0.0;
        Index solves = 0;
        for (const PairedRun& p : r.runs) {
            total += p.deepc.total_solve_ms;
            solves += p.deepc.steps;
        }
        if (solves > 0) s.add("deepc_mean_solve_ms", total / static_cast<double>(solves));
    }
    s.check("deepc median cost not above id_mpc median cost", r.median_cost_deepc() <= r.median_cost_id_mpc());
    s.check("deepc spends less time outside the box in enough pairs", r.violation_wins() >= r.required_wins());
    write_summary(s, out);
    return s;
}

// ---------------------------------------------------------------------------
// Regularization sweep

SweepSettings SweepSettings::from_config(const Config& cfg, const RunOptions& opts)
{
    SweepSettings s;
    s.setup = quad_setup(cfg);
    s.lambda_g_grid = cfg.get_doubles("lambda_g_grid", s.lambda_g_grid);
    s.lambda_y_grid = cfg.get_doubles("lambda_y_grid", s.lambda_y_grid);
    s.fixed_lambda_y = cfg.get_double("fixed_lambda_y", s.fixed_lambda_y);
    s.fixed_lambda_g = cfg.get_double("fixed_lambda_g", s.fixed_lambda_g);
    s.sweep_lambda_g = cfg.get_bool("sweep_lambda_g", s.sweep_lambda_g);
    s.sweep_lambda_y = cfg.get_bool("sweep_lambda_y", s.sweep_lambda_y);
    s.best_min = cfg.get_double("best_lambda_g_min", s.best_min);
    s.best_max = cfg.get_double("best_lambda_g_max", s.best_max);
    s.reps = resolve_reps(cfg, opts, s.reps);
    s.steps = cfg.get_index("steps", s.steps);
    s.step_time = cfg.get_double("step_time", s.step_time);
    s.step_size = cfg.get_double("step_size", s.step_size);
    s.seed = resolve_seed(cfg, opts);
    if (s.steps < 1) throw ParseError("steps must be at least 1");
    for (double v : s.lambda_g_grid)
        if (!(v >= 0.0)) throw ParseError("lambda_g_grid entries must be nonnegative");
    for (double v : s.lambda_y_grid)
        if (!(v >= 0.0)) throw ParseError("lambda_y_grid entries must be nonnegative");
    return s;
}

Index SweepPoint::failures() const
{
    return static_cast<Index>(std::count_if(runs.begin(), runs.end(), [](const RunRecord& r) { return r.failed; }));
}

double SweepPoint::mean_cost() const
{
    double sum = 0.0;
    Index count = 0;
    for (const RunRecord& r : runs) {
        if (r.failed) continue;
        sum += r.cost;
        ++count;
    }
    return count == 0 ? kInf : sum / static_cast<double>(count);
}

double SweepPoint::mean_violation(Index planned_steps, double dt) const
{
    if (runs.empty()) return 0.0;
    double sum = 0.0;
    for (const RunRecord& r : runs) sum += effective_violation(r, planned_steps, dt);
    return sum / static_cast<double>(runs.size());
}

bool SweepPoint::better_than(const SweepPoint& other) const
{
    if (failures() != other.failures()) return failures() < other.failures();
    return mean_cost() < other.mean_cost();
}

const SweepPoint* SweepReport::zero_lambda_g() const
{
    for (const SweepPoint& p : points)
        if (p.sweep == "lambda_g" && p.lambda_g == 0.0) return &p;
    return nullptr;
}

const SweepPoint* SweepReport::best_lambda_g() const
{
    const SweepPoint* best = nullptr;
    for (const SweepPoint& p : points) {
        if (p.sweep != "lambda_g" || p.lambda_g < settings.best_min || p.lambda_g > settings.best_max) continue;
        if (!best || p.better_than(*best)) best = &p;
    }
    return best;
}

std::optional<bool> SweepReport::regularization_helps() const
{
    const SweepPoint* zero = zero_lambda_g();
    const SweepPoint* best = best_lambda_g();
    if (!zero || !best) return std::nullopt;
    return best->better_than(*zero);
}

SweepReport run_reg_sweep(const SweepSettings& s, std::ostream* log)
{
    SweepReport report{s, {}};
    if (s.sweep_lambda_g) {
        for (double g : s.lambda_g_grid) report.points.push_back({"lambda_g", g, s.fixed_lambda_y, {}});
    }
    if (s.sweep_lambda_y) {
        for (double y : s.lambda_y_grid) report.points.push_back({"lambda_y", s.fixed_lambda_g, y, {}});
    }
    const Matrix ref = step_reference(s.steps, dt_of(s.setup), s.step_time, s.step_size);
    for (Index r = 0; r < s.reps; ++r) {
        const RepData d = rep_data(s.setup, s.seed, r);
        for (SweepPoint& p : report.points) {
            if (!d.data) {
                p.runs.push_back(failed_record("deepc", d.error));
                continue;
            }
            QuadSetup setup = s.setup;
            setup.lambda_g = p.lambda_g;
            setup.lambda_y = p.lambda_y;
            p.runs.push_back(run_quad_deepc(setup, *d.data, ref, s.steps, d.noise_seed));
            const RunRecord& rec = p.runs.back();
            log_line(log, "rep " + std::to_string(r) + " lambda_g " + format_double(p.lambda_g) + " lambda_y " +
                              format_double(p.lambda_y) + ": cost " + format_double(rec.cost) +
                              (rec.failed ? " (failed)" : ""));
        }
    }
    return report;
}

Summary write_reg_sweep(const SweepReport& r, const std::filesystem::path& out)
{
    const double dt = dt_of(r.settings.setup);
    const Index planned = r.settings.steps;
    {
        std::ofstream os = open_output(out, "reg_sweep_runs.csv");
        os << "sweep,lambda_g,lambda_y,rep," << run_header(false) << '\n';
        for (const SweepPoint& p : r.points) {
            for (std::size_t k = 0; k < p.runs.size(); ++k) {
                os << p.sweep << ',' << format_double(p.lambda_g) << ',' << format_double(p.lambda_y) << ',' << k
                   << ',';
                write_run_columns(os, p.runs[k], planned, dt, false);
                os << '\n';
            }
        }
    }
    {
        std::ofstream os = open_output(out, "reg_sweep_points.csv");
        os << "sweep,lambda_g,lambda_y,runs,failures,mean_cost,mean_effective_violation_s\n";
        for (const SweepPoint& p : r.points) {
            os << p.sweep << ',' << format_double(p.lambda_g) << ',' << format_double(p.lambda_y) << ','
               << p.runs.size() << ',' << p.failures() << ',' << format_double(p.mean_cost()) << ','
               << format_double(p.mean_violation(planned, dt)) << '\n';
        }
    }
    Summary s;
    s.experiment = "reg-sweep";
    s.add("seed", std::to_string(r.settings.seed));
    s.add("reps", std::to_string(r.settings.reps));
    s.add("points", std::to_string(r.points.size()));
    if (const SweepPoint* z = r.zero_lambda_g()) {
        s.add("zero_lambda_g_failures", std::to_string(z->failures()));
        s.add("zero_lambda_g_mean_cost", z->mean_cost());
    }
    if (const SweepPoint* b = r.best_lambda_g()) {
        s.add("best_lambda_g", b->lambda_g);
        s.add("best_lambda_g_failures", std::to_string(b->failures()));
        s.add("best_lambda_g_mean_cost", b->mean_cost());
    }
    if (const auto helps = r.regularization_helps()) {
        s.check("lambda_g = 0 strictly worse than the best regularized lambda_g", *helps);
    }
    write_summary(s, out);
    return s;
}

// ---------------------------------------------------------------------------
// Figure eight

Figure8Settings Figure8Settings::from_config(const Config& cfg, const RunOptions& opts)
{
    Figure8Settings s;
    s.setup = quad_setup(cfg);
    s.steps = cfg.get_index("steps", s.steps);
    s.amplitude = cfg.get_double("amplitude", s.amplitude);
    s.period = cfg.get_double("period", s.period);
    s.height = cfg.get_double("height", s.height);
    s.seed = resolve_seed(cfg, opts);
    s.timing = opts.timing;
    if (s.steps < 1) throw ParseError("steps must be at least 1");
    return s;
}

Figure8Report run_figure8(const Figure8Settings& s, std::ostream* log)
{
    Figure8Report report;
    report.settings = s;
    report.reference = figure8_reference(s.steps, dt_of(s.setup), s.amplitude, s.period, s.height);
    const RepData d = rep_data(s.setup, s.seed, 0);
    if (!d.data) {
        report.deepc = failed_record("deepc", d.error);
        report.id_mpc = failed_record("id_mpc", d.error);
        return report;
    }
    report.deepc =
        run_quad_deepc(s.setup, *d.data, report.reference, s.steps, d.noise_seed, s.timing, &report.deepc_loop);
    log_line(log, "deepc: cost " + format_double(report.deepc.cost));
    report.id_mpc =
        run_quad_id_mpc(s.setup, *d.data, report.reference, s.steps, d.noise_seed, s.timing, &report.id_mpc_loop);
    log_line(log, "id_mpc: cost " + format_double(report.id_mpc.cost));
    return report;
}

Summary write_figure8(const Figure8Report& r, const std::filesystem::path& out)
{
    const double dt = dt_of(r.settings.setup);
    {
        std::ofstream os = open_output(out, "figure8_runs.csv");
        os << "method," << run_header(r.settings.timing) << '\n';
        for (const RunRecord* rec : {&r.deepc, &r.id_mpc}) {
            os << rec->method << ',';
            write_run_columns(os, *rec, r.settings.steps, dt, r.settings.timing);
            os << '\n';
        }
    }
    {
        std::ofstream os = open_output(out, "figure8_deepc.csv");
        write_step_diagnostics_csv(os, r.deepc_loop);
    }
    {
        std::ofstream os = open_output(out, "figure8_id_mpc.csv");
        write_step_diagnostics_csv(os, r.id_mpc_loop);
    }
    {
        std::ofstream os = open_output(out, "figure8_reference.csv");
        os << "t,x,y,z\n";
        for (Index k = 0; k < r.reference.cols(); ++k) {
            os << format_double(static_cast<double>(k) * dt) << ',' << format_double(r.reference(0, k)) << ','
               << format_double(r.reference(1, k)) << ',' << format_double(r.reference(2, k)) << '\n';
        }
    }
    Summary s;
    s.experiment = "figure8";
    s.add("seed", std::to_string(r.settings.seed));
    s.add("steps", std::to_string(r.settings.steps));
    for (const RunRecord* rec : {&r.deepc, &r.id_mpc}) {
        s.add(rec->method + "_failed", rec->failed ? "1" : "0");
        s.add(rec->method + "_cost", rec->cost);
        s.add(rec->method + "_violation_s", effective_violation(*rec, r.settings.steps, dt));
        s.add(rec->method + "_max_slack", rec->max_slack);
    }
    write_summary(s, out);
    return s;
}

// ---------------------------------------------------------------------------
// collect and solve

namespace {

StateSpace load_system(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open system file " + path);
    return read_state_space(is);
}

Trajectory load_trajectory(const std::string& path, Index m, Index p)
{
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open trajectory file " + path);
    return read_trajectory_csv(is, m, p);
}

Vector vector_key(const Config& cfg, const std::string& key, Index size, double fallback)
{
    if (!cfg.has(key)) return Vector::Constant(size, fallback);
    const std::vector<double> v = cfg.get_doubles(key, {});
    if (v.size() == 1) return Vector::Constant(size, v[0]);
    if (static_cast<Index>(v.size()) != size) {
        throw ParseError(key + ": expected 1 or " + std::to_string(size) + " entries");
    }
    return Eigen::Map<const Vector>(v.data(), size);
}

} // namespace

Summary cmd_collect(const Config& cfg, const RunOptions& opts, const std::filesystem::path& out)
{
    const std::uint64_t seed = resolve_seed(cfg, opts);
    Summary s;
    s.experiment = "collect";
    s.add("seed", std::to_string(seed));
    Trajectory traj;
    if (cfg.has("system_file")) {
        const StateSpace ss = load_system(cfg.get_string("system_file", ""));
        const Index T = cfg.get_index("samples", 100);
        const double amp = cfg.get_double("input_amplitude", 1.0);
        if (T < 1) throw ParseError("samples must be at least 1");
        std::mt19937_64 rng(derive_seed(seed, 0));
        const Matrix u = uniform_matrix(rng, ss.m(), T, -amp, amp);
        traj = Trajectory(u, simulate(ss, Vector::Zero(ss.n()), u).outputs);
        if (cfg.has("pe_order")) {
            const ExcitationCheck pe = is_persistently_exciting(u, cfg.get_index("pe_order", 1));
            s.add("persistently_exciting", pe.exciting ? "1" : "0");
        }
    } else {
        const QuadSetup setup = quad_setup(cfg);
        const ExcitationData d = quad_data(setup, derive_seed(seed, 0));
        traj = d.trajectory;
        s.add("persistently_exciting", d.persistently_exciting ? "1" : "0");
        s.add("pe_rank", std::to_string(d.pe_rank));
        s.add("band", d.band);
    }
    s.add("samples", std::to_string(traj.length()));
    {
        std::ofstream os = open_output(out, "data.csv");
        write_trajectory_csv(os, traj);
    }
    write_summary(s, out);
    return s;
}

Summary cmd_solve(const Config& cfg, const RunOptions&, const std::filesystem::path& out)
{
    const std::string method = cfg.get_string("method", "regularized");
    const Index N = cfg.get_index("horizon", 10);
    const Index t_ini = cfg.get_index("t_ini", 1);
    std::optional<StateSpace> ss;
    if (cfg.has("system_file")) ss = load_system(cfg.get_string("system_file", ""));
    const Index m = ss ? ss->m() : cfg.get_index("m", 1);
    const Index p = ss ? ss->p() : cfg.get_index("p", 1);

    ControlProblem cp = ControlProblem::make(m, p, N, t_ini);
    cp.Q = vector_key(cfg, "q_diag", p, 1.0).asDiagonal();
    cp.R = vector_key(cfg, "r_diag", m, 1.0).asDiagonal();
    cp.u_min = vector_key(cfg, "u_min", m, -kInf);
    cp.u_max = vector_key(cfg, "u_max", m, kInf);
    cp.y_min = vector_key(cfg, "y_min", p, -kInf);
    cp.y_max = vector_key(cfg, "y_max", p, kInf);
    cp.lambda_g = cfg.get_double("lambda_g", 0.0);
    cp.lambda_y = cfg.get_double("lambda_y", 0.0);
    const Matrix reference = vector_key(cfg, "reference", p, 0.0).replicate(1, N);
    QpSettings qp;
    qp.method = parse_qp_method(cfg.get_string("qp.method", to_string(qp.method)));

    SolveResult res;
    if (method == "mpc") {
        if (!ss) throw ParseError("solve: method mpc needs system_file");
        Vector x0;
        if (cfg.has("x0")) {
            x0 = vector_key(cfg, "x0", ss->n(), 0.0);
        } else {
            if (!cfg.has("ini_file")) throw ParseError("solve: method mpc needs x0 or ini_file");
            const Trajectory ini = load_trajectory(cfg.get_string("ini_file", ""), m, p);
            if (ini.length() < t_ini) throw LengthError("solve: ini_file shorter than t_ini");
            const Trajectory w = ini.window(ini.length() - t_ini, t_ini);
            x0 = reconstruct_initial_state(*ss, w.inputs(), w.outputs()).current;
        }
        res = solve_mpc(*ss, x0, reference, cp, qp);
    } else if (method == "deepc" || method == "regularized") {
        if (!cfg.has("data_file") || !cfg.has("ini_file")) throw ParseError("solve: need data_file and ini_file");
        const Trajectory data = load_trajectory(cfg.get_string("data_file", ""), m, p);
        const Trajectory ini = load_trajectory(cfg.get_string("ini_file", ""), m, p);
        if (ini.length() < t_ini) throw LengthError("solve: ini_file shorter than t_ini");
        const Trajectory w = ini.window(ini.length() - t_ini, t_ini);
        const DataMatrices dm = partition_data(data, t_ini, N);
        res = method == "deepc" ? solve_deepc(dm, w.inputs(), w.outputs(), reference, cp, qp)
                                : solve_regularized_deepc(dm, w.inputs(), w.outputs(), reference, cp, qp);
    } else {
        throw ParseError("solve: unknown method '" + method + "'");
    }

    Summary s;
    s.experiment = "solve";
    s.add("method", method);
    s.add("status", to_string(res.status));
    s.add("objective", res.objective);
    if (res.sigma_y.size() > 0) s.add("slack_norm", res.sigma_y.lpNorm<1>());
    if (res.optimal()) {
        std::ofstream os = open_output(out, "plan.csv");
        write_trajectory_csv(os, Trajectory(res.u, res.y));
    }
    s.check("solver reached an optimal plan", res.optimal());
    write_summary(s, out);
    return s;
}

// ---------------------------------------------------------------------------

const std::set<std::string>& experiment_keys(const std::string& experiment)
{
    static const std::set<std::string> common = {"experiment", "seed", "reps"};
    auto with = [](std::set<std::string> base, std::initializer_list<std::string> extra) {
        base.insert(extra.begin(), extra.end());
        return base;
    };
    auto with_quad = [&](std::initializer_list<std::string> extra) {
        std::set<std::string> base = with(common, extra);
        base.insert(QuadSetup::config_keys().begin(), QuadSetup::config_keys().end());
        return base;
    };
    static const std::set<std::string> equivalence =
        with(common, {"max_order", "max_io", "horizon", "steps", "u_bound", "y_bound", "extra_samples", "tolerance",
                      "reference_amplitude", "qp.method"});
    static const std::set<std::string> step_stats =
        with_quad({"steps", "step_time", "step_size", "win_fraction"});
    static const std::set<std::string> sweep =
        with_quad({"lambda_g_grid", "lambda_y_grid", "fixed_lambda_y", "fixed_lambda_g", "sweep_lambda_g",
                   "sweep_lambda_y", "best_lambda_g_min", "best_lambda_g_max", "steps", "step_time", "step_size"});
    static const std::set<std::string> figure8 = with_quad({"steps", "amplitude", "period", "height"});
    static const std::set<std::string> collect = with_quad({"system_file", "input_amplitude"});
    static const std::set<std::string> solve =
        with(common, {"method", "horizon", "t_ini", "system_file", "m", "p", "q_diag", "r_diag", "u_min", "u_max",
                      "y_min", "y_max", "lambda_g", "lambda_y", "reference", "x0", "ini_file", "data_file",
                      "qp.method"});
    if (experiment == "equivalence") return equivalence;
    if (experiment == "step-stats") return step_stats;
    if (experiment == "reg-sweep") return sweep;
    if (experiment == "figure8") return figure8;
    if (experiment == "collect") return collect;
    if (experiment == "solve") return solve;
    throw ParseError("unknown experiment '" + experiment + "'");
}

} // namespace deepc::bench
