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
#include "CLI11.hpp"

#include "deepc/bench/experiments.hpp"

#include <iostream>

using namespace deepc;
using namespace deepc::bench;

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    Index reps = 0;
    bool timing = false;
    bool quiet = false;
};

Summary run(const std::string& experiment, const Flags& flags, CLI::App& app)
{
    Config cfg;
    if (!flags.config.empty()) cfg = Config::load(flags.config);
    cfg.require_known(experiment_keys(experiment));
    if (cfg.has("experiment") && cfg.get_string("experiment", "") != experiment) {
        throw ParseError("config is for experiment '" + cfg.get_string("experiment", "") + "'");
    }
    RunOptions opts;
    if (app.count("--seed") > 0) opts.seed = flags.seed;
    if (app.count("--reps") > 0) opts.reps = flags.reps;
    opts.timing = flags.timing;
    opts.log = flags.quiet ? nullptr : &std::cerr;
    const std::filesystem::path out = flags.out.empty() ? std::filesystem::path("out") / experiment : std::filesystem::path(flags.out);

    if (experiment == "equivalence")
        return write_equivalence(run_equivalence(EquivalenceSettings::from_config(cfg, opts), opts.log), out);
    if (experiment == "step-stats")
        return write_step_stats(run_step_stats(StepStatsSettings::from_config(cfg, opts), opts.log), out);
    if (experiment == "reg-sweep")
        return write_reg_sweep(run_reg_sweep(SweepSettings::from_config(cfg, opts), opts.log), out);
    if (experiment == "figure8")
        return write_figure8(run_figure8(Figure8Settings::from_config(cfg, opts), opts.log), out);
    if (experiment == "collect") return cmd_collect(cfg, opts, out);
    return cmd_solve(cfg, opts, out);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"DeePC and MPC experiment harness"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"equivalence", "closed-loop MPC and DeePC on random LTI systems"},
        {"figure8", "quadrotor figure-eight tracking, DeePC against ID+MPC"},
        {"step-stats", "repeated quadrotor step responses, DeePC against ID+MPC"},
        {"reg-sweep", "regularization weight sweep for DeePC on the quadrotor"},
        {"collect", "data generation only"},
        {"solve", "single open-loop solve from files"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "master seed");
        sub->add_option("--out", flags.out, "output directory (default out/<command>)");
        sub->add_option("--reps", flags.reps, "repetitions")->check(CLI::PositiveNumber);
        sub->add_flag("--timing", flags.timing, "record wall-clock solve times");
        sub->add_flag("--quiet", flags.quiet, "no progress lines");
    }
    CLI11_PARSE(app, argc, argv);

    CLI::App* chosen = app.get_subcommands().front();
    try {
        const Summary summary = run(chosen->get_name(), flags, *chosen);
        summary.write(std::cout);
        return summary.pass() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
