#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rimpact/commands.hpp"

namespace {

struct CommonArgs {
    std::string config = "example-4.1";
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int n_orbits = 0;
    bool orbits_set = false;
    double gtol = 0.0;
    bool gtol_set = false;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_force = false) {
    cmd->add_option("--config", args.config,
                    "builtin scenario name or path to a JSON config");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the ensemble seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--orbits", args.n_orbits, "override the ensemble orbit count")
        ->each([&](const std::string&) { args.orbits_set = true; });
    cmd->add_option("--tol-gtol", args.gtol, "override the solver gradient tolerance")
        ->each([&](const std::string&) { args.gtol_set = true; });
    if (with_force) cmd->add_flag("--force", args.force, "run even if preconditions fail");
}

rimpact::Scenario make_scenario(const CommonArgs& args) {
    rimpact::CommandOverrides overrides;
    if (args.seed_set) overrides.seed = args.seed;
    if (args.orbits_set) overrides.n_orbits = args.n_orbits;
    if (args.gtol_set) overrides.gtol = args.gtol;
    return rimpact::apply_overrides(rimpact::resolve_scenario(args.config), overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical toolkit for random-impulse Hamiltonian boundary value problems"};
    app.require_subcommand(1);

    CommonArgs sim_args, hyp_args, geo_args, solve_args, verify_args;
    std::string report_dir = "out";

    CLI::App* sim = app.add_subcommand("simulate", "sample orbits, propagate paths, estimate B");
    add_common(sim, sim_args);
    CLI::App* hyp = app.add_subcommand("hypotheses", "check (H1)-(H3) and the size condition");
    add_common(hyp, hyp_args);
    CLI::App* geo = app.add_subcommand("geometry", "rim radius, rim sampling, descent loop");
    add_common(geo, geo_args);
    CLI::App* solve = app.add_subcommand("solve", "mountain-pass search and residual checks");
    add_common(solve, solve_args, true);
    CLI::App* verify = app.add_subcommand("verify", "re-check residuals of a stored solution");
    add_common(verify, verify_args);
    CLI::App* report = app.add_subcommand("report", "summarize artifacts into summary.json");
    report->add_option("--out", report_dir, "output directory with prior artifacts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return rimpact::cmd_simulate(make_scenario(sim_args), sim_args.out_dir);
        if (hyp->parsed())
            return rimpact::cmd_hypotheses(make_scenario(hyp_args), hyp_args.out_dir);
        if (geo->parsed()) return rimpact::cmd_geometry(make_scenario(geo_args), geo_args.out_dir);
        if (solve->parsed())
            return rimpact::cmd_solve(make_scenario(solve_args), solve_args.out_dir,
                                      solve_args.force);
        if (verify->parsed())
            return rimpact::cmd_verify(make_scenario(verify_args), verify_args.out_dir);
        if (report->parsed()) return rimpact::cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rimpact::kExitConfig;
    }
    return rimpact::kExitConfig;
}
