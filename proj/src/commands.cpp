#include "rimpact/commands.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rimpact/action.hpp"
#include "rimpact/flow.hpp"
#include "rimpact/io.hpp"
#include "rimpact/mountain.hpp"
#include "rimpact/verify.hpp"

namespace rimpact {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string side_name(NodeSide side) {
    switch (side) {
        case NodeSide::interior: return "interior";
        case NodeSide::left: return "left";
        case NodeSide::right: return "right";
    }
    return "interior";
}

void ensure_dir(const std::string& out_dir) {
    fs::create_directories(out_dir);
}

std::string join(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

json hypotheses_json(const HypothesisReport& report) {
    json j;
    j["B_estimate"] = {{"mc_mean", report.b_estimate.mc_mean},
                       {"mc_stderr", report.b_estimate.mc_stderr},
                       {"n_orbits", report.b_estimate.n_orbits}};
    j["B_bound_available"] = report.b_bound_available;
    j["B_bound"] = report.b_bound;
    j["B_used"] = report.b_used;
    j["exponents_available"] = report.exponents_available;
    j["alpha"] = report.alpha;
    j["q"] = report.q;
    j["p"] = report.p;
    j["alpha_star"] = report.alpha_star;
    j["H2_min_slack"] = report.h2_min_slack;
    j["H3_min_slack"] = report.h3_min_slack;
    j["condition_value"] = report.condition_value;
    j["pass"] = {{"H1", report.pass_h1},
                 {"H2", report.pass_h2},
                 {"H3", report.pass_h3},
                 {"condition", report.pass_condition},
                 {"all", report.all_pass()}};
    j["samples"] = report.samples;
    return j;
}

json geometry_json(const GeometryRecord& rec) {
    json j;
    j["k_lower"] = rec.k_lower;
    j["k_working"] = rec.k_working;
    j["rho"] = rec.rho;
    j["B_used"] = rec.b_used;
    j["rim_bound"] = rec.rim_bound;
    j["rim_min_chi"] = rec.rim_min_chi;
    j["rim_samples"] = rec.rim_samples;
    j["chi_at_zero"] = rec.chi_at_zero;
    j["e_norm_used"] = rec.e_norm_used;
    j["chi_at_v1"] = rec.chi_at_v1;
    j["v1_negative"] = rec.v1_negative;
    j["paper_loop_integral"] = rec.paper_loop_integral;
    j["ok"] = rec.ok;
    j["note"] = rec.note;
    return j;
}

json residuals_json(const ResidualReport& report, const Tolerances& tol) {
    json j;
    j["ode_residual_sup"] = report.ode_residual_sup;
    j["jump_residual_max"] = report.jump_residual_max;
    j["boundary_residual"] = report.boundary_residual;
    j["pairing_evaluated"] = report.pairing_evaluated;
    j["pairing_max"] = report.pairing_max;
    j["thresholds"] = {{"ode", tol.ode},
                       {"jump", tol.jump},
                       {"boundary", tol.boundary},
                       {"pairing", tol.pairing}};
    j["pass"] = report.pass(tol);
    json per_orbit = json::array();
    for (const auto& jumps : report.jump_residuals) per_orbit.push_back(jumps);
    j["jump_residuals"] = per_orbit;
    return j;
}

void write_json(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

}  // namespace

Scenario apply_overrides(Scenario scenario, const CommandOverrides& overrides) {
    if (overrides.seed) scenario.ensemble.seed = *overrides.seed;
    if (overrides.n_orbits) scenario.ensemble.n_orbits = *overrides.n_orbits;
    if (overrides.gtol) scenario.solver.gtol = *overrides.gtol;
    scenario.validate();
    return scenario;
}

int cmd_simulate(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();
    ensure_dir(out_dir);
    const ImpulseSpec impulses = scenario.impulse_spec();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();

    CsvWriter orbits_csv({"orbit_id", "j", "xi", "tau", "jump_norm"});
    for (std::size_t o = 0; o < orbits.size(); ++o) {
        for (int j = 0; j < orbits[o].size(); ++j) {
            orbits_csv.row({std::to_string(o), std::to_string(j + 1),
                            fmt17(orbits[o].times[static_cast<std::size_t>(j)]),
                            fmt17(orbits[o].draws[static_cast<std::size_t>(j)]),
                            fmt17(norm2(orbits[o].jumps[static_cast<std::size_t>(j)]))});
        }
    }
    write_text_file(join(out_dir, "orbits.csv"), orbits_csv.text());

    const Vec u0(static_cast<std::size_t>(scenario.dim), 0.0);
    EnsembleProcess propagated;
    propagated.horizon = scenario.horizon;
    propagated.dim = scenario.dim;
    for (std::size_t o = 0; o < orbits.size(); ++o) {
        PiecewisePath path = propagate_orbit(scenario.hamiltonian, u0, orbits[o],
                                             scenario.grid, scenario.tolerances.integrator);
        propagated.orbits.push_back(std::move(path.path));
    }
    write_text_file(join(out_dir, "paths.csv"), ensemble_to_csv(propagated, "u"));

    const BEstimate b = estimate_B(impulses, scenario.ensemble.n_orbits, scenario.ensemble.seed);
    json bj;
    bj["mc_mean"] = b.mc_mean;
    bj["mc_stderr"] = b.mc_stderr;
    bj["n_orbits"] = b.n_orbits;
    bj["bound_available"] = analytic_B_bound_available(impulses);
    if (analytic_B_bound_available(impulses)) bj["analytic_bound"] = analytic_B_bound(impulses);
    write_json(join(out_dir, "B.json"), bj);
    return kExitOk;
}

int cmd_hypotheses(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();
    ensure_dir(out_dir);
    const HypothesisReport report = verify_hypotheses(scenario, 20000, scenario.ensemble.seed);
    write_json(join(out_dir, "hypotheses.json"), hypotheses_json(report));
    std::cout << (report.all_pass() ? "hypotheses: pass" : "hypotheses: FAIL")
              << " (condition_value = " << fmt17(report.condition_value) << ")\n";
    return report.all_pass() ? kExitOk : kExitHypothesisFailure;
}

int cmd_geometry(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();
    ensure_dir(out_dir);
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const KEstimate k =
        estimate_K(scenario.grid, TrialFamily::mixed, scenario.solver.k_trials,
                   scenario.ensemble.seed, scenario.horizon, scenario.dim,
                   scenario.solver.k_safety);
    const ImpulseSpec impulses = scenario.impulse_spec();
    double b_used;
    if (analytic_B_bound_available(impulses)) {
        b_used = analytic_B_bound(impulses);
    } else {
        const BEstimate b =
            estimate_B(impulses, scenario.ensemble.n_orbits, scenario.ensemble.seed);
        b_used = b.mc_mean + 3.0 * b.mc_stderr;
    }
    const GeometryRecord rec =
        mountain_pass_geometry(scenario, k, orbits, b_used, scenario.ensemble.seed);
    write_json(join(out_dir, "geometry.json"), geometry_json(rec));
    CsvWriter rim({"sample", "chi"});
    for (std::size_t i = 0; i < rec.rim_chi.size(); ++i)
        rim.row({std::to_string(i), fmt17(rec.rim_chi[i])});
    write_text_file(join(out_dir, "rim.csv"), rim.text());
    std::cout << "geometry: rho = " << fmt17(rec.rho)
              << ", rim_min_chi = " << fmt17(rec.rim_min_chi)
              << ", chi(v1) = " << fmt17(rec.chi_at_v1) << "\n";
    return rec.ok ? kExitOk : kExitNonConvergence;
}

int cmd_solve(const Scenario& scenario, const std::string& out_dir, bool force) {
    scenario.validate();
    ensure_dir(out_dir);

    const HypothesisReport hypotheses =
        verify_hypotheses(scenario, 20000, scenario.ensemble.seed);
    write_json(join(out_dir, "hypotheses.json"), hypotheses_json(hypotheses));
    if (!hypotheses.all_pass()) {
        if (!force) {
            std::cerr << "hypotheses failed; rerun with --force to solve anyway\n";
            return kExitHypothesisFailure;
        }
        std::cout << "hypotheses failed; continuing under --force\n";
    }

    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    GeometryRecord geometry;
    if (hypotheses.exponents_available) {
        const KEstimate k =
            estimate_K(scenario.grid, TrialFamily::mixed, scenario.solver.k_trials,
                       scenario.ensemble.seed, scenario.horizon, scenario.dim,
                       scenario.solver.k_safety);
        geometry = mountain_pass_geometry(scenario, k, orbits, hypotheses.b_used,
                                          scenario.ensemble.seed);
    } else {
        geometry.ok = false;
        geometry.note = "geometry skipped: no growth exponents";
        geometry.e_norm_used = 1.0;
    }
    write_json(join(out_dir, "geometry.json"), geometry_json(geometry));

    const MountainPassResult result = find_critical_point(scenario, geometry, orbits);

    CsvWriter conv({"orbit_id", "phase", "iteration", "chi"});
    for (std::size_t o = 0; o < result.traces.size(); ++o) {
        for (const auto& [it, chi] : result.traces[o].path_history)
            conv.row({std::to_string(o), "path", std::to_string(it), fmt17(chi)});
        for (const auto& [it, chi] : result.traces[o].refine_history)
            conv.row({std::to_string(o), "refine", std::to_string(it), fmt17(chi)});
    }
    write_text_file(join(out_dir, "convergence.csv"), conv.text());

    const RecoveredU recovered = recover_u(result.v_star, scenario.hamiltonian);

    std::vector<std::string> header = {"orbit_id", "t", "side"};
    for (int c = 1; c <= scenario.dim; ++c) header.push_back("v" + std::to_string(c));
    for (int c = 1; c <= scenario.dim; ++c) header.push_back("uj" + std::to_string(c));
    for (int c = 1; c <= scenario.dim; ++c) header.push_back("uc" + std::to_string(c));
    CsvWriter sol(header);
    for (int o = 0; o < result.v_star.n_orbits(); ++o) {
        const OrbitPath& vp = result.v_star.orbits[static_cast<std::size_t>(o)];
        const OrbitPath& ujp = recovered.u_from_v.orbits[static_cast<std::size_t>(o)];
        const OrbitPath& ucp = recovered.u_from_conjugate.orbits[static_cast<std::size_t>(o)];
        for (int i = 0; i < vp.grid.node_count(); ++i) {
            std::vector<std::string> cells = {
                std::to_string(o), fmt17(vp.grid.times[static_cast<std::size_t>(i)]),
                side_name(vp.grid.sides[static_cast<std::size_t>(i)])};
            for (int c = 0; c < scenario.dim; ++c)
                cells.push_back(fmt17(vp.node(i)[static_cast<std::size_t>(c)]));
            for (int c = 0; c < scenario.dim; ++c)
                cells.push_back(fmt17(ujp.node(i)[static_cast<std::size_t>(c)]));
            for (int c = 0; c < scenario.dim; ++c)
                cells.push_back(fmt17(ucp.node(i)[static_cast<std::size_t>(c)]));
            sol.row(cells);
        }
    }
    write_text_file(join(out_dir, "solution.csv"), sol.text());

    const ResidualReport res = residuals(recovered.u_from_conjugate, scenario, orbits,
                                         &result.v_star, 16, scenario.ensemble.seed);
    write_json(join(out_dir, "residuals.json"), residuals_json(res, scenario.tolerances));

    const ChiReport final_chi = chi(result.v_star, scenario.hamiltonian, orbits, true);
    CsvWriter terms({"orbit_id", "chi", "term_symplectic", "term_conjugate", "term_impulse"});
    for (std::size_t o = 0; o < orbits.size(); ++o) {
        EnsembleProcess single;
        single.horizon = scenario.horizon;
        single.dim = scenario.dim;
        single.orbits.push_back(result.v_star.orbits[o]);
        const ChiReport r =
            chi(single, scenario.hamiltonian,
                std::span<const SampleOrbit>(&orbits[o], 1));
        terms.row({std::to_string(o), fmt17(r.chi_value), fmt17(r.term_symplectic),
                   fmt17(r.term_conjugate), fmt17(r.term_impulse)});
    }
    write_text_file(join(out_dir, "chi_terms.csv"), terms.text());

    json mj;
    mj["chi_report"] = {{"chi_value", final_chi.chi_value},
                        {"term_symplectic", final_chi.term_symplectic},
                        {"term_conjugate", final_chi.term_conjugate},
                        {"term_impulse", final_chi.term_impulse},
                        {"riesz_gradient_norm", final_chi.gradient_norm}};
    mj["minimax_level"] = result.minimax_level;
    mj["chi_at_vstar"] = result.chi_at_vstar;
    mj["chi_at_v1"] = result.chi_at_v1;
    mj["gradient_norm"] = result.gradient_norm;
    mj["gtol"] = scenario.solver.gtol;
    mj["iterations"] = result.iterations;
    mj["converged"] = result.converged;
    mj["pass_level_dominates"] = result.pass_level_dominates;
    mj["recover_u_distance"] = recovered.pc_distance;
    write_json(join(out_dir, "mountain.json"), mj);

    std::cout << "solve: chi(v*) = " << fmt17(result.chi_at_vstar)
              << ", gradient_norm = " << fmt17(result.gradient_norm)
              << (result.converged ? " (converged)" : " (NOT converged)") << "\n";
    const bool ok = result.converged && res.pass(scenario.tolerances);
    return ok ? kExitOk : kExitNonConvergence;
}

int cmd_verify(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();
    const std::string path = join(out_dir, "solution.csv");
    if (!fs::exists(path)) {
        std::cerr << "verify: missing " << path << " (run solve first)\n";
        return kExitConfig;
    }
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    EnsembleProcess v = make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
    v.dirichlet = true;

    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) return kExitConfig;
    long row = 0;
    long expected = 0;
    for (const OrbitPath& p : v.orbits) expected += p.grid.node_count();
    std::vector<std::pair<int, int>> index;  // (orbit, node) in write order
    for (int o = 0; o < v.n_orbits(); ++o)
        for (int i = 0; i < v.orbits[static_cast<std::size_t>(o)].grid.node_count(); ++i)
            index.emplace_back(o, i);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (row >= expected || cells.size() < static_cast<std::size_t>(3 + scenario.dim)) {
            std::cerr << "verify: solution.csv does not match the scenario grid\n";
            return kExitConfig;
        }
        const auto [o, i] = index[static_cast<std::size_t>(row)];
        OrbitPath& p = v.orbits[static_cast<std::size_t>(o)];
        const double t = std::stod(cells[1]);
        if (t != p.grid.times[static_cast<std::size_t>(i)]) {
            std::cerr << "verify: node time mismatch at row " << row + 2 << "\n";
            return kExitConfig;
        }
        for (int c = 0; c < scenario.dim; ++c)
            p.node(i)[static_cast<std::size_t>(c)] = std::stod(cells[static_cast<std::size_t>(3 + c)]);
        ++row;
    }
    if (row != expected) {
        std::cerr << "verify: solution.csv row count mismatch\n";
        return kExitConfig;
    }

    const RecoveredU recovered = recover_u(v, scenario.hamiltonian);
    const ResidualReport res = residuals(recovered.u_from_conjugate, scenario, orbits, &v, 16,
                                         scenario.ensemble.seed);
    write_json(join(out_dir, "residuals.json"), residuals_json(res, scenario.tolerances));
    std::cout << "verify: pairing_max = " << fmt17(res.pairing_max)
              << ", ode_residual_sup = " << fmt17(res.ode_residual_sup) << "\n";
    return res.pass(scenario.tolerances) ? kExitOk : kExitNonConvergence;
}

int cmd_report(const std::string& out_dir) {
    if (!fs::exists(out_dir)) {
        std::cerr << "report: no such directory: " << out_dir << "\n";
        return kExitConfig;
    }
    json summary;
    bool any = false;
    for (const char* name : {"B.json", "hypotheses.json", "geometry.json", "residuals.json",
                             "mountain.json"}) {
        const std::string path = join(out_dir, name);
        if (!fs::exists(path)) continue;
        any = true;
        std::string key(name);
        key = key.substr(0, key.find('.'));
        summary[key] = json::parse(read_text_file(path));
    }

    const std::string conv_path = join(out_dir, "convergence.csv");
    if (fs::exists(conv_path)) {
        any = true;
        std::istringstream in(read_text_file(conv_path));
        std::string line;
        std::getline(in, line);
        std::string dat = "# iteration  max_chi  (per orbit blocks)\n";
        std::string last_orbit;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv_line(line);
            if (cells.size() != 4) continue;
            if (cells[0] != last_orbit && !last_orbit.empty()) dat += "\n";
            last_orbit = cells[0];
            dat += cells[2] + "  " + cells[3] + "\n";
        }
        write_text_file(join(out_dir, "chi_vs_iteration.dat"), dat);
    }

    const std::string rim_path = join(out_dir, "rim.csv");
    if (fs::exists(rim_path)) {
        any = true;
        std::istringstream in(read_text_file(rim_path));
        std::string line;
        std::getline(in, line);
        std::string dat = "# sample  chi\n";
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv_line(line);
            if (cells.size() == 2) dat += cells[0] + "  " + cells[1] + "\n";
        }
        write_text_file(join(out_dir, "rim_scatter.dat"), dat);
    }

    for (const char* csv_name : {"paths.csv", "solution.csv"}) {
        const std::string p = join(out_dir, csv_name);
        if (!fs::exists(p)) continue;
        any = true;
        std::istringstream in(read_text_file(p));
        std::string line;
        std::getline(in, line);
        std::string dat = "# t  values...  (per orbit blocks)\n";
        std::string last_orbit;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv_line(line);
            if (cells.size() < 4) continue;
            if (cells[0] != last_orbit && !last_orbit.empty()) dat += "\n";
            last_orbit = cells[0];
            dat += cells[1];
            for (std::size_t c = 3; c < cells.size(); ++c) dat += "  " + cells[c];
            dat += "\n";
        }
        const std::string base = std::string(csv_name) == "paths.csv" ? "orbit_paths.dat"
                                                                      : "solution_paths.dat";
        write_text_file(join(out_dir, base), dat);
    }

    if (!any) {
        std::cerr << "report: no artifacts found in " << out_dir << "\n";
        return kExitConfig;
    }
    write_json(join(out_dir, "summary.json"), summary);
    std::cout << "report: wrote summary.json\n";
    return kExitOk;
}

}  // namespace rimpact
