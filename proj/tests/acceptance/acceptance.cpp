// Acceptance suite: re-derives every checkable constant of the worked example
// and exercises the full pipeline, one criterion per run block. Exits nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "rimpact/commands.hpp"
#include "rimpact/flow.hpp"
#include "rimpact/io.hpp"
#include "rimpact/mountain.hpp"
#include "rimpact/rng.hpp"
#include "rimpact/verify.hpp"

using namespace rimpact;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void run(const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s — %s (%s) [%.2fs]\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

constexpr double kPi = 3.14159265358979323846;

std::vector<SampleOrbit> three_impulse_orbits() {
    ImpulseSpec spec;
    spec.horizon = 1.0;
    spec.dimension = 2;
    spec.intervals.kind = IntervalBounds::Kind::explicit_list;
    spec.intervals.values = {0.3, 0.25, 0.2};
    spec.tau.kind = TauKind::point_mass;
    spec.tau.fraction = 0.5;
    spec.jumps.kind = JumpCoeffs::Kind::explicit_list;
    spec.jumps.values = {0.3, 0.2, 0.1};
    return {sample_orbit(spec, 1)};
}

bool same_file_bytes(const fs::path& a, const fs::path& b, std::string& detail) {
    if (!fs::exists(a) || !fs::exists(b)) {
        detail = "missing output " + a.filename().string();
        return false;
    }
    if (read_text_file(a.string()) != read_text_file(b.string())) {
        detail = "byte mismatch in " + a.filename().string();
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli_path;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli_path = argv[i + 1];

    run("worked-example constants", [](std::string& detail) {
        const HamiltonianSpec h = HamiltonianSpec::power_law(1.0, 10.0);
        const double alpha_star = h.alpha_star();
        const double p = h.p();
        const double conjugacy = std::abs(1.0 / p + 1.0 / h.q - 1.0);
        const Scenario s = builtin_scenario("example-4.1");
        const double bound = analytic_B_bound(s.impulse_spec());
        detail = "alpha* = " + fmt17(alpha_star) + ", |1/p + 1/q - 1| = " + fmt17(conjugacy) +
                 ", bound = " + fmt17(bound);
        return alpha_star >= 0.6955 && alpha_star <= 0.6975 && conjugacy <= 1e-15 &&
               bound == 4.0 / 9.0;
    });

    run("impulse process: 1e5 orbits stay below t = 1 and strictly increase",
        [](std::string& detail) {
            const ImpulseSpec spec = builtin_scenario("example-4.1").impulse_spec();
            long violations = 0;
            long impulses = 0;
            for (std::uint64_t i = 0; i < 100000; ++i) {
                const SampleOrbit orbit = sample_orbit(spec, 424242, i);
                double prev = 0.0;
                for (int j = 0; j < orbit.size(); ++j) {
                    const double xi = orbit.times[static_cast<std::size_t>(j)];
                    if (!(xi < 1.0) || !(xi > prev)) ++violations;
                    prev = xi;
                    ++impulses;
                }
            }
            detail = std::to_string(impulses) + " impulses, " + std::to_string(violations) +
                     " violations";
            return violations == 0;
        });

    run("B Monte Carlo within 3 stderr of 4/49 and below 4/9", [](std::string& detail) {
        const ImpulseSpec spec = builtin_scenario("example-4.1").impulse_spec();
        const BEstimate est = estimate_B(spec, 100000, 424242);
        const double target = 4.0 / 49.0;
        detail = "mean = " + fmt17(est.mc_mean) + ", stderr = " + fmt17(est.mc_stderr);
        return std::abs(est.mc_mean - target) <= 3.0 * est.mc_stderr &&
               est.mc_mean <= 4.0 / 9.0;
    });

    run("period law pi/5 r^-8 at radii 0.8, 1.0, 1.2", [](std::string& detail) {
        const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 10.0);
        double worst = 0.0;
        for (double r : {0.8, 1.0, 1.2}) {
            const double analytic = kPi / 5.0 * std::pow(r, -8.0);
            const double measured = first_return_time(spec, r);
            worst = std::max(worst, std::abs(measured - analytic) / analytic);
        }
        detail = "worst relative error = " + fmt17(worst);
        return worst <= 1e-4;
    });

    run("legendre duality: round trip, Fenchel-Young, five slacks", [](std::string& detail) {
        Rng rng(2026, 0);
        double worst_rt = 0.0;
        double worst_fy = 0.0;
        for (double q : {4.0, 10.0}) {
            const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, q);
            for (int i = 0; i < 1000; ++i) {
                Vec u(2);
                for (double& x : u) x = rng.normal();
                const double radius = std::exp(rng.uniform(std::log(0.1), std::log(2.0)));
                scale_inplace(u, radius / norm2(u));
                const Vec v = h_grad_copy(spec, 0.0, u);
                const Vec back = legendre_grad_copy(spec, 0.0, v);
                for (int c = 0; c < 2; ++c)
                    worst_rt = std::max(worst_rt,
                                        std::abs(back[static_cast<std::size_t>(c)] -
                                                 u[static_cast<std::size_t>(c)]) /
                                            radius);
                const double fy = dot(v, u) -
                                  (h_value(spec, 0.0, u) + legendre_value(spec, 0.0, v));
                worst_fy =
                    std::max(worst_fy, std::abs(fy) / std::max(1.0, std::abs(dot(v, u))));
            }
        }
        double min_slack = 1e300;
        for (double q : {4.0, 10.0}) {
            const DualityReport report =
                check_duality_inequalities(HamiltonianSpec::power_law(1.0, q), 10000, 7);
            min_slack = std::min(min_slack, report.min_slack());
        }
        detail = "round trip " + fmt17(worst_rt) + ", Fenchel-Young " + fmt17(worst_fy) +
                 ", min slack " + fmt17(min_slack);
        return worst_rt <= 1e-8 && worst_fy <= 1e-8 && min_slack >= -1e-10;
    });

    run("derivative pairing matches central differences of chi", [](std::string& detail) {
        Rng rng(31, 0);
        const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 10.0);
        GridSpec grid;
        grid.base_nodes = 65;
        double worst = 0.0;
        for (const bool with_impulses : {false, true}) {
            std::vector<SampleOrbit> orbits;
            if (with_impulses) {
                orbits = three_impulse_orbits();
            } else {
                SampleOrbit empty;
                empty.horizon = 1.0;
                orbits = {empty};
            }
            EnsembleProcess v = make_ensemble(grid, 1.0, 2, orbits);
            fill_random_sines(v, 5, rng);
            for (int k = 0; k < 20; ++k) {
                EnsembleProcess h = make_ensemble(grid, 1.0, 2, orbits);
                fill_random_sines(h, 5, rng);
                const double pairing = chi_pairing(v, h, spec, orbits);
                const double eps = 1e-4;
                const double fd = (chi_value(sum(v, scaled(h, eps)), spec, orbits) -
                                   chi_value(sum(v, scaled(h, -eps)), spec, orbits)) /
                                  (2.0 * eps);
                worst = std::max(worst,
                                 std::abs(pairing - fd) / std::max(1.0, std::abs(fd)));
            }
        }
        detail = "worst relative mismatch = " + fmt17(worst);
        return worst <= 1e-5;
    });

    run("expectation Cauchy-Schwarz over 1e3 random ensembles", [](std::string& detail) {
        Rng rng(47, 0);
        GridSpec grid;
        grid.base_nodes = 17;
        SampleOrbit empty;
        empty.horizon = 1.0;
        const std::vector<SampleOrbit> orbits(8, empty);
        double min_slack = 1e300;
        for (int trial = 0; trial < 1000; ++trial) {
            EnsembleProcess x = make_ensemble(grid, 1.0, 2, orbits);
            EnsembleProcess y = x;
            for (OrbitPath& path : x.orbits)
                for (double& v : path.values) v = rng.normal();
            for (OrbitPath& path : y.orbits)
                for (double& v : path.values) v = rng.normal();
            min_slack = std::min(min_slack, expectation_cs_min_slack(x, y));
        }
        detail = "min slack = " + fmt17(min_slack);
        return min_slack >= -1e-12;
    });

    run("hypothesis gate: worked example passes, ten-fold jumps fail",
        [](std::string& detail) {
            Scenario ok = builtin_scenario("example-4.1");
            ok.ensemble.n_orbits = 2000;
            const HypothesisReport report = verify_hypotheses(ok, 20000, ok.ensemble.seed);
            const fs::path dir = fs::temp_directory_path() / "rimpact_acc_hyp";
            fs::remove_all(dir);
            const int code_ok = cmd_hypotheses(ok, dir.string());
            Scenario bad = builtin_scenario("example-4.1-jumps10");
            bad.ensemble.n_orbits = 2000;
            const int code_bad = cmd_hypotheses(bad, (dir / "bad").string());
            fs::remove_all(dir);
            detail = "condition_value = " + fmt17(report.condition_value);
            return report.all_pass() && report.condition_value >= 0.08 &&
                   code_ok == kExitOk && code_bad == kExitHypothesisFailure;
        });

    run("mountain-pass geometry on the fixed worked-example orbit", [](std::string& detail) {
        const Scenario scenario = builtin_scenario("example-4.1-fixed");
        const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
        const KEstimate k =
            estimate_K(scenario.grid, TrialFamily::mixed, scenario.solver.k_trials,
                       scenario.ensemble.seed, scenario.horizon, scenario.dim,
                       scenario.solver.k_safety);
        const GeometryRecord rec =
            mountain_pass_geometry(scenario, k, orbits, 4.0 / 9.0, scenario.ensemble.seed);
        bool decreasing = rec.v1_negative;
        double prev = rec.chi_at_v1;
        double e_norm = rec.e_norm_used;
        for (int i = 0; i < 3 && decreasing; ++i) {
            e_norm *= 2.0;
            const double next = chi_of_loop(scenario, orbits, e_norm);
            decreasing = next < prev;
            prev = next;
        }
        detail = "rho = " + fmt17(rec.rho) + ", rim min = " + fmt17(rec.rim_min_chi) +
                 ", chi(v1) = " + fmt17(rec.chi_at_v1) + " at |e| = " + fmt17(rec.e_norm_used);
        return rec.chi_at_zero == 0.0 && rec.rim_samples >= 200 && rec.rim_min_chi > 0.0 &&
               rec.v1_negative && decreasing;
    });

    run("solver oracle: quadratic scenario against the direct stationarity solve",
        [](std::string& detail) {
            const Scenario scenario = builtin_scenario("quadratic-small-T");
            const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
            const MountainPassResult result = find_critical_point(scenario);
            if (!result.converged || result.gradient_norm >= 1e-6) {
                detail = "gradient_norm = " + fmt17(result.gradient_norm);
                return false;
            }
            const EnsembleProcess v_direct = oracles::solve_stationarity(scenario, orbits);
            const double v_dist = pc_norm(difference(result.v_star, v_direct));
            const RecoveredU rec = recover_u(result.v_star, scenario.hamiltonian);
            const RecoveredU rec_direct = recover_u(v_direct, scenario.hamiltonian);
            const double u_dist =
                pc_norm(difference(rec.u_from_conjugate, rec_direct.u_from_conjugate));
            const ResidualReport res =
                residuals(rec.u_from_conjugate, scenario, orbits, &result.v_star);
            detail = "gradient_norm = " + fmt17(result.gradient_norm) +
                     ", |v - v_direct|_PC = " + fmt17(v_dist) +
                     ", |u - u_direct|_PC = " + fmt17(u_dist);
            return v_dist <= 1e-4 && u_dist <= 1e-4 && res.pass(scenario.tolerances);
        });

    run("theorem 2.7 consistency at the converged solution", [](std::string& detail) {
        const Scenario scenario = builtin_scenario("quadratic-small-T");
        const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
        const MountainPassResult result = find_critical_point(scenario);
        if (!result.converged) {
            detail = "solver did not converge";
            return false;
        }
        const double battery =
            pairing_battery(result.v_star, scenario, orbits, 16, scenario.ensemble.seed);
        const RecoveredU rec = recover_u(result.v_star, scenario.hamiltonian);
        EnsembleProcess perturbed = result.v_star;
        EnsembleProcess mode =
            make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
        fill_from_function(
            mode,
            [&](double t, std::span<double> out) {
                out[0] = 0.1 * std::sin(kPi * t / scenario.horizon);
                out[1] = 0.0;
            },
            true);
        add_scaled(perturbed, 1.0, mode);
        const double perturbed_battery =
            pairing_battery(perturbed, scenario, orbits, 16, scenario.ensemble.seed);
        detail = "battery = " + fmt17(battery) + ", recover distance = " +
                 fmt17(rec.pc_distance) + ", perturbed battery = " + fmt17(perturbed_battery);
        return battery < 10.0 * scenario.solver.gtol && rec.pc_distance < 1e-3 &&
               perturbed_battery >= 10.0 * battery;
    });

    run("determinism: fixed seeds give byte-identical primary outputs",
        [&cli_path](std::string& detail) {
            if (cli_path.empty() || !fs::exists(cli_path)) {
                detail = "cli binary not supplied (--cli)";
                return false;
            }
            const fs::path base = fs::temp_directory_path() / "rimpact_acc_det";
            fs::remove_all(base);
            fs::create_directories(base);
            const std::string q = "'" + cli_path + "'";
            const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
                {"simulate --config example-4.1 --orbits 200",
                 {"orbits.csv", "paths.csv", "B.json"}},
                {"hypotheses --config example-4.1 --orbits 500", {"hypotheses.json"}},
                {"geometry --config example-4.1-fixed", {"geometry.json", "rim.csv"}},
                {"solve --config quadratic-small-T --force",
                 {"convergence.csv", "solution.csv", "residuals.json", "mountain.json"}},
            };
            for (const auto& [args, files] : runs) {
                for (const char* tag : {"a", "b"}) {
                    const fs::path out = base / (args.substr(0, args.find(' ')) + tag);
                    const std::string cmd =
                        q + " " + args + " --out '" + out.string() + "' > /dev/null 2>&1";
                    const int rc = std::system(cmd.c_str());
                    (void)rc;
                }
                const fs::path a = base / (args.substr(0, args.find(' ')) + "a");
                const fs::path b = base / (args.substr(0, args.find(' ')) + "b");
                for (const std::string& file : files) {
                    if (!same_file_bytes(a / file, b / file, detail)) return false;
                }
            }
            fs::remove_all(base);
            detail = "4 commands, each run twice";
            return true;
        });

    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "OK" : "FAILED", failures);
    return failures == 0 ? 0 : 1;
}
