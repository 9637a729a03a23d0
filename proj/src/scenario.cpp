#include "rimpact/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rimpact {

namespace {

using nlohmann::json;

void expect_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw std::invalid_argument(std::string("config: ") + where + " must be an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            throw std::invalid_argument(std::string("config: unknown key '") + item.key() +
                                        "' in " + where);
    }
}

json hamiltonian_to_json(const HamiltonianSpec& spec) {
    json j;
    if (spec.kind == HamiltonianSpec::Kind::power_law) {
        j["kind"] = "power_law";
        j["alpha"] = spec.alpha;
        j["q"] = spec.q;
    } else {
        j["kind"] = "builtin";
        j["name"] = spec.name;
        if (spec.has_certificate) {
            j["certificate"] = {{"alpha", spec.cert_alpha}, {"q", spec.cert_q}};
        }
    }
    return j;
}

HamiltonianSpec hamiltonian_from_json(const json& j) {
    expect_keys(j, "hamiltonian", {"kind", "alpha", "q", "name", "certificate"});
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "power_law") {
        return HamiltonianSpec::power_law(j.at("alpha").get<double>(), j.at("q").get<double>());
    }
    if (kind == "builtin") {
        HamiltonianSpec spec = HamiltonianSpec::builtin(j.at("name").get<std::string>());
        if (j.contains("certificate")) {
            expect_keys(j.at("certificate"), "hamiltonian.certificate", {"alpha", "q"});
            spec.has_certificate = true;
            spec.cert_alpha = j.at("certificate").at("alpha").get<double>();
            spec.cert_q = j.at("certificate").at("q").get<double>();
        }
        spec.validate();
        return spec;
    }
    throw std::invalid_argument("config: hamiltonian.kind must be power_law or builtin");
}

json impulses_to_json(const ImpulseSpec& spec) {
    json intervals;
    switch (spec.intervals.kind) {
        case IntervalBounds::Kind::none: intervals["kind"] = "none"; break;
        case IntervalBounds::Kind::geometric:
            intervals["kind"] = "geometric";
            intervals["first"] = spec.intervals.first;
            intervals["ratio"] = spec.intervals.ratio;
            break;
        case IntervalBounds::Kind::explicit_list:
            intervals["kind"] = "explicit";
            intervals["values"] = spec.intervals.values;
            break;
    }
    json tau;
    tau["kind"] = spec.tau.kind == TauKind::uniform ? "uniform" : "point_mass";
    if (spec.tau.kind == TauKind::point_mass) tau["fraction"] = spec.tau.fraction;
    json jumps;
    if (spec.jumps.kind == JumpCoeffs::Kind::poly_geometric) {
        jumps["kind"] = "poly_geometric";
        jumps["amplitude"] = spec.jumps.amplitude;
        jumps["geo"] = spec.jumps.geo;
        jumps["poly"] = spec.jumps.poly;
    } else {
        jumps["kind"] = "explicit";
        jumps["values"] = spec.jumps.values;
    }
    json j;
    j["intervals"] = intervals;
    j["tau"] = tau;
    j["jumps"] = jumps;
    j["direction"] = spec.direction.empty() ? spec.unit_direction() : spec.direction;
    j["max_impulses"] = spec.max_impulses;
    j["min_separation_rel"] = spec.min_separation_rel;
    return j;
}

ImpulseSpec impulses_from_json(const json& j, double horizon, int dim) {
    expect_keys(j, "impulses",
                {"intervals", "tau", "jumps", "direction", "max_impulses", "min_separation_rel"});
    ImpulseSpec spec;
    spec.horizon = horizon;
    spec.dimension = dim;

    const json& intervals = j.at("intervals");
    expect_keys(intervals, "impulses.intervals", {"kind", "first", "ratio", "values"});
    const std::string ikind = intervals.at("kind").get<std::string>();
    if (ikind == "none") {
        spec.intervals.kind = IntervalBounds::Kind::none;
    } else if (ikind == "geometric") {
        spec.intervals.kind = IntervalBounds::Kind::geometric;
        spec.intervals.first = intervals.at("first").get<double>();
        spec.intervals.ratio = intervals.at("ratio").get<double>();
    } else if (ikind == "explicit") {
        spec.intervals.kind = IntervalBounds::Kind::explicit_list;
        spec.intervals.values = intervals.at("values").get<std::vector<double>>();
    } else {
        throw std::invalid_argument("config: intervals.kind must be none|geometric|explicit");
    }

    if (j.contains("tau")) {
        const json& tau = j.at("tau");
        expect_keys(tau, "impulses.tau", {"kind", "fraction"});
        const std::string tkind = tau.at("kind").get<std::string>();
        if (tkind == "uniform") {
            spec.tau.kind = TauKind::uniform;
        } else if (tkind == "point_mass") {
            spec.tau.kind = TauKind::point_mass;
            spec.tau.fraction = tau.at("fraction").get<double>();
        } else {
            throw std::invalid_argument("config: tau.kind must be uniform|point_mass");
        }
    }

    if (j.contains("jumps")) {
        const json& jumps = j.at("jumps");
        expect_keys(jumps, "impulses.jumps", {"kind", "amplitude", "geo", "poly", "values"});
        const std::string jkind = jumps.at("kind").get<std::string>();
        if (jkind == "poly_geometric") {
            spec.jumps.kind = JumpCoeffs::Kind::poly_geometric;
            spec.jumps.amplitude = jumps.at("amplitude").get<double>();
            spec.jumps.geo = jumps.at("geo").get<double>();
            spec.jumps.poly = jumps.at("poly").get<int>();
        } else if (jkind == "explicit") {
            spec.jumps.kind = JumpCoeffs::Kind::explicit_list;
            spec.jumps.values = jumps.at("values").get<std::vector<double>>();
        } else {
            throw std::invalid_argument("config: jumps.kind must be poly_geometric|explicit");
        }
    }

    if (j.contains("direction")) spec.direction = j.at("direction").get<Vec>();
    if (j.contains("max_impulses")) spec.max_impulses = j.at("max_impulses").get<int>();
    if (j.contains("min_separation_rel"))
        spec.min_separation_rel = j.at("min_separation_rel").get<double>();
    spec.validate();
    return spec;
}

}  // namespace

void Scenario::validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("scenario: horizon must be > 0");
    if (dim < 2 || dim % 2 != 0)
        throw std::invalid_argument("scenario: dimension must be even and >= 2");
    hamiltonian.validate();
    impulse_spec().validate();
    grid.validate();
    if (ensemble.n_orbits < 1) throw std::invalid_argument("scenario: n_orbits must be >= 1");
    if (solver.path_nodes < 3) throw std::invalid_argument("scenario: path_nodes must be >= 3");
    if (!(solver.gtol > 0.0)) throw std::invalid_argument("scenario: gtol must be > 0");
    if (!(tolerances.integrator > 0.0))
        throw std::invalid_argument("scenario: integrator tolerance must be > 0");
}

ImpulseSpec Scenario::impulse_spec() const {
    ImpulseSpec spec = impulses;
    spec.horizon = horizon;
    spec.dimension = dim;
    return spec;
}

std::vector<SampleOrbit> Scenario::sample_orbits() const {
    return sample_ensemble(impulse_spec(), ensemble.n_orbits, ensemble.seed);
}

std::vector<SampleOrbit> Scenario::sample_orbits(int n_orbits, std::uint64_t seed) const {
    return sample_ensemble(impulse_spec(), n_orbits, seed);
}

std::vector<std::string> builtin_scenario_names() {
    return {"example-4.1", "example-4.1-fixed", "example-4.1-jumps10", "quadratic-small-T"};
}

Scenario builtin_scenario(const std::string& name) {
    Scenario s;
    s.name = name;
    if (name == "example-4.1" || name == "example-4.1-fixed" || name == "example-4.1-jumps10") {
        s.horizon = 1.0;
        s.dim = 2;
        s.hamiltonian = HamiltonianSpec::power_law(1.0, 10.0);
        s.impulses.intervals.kind = IntervalBounds::Kind::geometric;
        s.impulses.intervals.first = 0.5;
        s.impulses.intervals.ratio = 0.5;
        s.impulses.tau.kind = TauKind::uniform;
        s.impulses.jumps.kind = JumpCoeffs::Kind::poly_geometric;
        s.impulses.jumps.amplitude = 1.0;
        s.impulses.jumps.geo = 0.25;
        s.impulses.jumps.poly = 1;
        s.impulses.direction = {1.0, 0.0};
        s.grid.base_nodes = 65;
        s.ensemble.n_orbits = 1000;
        // full-cascade orbits keep impulses down to the resolution guard; the
        // discrete gradient floor near the frozen tail sits around 1e-5
        s.solver.gtol = 2e-5;
        s.tolerances.ode = 5e-2;
        s.tolerances.boundary = 5e-2;
        s.tolerances.pairing = 1e-4;
        if (name == "example-4.1-fixed") {
            s.impulses.tau.kind = TauKind::point_mass;
            s.impulses.tau.fraction = 0.5;
            // past j = 8 the remaining jump mass is ~6e-8, far below the
            // grid's resolution, while the 2^-j-wide segments wreck the
            // conditioning of the discrete metric
            s.impulses.max_impulses = 8;
            s.ensemble.n_orbits = 1;
            s.grid.base_nodes = 257;
            s.solver.gtol = 1e-5;
            s.tolerances.ode = 5e-2;
            s.tolerances.jump = 1e-10;
            s.tolerances.boundary = 5e-2;
            s.tolerances.pairing = 1e-4;
        } else if (name == "example-4.1-jumps10") {
            s.impulses.jumps.amplitude = 10.0;
        }
    } else if (name == "quadratic-small-T") {
        s.horizon = 0.5;
        s.dim = 2;
        s.hamiltonian = HamiltonianSpec::builtin("quadratic");
        s.impulses.intervals.kind = IntervalBounds::Kind::none;
        s.grid.base_nodes = 33;
        s.ensemble.n_orbits = 1;
        s.solver.gtol = 1e-6;
    } else {
        throw std::invalid_argument("unknown builtin scenario: " + name);
    }
    s.validate();
    return s;
}

std::string scenario_to_json_text(const Scenario& scenario) {
    json j;
    j["name"] = scenario.name;
    j["horizon_T"] = scenario.horizon;
    j["dimension_2n"] = scenario.dim;
    j["hamiltonian"] = hamiltonian_to_json(scenario.hamiltonian);
    j["impulses"] = impulses_to_json(scenario.impulses);
    j["grid"] = {{"nodes", scenario.grid.base_nodes},
                 {"quadrature", scenario.grid.quadrature == QuadratureRule::trapezoid
                                    ? "trapezoid"
                                    : "simpson"},
                 {"derivative", "central"}};
    j["ensemble"] = {{"n_orbits", scenario.ensemble.n_orbits}, {"seed", scenario.ensemble.seed}};
    j["optimizer"] = {{"path_nodes", scenario.solver.path_nodes},
                      {"gtol", scenario.solver.gtol},
                      {"max_iterations", scenario.solver.max_iterations},
                      {"path_iterations", scenario.solver.path_iterations},
                      {"redistribute_every", scenario.solver.redistribute_every},
                      {"armijo_init", scenario.solver.armijo_init},
                      {"armijo_shrink", scenario.solver.armijo_shrink},
                      {"armijo_slope", scenario.solver.armijo_slope},
                      {"e_norm_cap", scenario.solver.e_norm_cap},
                      {"k_trials", scenario.solver.k_trials},
                      {"k_safety", scenario.solver.k_safety},
                      {"rim_samples", scenario.solver.rim_samples}};
    j["tolerances"] = {{"ode", scenario.tolerances.ode},
                       {"jump", scenario.tolerances.jump},
                       {"boundary", scenario.tolerances.boundary},
                       {"pairing", scenario.tolerances.pairing},
                       {"integrator", scenario.tolerances.integrator}};
    return j.dump(2) + "\n";
}

Scenario scenario_from_json_text(const std::string& text) {
    json j = json::parse(text);
    expect_keys(j, "scenario",
                {"name", "horizon_T", "dimension_2n", "hamiltonian", "impulses", "grid",
                 "ensemble", "optimizer", "tolerances"});
    Scenario s;
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    s.horizon = j.at("horizon_T").get<double>();
    s.dim = j.at("dimension_2n").get<int>();
    s.hamiltonian = hamiltonian_from_json(j.at("hamiltonian"));
    s.impulses = impulses_from_json(j.at("impulses"), s.horizon, s.dim);

    if (j.contains("grid")) {
        const json& grid = j.at("grid");
        expect_keys(grid, "grid", {"nodes", "quadrature", "derivative"});
        if (grid.contains("nodes")) s.grid.base_nodes = grid.at("nodes").get<int>();
        if (grid.contains("quadrature")) {
            const std::string q = grid.at("quadrature").get<std::string>();
            if (q == "trapezoid") s.grid.quadrature = QuadratureRule::trapezoid;
            else if (q == "simpson") s.grid.quadrature = QuadratureRule::simpson;
            else throw std::invalid_argument("config: grid.quadrature must be trapezoid|simpson");
        }
        if (grid.contains("derivative") && grid.at("derivative").get<std::string>() != "central")
            throw std::invalid_argument("config: grid.derivative must be central");
    }
    if (j.contains("ensemble")) {
        const json& ens = j.at("ensemble");
        expect_keys(ens, "ensemble", {"n_orbits", "seed"});
        if (ens.contains("n_orbits")) s.ensemble.n_orbits = ens.at("n_orbits").get<int>();
        if (ens.contains("seed")) s.ensemble.seed = ens.at("seed").get<std::uint64_t>();
    }
    if (j.contains("optimizer")) {
        const json& opt = j.at("optimizer");
        expect_keys(opt, "optimizer",
                    {"path_nodes", "gtol", "max_iterations", "path_iterations",
                     "redistribute_every", "armijo_init", "armijo_shrink", "armijo_slope",
                     "e_norm_cap", "k_trials", "k_safety", "rim_samples"});
        auto get = [&](const char* key, auto& dst) {
            if (opt.contains(key)) dst = opt.at(key).get<std::decay_t<decltype(dst)>>();
        };
        get("path_nodes", s.solver.path_nodes);
        get("gtol", s.solver.gtol);
        get("max_iterations", s.solver.max_iterations);
        get("path_iterations", s.solver.path_iterations);
        get("redistribute_every", s.solver.redistribute_every);
        get("armijo_init", s.solver.armijo_init);
        get("armijo_shrink", s.solver.armijo_shrink);
        get("armijo_slope", s.solver.armijo_slope);
        get("e_norm_cap", s.solver.e_norm_cap);
        get("k_trials", s.solver.k_trials);
        get("k_safety", s.solver.k_safety);
        get("rim_samples", s.solver.rim_samples);
    }
    if (j.contains("tolerances")) {
        const json& tol = j.at("tolerances");
        expect_keys(tol, "tolerances", {"ode", "jump", "boundary", "pairing", "integrator"});
        auto get = [&](const char* key, double& dst) {
            if (tol.contains(key)) dst = tol.at(key).get<double>();
        };
        get("ode", s.tolerances.ode);
        get("jump", s.tolerances.jump);
        get("boundary", s.tolerances.boundary);
        get("pairing", s.tolerances.pairing);
        get("integrator", s.tolerances.integrator);
    }
    s.validate();
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return scenario_from_json_text(ss.str());
}

void save_scenario_file(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write config file: " + path);
    out << scenario_to_json_text(scenario);
}

Scenario resolve_scenario(const std::string& name_or_path) {
    for (const std::string& name : builtin_scenario_names())
        if (name == name_or_path) return builtin_scenario(name);
    if (!std::filesystem::exists(name_or_path))
        throw std::invalid_argument("config '" + name_or_path +
                                    "' is neither a builtin scenario nor a file");
    return load_scenario_file(name_or_path);
}

}  // namespace rimpact
