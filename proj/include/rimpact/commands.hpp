#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rimpact/scenario.hpp"

namespace rimpact {

// 0 ok, 1 config/IO, 2 non-convergence, 3 hypothesis failure
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitNonConvergence = 2,
    kExitHypothesisFailure = 3,
};

struct CommandOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> n_orbits;
    std::optional<double> gtol;
    bool force = false;
};

Scenario apply_overrides(Scenario scenario, const CommandOverrides& overrides);

int cmd_simulate(const Scenario& scenario, const std::string& out_dir);
int cmd_hypotheses(const Scenario& scenario, const std::string& out_dir);
int cmd_geometry(const Scenario& scenario, const std::string& out_dir);
int cmd_solve(const Scenario& scenario, const std::string& out_dir, bool force);
int cmd_verify(const Scenario& scenario, const std::string& out_dir);
int cmd_report(const std::string& out_dir);

}  // namespace rimpact
