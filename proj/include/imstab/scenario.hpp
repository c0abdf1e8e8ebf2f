#pragma once

#include <map>
#include <optional>
#include <string>

#include "imstab/bounds.hpp"
#include "imstab/config.hpp"
#include "imstab/io.hpp"
#include "imstab/moment_map.hpp"
#include "imstab/stein.hpp"
#include "imstab/transport.hpp"

namespace imstab {

// Measures and processes declared in a config, resolved by name.
struct BuildContext {
    std::map<std::string, MeasureSpec> measures;
    std::map<std::string, DiffusionHalf> processes;
    std::map<std::string, int> process_dims;
    std::map<std::string, SteinKernelField> kernels;  // kernels built for stein_sde processes
};

MeasureSpec build_measure(const ConfigTable& t);
BuildContext build_context(const ConfigTable& root);
ScenarioSpec build_scenario(const ConfigTable& root, BuildContext& ctx,
                            std::optional<int> theorem_override = {});

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> theorem;
    std::optional<int> threads;  // beats the config; the env variable beats both
    bool dump_paths = false;
};

ordered_json bound_report_json(const BoundReport& rep, const std::string& config_hash);

// Executes a config end to end; returns the process exit status (0 only when
// every verdict is holds/inconclusive and all residual checks pass).
int run_experiment(const std::string& config_path, const RunOverrides& overrides = {});

}  // namespace imstab
