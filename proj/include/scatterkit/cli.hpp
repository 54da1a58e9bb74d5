#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scatterkit/models.hpp"
#include "scatterkit/smoothness.hpp"
#include "scatterkit/wave_ops.hpp"

namespace scatterkit {

// Exit codes of the scenario runner.
inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitValidation = 2;

struct SmoothnessSection {
    // operator under test: "position_box" (sites [lo_site, hi_site], optionally
    // filtered through E(window)), "eigenprojection", "identity"
    std::string g_kind = "position_box";
    int lo_site = 0;
    int hi_site = 0;
    bool band_filter = false;
    double eigen_target = 0.0;  // eigenprojection: eigenvalue closest to this
    double eps_min = 0.1;
    double len_min = 0.1;
    double t_window = 10.0;
    int probe_count = 16;
    std::uint64_t probe_seed = 42;
    std::vector<int> sweep_dims;           // optional gamma-spread sweep
    std::optional<double> max_spread;      // check gate
};

struct AcdiagSection {
    double grid_lo = 0.0;
    double grid_hi = 1.0;
    double grid_step = 0.1;
    double lipschitz_bound = 0.0;
    bool require_lipschitz = false;
    std::string projection = "band";  // "band" | "identity"
};

struct ScenarioConfig {
    int schema_version = 1;
    ModelSpec model;
    PerturbationSpec perturbation;   // defaults to strength 0
    CouplingSpec coupling;
    double window_lo = 0.0;
    double window_hi = 0.0;
    double time_t_max = 100.0;
    double time_dt = 0.25;
    std::optional<double> abel_rate;
    std::vector<double> eps_points;
    SmoothnessSection smoothness;
    AcdiagSection acdiag;
    bool use_pac_estimate = false;
    std::map<std::string, double> tolerances;  // named overrides, echoed in reports
    std::vector<std::string> output_formats = {"json", "csv"};

    double tol(const std::string& name, double fallback) const;
};

// Parses and validates; throws ValidationError on unknown keys, bad shapes,
// unreadable files.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& json_text);

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string method = "time";  // wave subcommand
    std::string sign = "plus";
};

// Subcommands: spectrum | smoothness | acdiag | wave | verify-kr.
// Returns the exit status and writes artifact files under out_dir.
int run_scenario(const std::string& subcommand, const ScenarioConfig& config,
                 const std::string& out_dir, const RunOverrides& overrides);

// plot-ready CSV series helpers
void emit_density_csv(const std::string& path, const SpectralResolution& s, double bin_lo,
                      double bin_hi, int bins);
void emit_spread_sweep_csv(const std::string& path, const std::vector<int>& dims,
                           const std::vector<SmoothnessReport>& reports);

}  // namespace scatterkit
