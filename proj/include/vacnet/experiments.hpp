#pragma once
// Packaged experiment scenarios: fixture loading, the six-region and
// twenty-region disturbance studies, the Monte Carlo uncertainty sweep, the
// gain sensitivity sweep and the network Lyapunov monitor. Everything here
// is deterministic given the configured seeds, including parallel sweeps.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vacnet/controllers.hpp"
#include "vacnet/io.hpp"
#include "vacnet/sim.hpp"
#include "vacnet/stability.hpp"

namespace vacnet {

// One named controller assignment: a controller per region plus an optional
// case-specific set-point (empty = scenario default).
struct ScenarioCase {
    std::vector<ControllerSpec> specs;
    std::vector<double> rho_star;
};

// A fully described scenario parsed from a JSON fixture: network, per-region
// controller assignments for each named case, set-points, scenario
// uncertainties and override schedule. Times in the fixture are minutes and
// are converted to hours at load.
struct Scenario {
    std::string name;
    Network net;
    std::vector<UncertaintyFn> uncertainty;       // scenario disturbance d_i
    std::vector<double> rho_star;                 // default set-point
    std::map<std::string, ScenarioCase> cases;
    std::string default_case;
    std::vector<OverrideWindow> overrides;
    std::vector<double> printed_constants;        // reference c vector, may be empty
    std::vector<double> printed_eta;              // reference gain vector, may be empty
    double row_sum_tolerance = 1e-6;
    std::vector<double> v_dl_max, v_dl_min;       // demand slope bounds, may be empty
    double horizon_min = 120.0;                   // default simulation length
    double dt_hours = 1e-4;
    std::size_t record_every = 10;

    const ScenarioCase& pick_case(const std::string& name) const; // empty = default
    const std::vector<double>& case_rho_star(const ScenarioCase& c) const {
        return c.rho_star.empty() ? rho_star : c.rho_star;
    }
};

// Parses a scenario fixture. Throws std::runtime_error naming the offending
// key on malformed input.
Scenario load_scenario(const std::string& path);

// Serializes back to fixture JSON (used by the round-trip check).
std::string scenario_to_json(const Scenario& scenario);

// Per-region flow models with the scenario uncertainty attached (or d = 0).
std::vector<FlowModel> scenario_models(const Scenario& scenario, bool with_uncertainty);

struct ScenarioRunConfig {
    std::string case_name;          // empty = scenario default
    bool with_uncertainty = true;   // apply the scenario d_i
    bool use_printed_constants = false; // skip calibration, keep fixture c
    double rho0_frac = 0.25;        // initial density as a fraction of rho*
    bool with_override = true;
    NoiseConfig noise;              // optional actuation noise
    double horizon_min = 0.0;       // 0 = scenario default
    double dt_hours = 0.0;          // 0 = scenario default
};

struct ScenarioRunResult {
    SimResult sim;
    std::vector<double> rho_star;   // set-point used
    std::vector<double> u_star;     // empty in printed-constants mode
    std::vector<double> constants;
    std::vector<ControllerSpec> specs; // calibrated controller specs
};

ScenarioRunResult run_scenario(const Scenario& scenario, const ScenarioRunConfig& cfg);

// --- Monte Carlo uncertainty sweep ---

struct MonteCarloConfig {
    std::string case_name;          // empty = scenario default
    std::size_t n_runs = 50;
    std::uint64_t seed = 1;
    double amplitude_max = 500.0;   // tent peak magnitude, U(0, max]
    double peak_frac_lo = 0.2;      // tent location as a fraction of rho_jam
    double peak_frac_hi = 0.3;
    double horizon_min = 70.0;
    double dt_hours = 2e-4;
    std::size_t record_every = 50;
    std::vector<double> sample_times_min; // evaluation instants for error rows
    double reference_time_min = 30.0;     // per-run reference (pre-override)
    unsigned threads = 0;                 // 0 = hardware concurrency
};

struct MonteCarloRun {
    std::uint64_t seed = 0;
    std::vector<double> errors;        // at cfg.sample_times_min vs the run's ref
    std::vector<double> error_series;  // max-abs deviation at every sample
    double max_density_ratio = 0.0;    // max over run of rho_i / rho_jam_i
    bool gridlocked = false;           // a region pinned at jam at the end
    bool diverging = false;            // error grew monotonically for >= 10 min
};

struct MonteCarloReport {
    std::vector<double> t_min;         // shared sample grid
    std::vector<MonteCarloRun> runs;
    std::vector<double> envelope;      // per sample, max over runs
    std::vector<double> worst_errors;  // per cfg.sample_times_min, max over runs
    std::vector<std::size_t> flagged;  // diverging or gridlocked run indices
};

// Draws one tent per region per run (seeded base + run index), keeps the
// scheme constants fixed at the nominal calibration, and measures deviations
// against the run's own state at the last sample before reference_time_min.
// Runs execute in parallel; reduction is by run index, so the report is
// identical for any thread count.
MonteCarloReport monte_carlo_sweep(const Scenario& scenario, const MonteCarloConfig& cfg);

// --- gain sensitivity sweep ---

struct SensitivityConfig {
    std::size_t n_draws = 50;
    std::uint64_t seed = 7;
    double factor_lo = 1.0;         // eta multiplier above the synthesized bound
    double factor_hi = 3.0;
    double margin = 0.05;           // slack passed to the synthesis
    LipschitzInterpretation interpretation = LipschitzInterpretation::congested_slope;
    double horizon_min = 40.0;
    double dt_hours = 2e-4;
    std::size_t record_every = 50;
    double settle_time_min = 15.0;  // instant at which the error is measured
    double rho0_frac = 0.5;
};

struct SensitivityDraw {
    std::vector<double> factors;
    std::vector<double> eta;
    double settle_error = 0.0;
    double final_error = 0.0;
    bool certified = false;         // margin check at the drawn gains
};

struct SensitivityReport {
    SynthesisResult base;
    std::vector<SensitivityDraw> draws;
    double worst_settle_error = 0.0;
};

// Every draw scales the synthesized proportional gains by per-region factors
// from [factor_lo, factor_hi] and re-checks the margin condition before
// simulating; a draw failing the check is redrawn (bounded retries).
SensitivityReport gain_sensitivity(const Scenario& scenario, const SensitivityConfig& cfg);

// --- network Lyapunov monitor ---

struct LyapunovSample {
    double t = 0.0;
    double value = 0.0;
};

// Sum of plant storages L_i/2 (rho_i - rho*_i)^2 plus each controller's
// registered storage, evaluated along a recorded trajectory. Throws when a
// controller lacks a storage certificate.
std::vector<LyapunovSample> lyapunov_trace(const Simulator& sim, const SimResult& res,
                                           const std::vector<double>& rho_star);

// Random connected 3-region ring-with-chords network drawn from the given
// seed, with feasible set-points (all equilibrium inflows positive; redraws
// internally up to max_attempts) and gains synthesized at the given margin.
struct RandomNetworkConfig {
    std::size_t n = 3;
    std::uint64_t seed = 0;
    int max_attempts = 200;
    double margin = 0.05;
};

struct RandomNetwork {
    Network net;
    std::vector<FlowModel> models;
    std::vector<double> rho_star;
    std::vector<double> eta;        // synthesized stabilizing gains
    std::vector<double> u_star;
};

RandomNetwork random_feasible_network(const RandomNetworkConfig& cfg);

// Trace CSV with the full export schema: t_min, rho_1..n, u_1..n,
// speed_1..n, g_1..n, lyapunov, sat_flags. The lyapunov column holds nan
// unless every controller carries a storage certificate.
CsvTable trace_csv(const Simulator& sim, const SimResult& res,
                   const std::vector<double>& rho_star);

} // namespace vacnet
