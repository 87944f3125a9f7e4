// Command-line front end: fixture validation, margin certificates,
// set-point calibration, closed-loop simulation, the Monte Carlo and gain
// sensitivity sweeps, and CSV-to-SVG rendering.
//
// Exit codes, exhaustively: 0 success, 1 domain failure (a validation,
// certificate, calibration or run-quality check failed), 2 input error
// (unreadable or malformed input, bad arguments), 3 I/O error (output
// could not be written).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vacnet/experiments.hpp"
#include "vacnet/io.hpp"
#include "vacnet/sim.hpp"
#include "vacnet/stability.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

using nlohmann::json;

std::string out_root() {
    const char* env = std::getenv("VACNET_OUT_ROOT");
    return env && *env ? std::string(env) : std::string("out");
}

int input_error(const std::string& what) {
    std::cerr << "error: " << what << "\n";
    return 2;
}

int io_error(const std::string& what) {
    std::cerr << "error: " << what << "\n";
    return 3;
}

// Makes the run directory; returns false on filesystem failure.
bool ensure_dir(const std::string& dir, std::string& err) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        err = dir + ": " + ec.message();
        return false;
    }
    return true;
}

std::string fmt(double v) { return vacnet::format_double(v); }

std::vector<double> minutes_axis(const std::vector<double>& t_hours) {
    std::vector<double> m(t_hours.size());
    for (std::size_t k = 0; k < t_hours.size(); ++k) m[k] = t_hours[k] * 60.0;
    return m;
}

// Per-region effective passivity gains of a controller assignment: the eta
// gain for the explicit schemes, the excess-passivity value for the
// bounded_filter scheme (beta_c minus gamma_c times the filter peak gain).
std::vector<double> effective_etas(const std::vector<vacnet::ControllerSpec>& specs) {
    std::vector<double> eta(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i)
        eta[i] = specs[i].scheme == vacnet::Scheme::bounded_filter
                     ? vacnet::bounded_filter_eta(specs[i].gains)
                     : specs[i].gains.eta;
    return eta;
}

json margin_to_json(const vacnet::MarginReport& rep) {
    json j;
    j["margins"] = rep.margins;
    j["required"] = rep.required;
    j["pass"] = rep.pass;
    std::vector<std::size_t> fail1;
    for (auto i : rep.failing) fail1.push_back(i + 1);
    j["failing_regions"] = fail1;
    return j;
}

// Both-interpretation certificate summary recorded in run manifests.
json certificate_summary(const vacnet::Network& net, const std::vector<double>& eta) {
    json j;
    vacnet::MarginOptions mo;
    mo.interpretation = vacnet::LipschitzInterpretation::max_slope;
    j["max_slope"] = margin_to_json(vacnet::stability_margin(net, eta, mo));
    mo.interpretation = vacnet::LipschitzInterpretation::congested_slope;
    j["congested_slope"] = margin_to_json(vacnet::stability_margin(net, eta, mo));
    j["eta"] = eta;
    return j;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

// Writes a per-quantity time-series CSV (t_min plus one column per region).
void write_series_csv(const std::string& path, const std::string& prefix,
                      const std::vector<double>& t_min,
                      const std::vector<std::vector<double>>& samples) {
    vacnet::CsvTable tab;
    const std::size_t n = samples.empty() ? 0 : samples.front().size();
    tab.columns.push_back("t_min");
    for (std::size_t i = 0; i < n; ++i)
        tab.columns.push_back(prefix + "_" + std::to_string(i + 1));
    for (std::size_t k = 0; k < t_min.size(); ++k) {
        std::vector<double> row;
        row.reserve(n + 1);
        row.push_back(t_min[k]);
        for (std::size_t i = 0; i < n; ++i) row.push_back(samples[k][i]);
        tab.rows.push_back(std::move(row));
    }
    vacnet::write_file(path, tab.to_string());
}

void write_series_svg(const std::string& path, const std::string& title,
                      const std::string& prefix, const std::vector<double>& t_min,
                      const std::vector<std::vector<double>>& samples) {
    const std::size_t n = samples.empty() ? 0 : samples.front().size();
    std::vector<vacnet::SvgSeries> series(n);
    for (std::size_t i = 0; i < n; ++i) {
        series[i].label = prefix + "_" + std::to_string(i + 1);
        series[i].y.resize(t_min.size());
        for (std::size_t k = 0; k < t_min.size(); ++k) series[i].y[k] = samples[k][i];
    }
    vacnet::write_file(path, vacnet::svg_line_plot(title, "t [min]", t_min, series));
}

// --- validate ---

int cmd_validate(const std::string& config) {
    vacnet::Scenario sc;
    try {
        sc = vacnet::load_scenario(config);
    } catch (const std::exception& e) {
        return input_error(e.what());
    }
    auto rep = vacnet::validate_network(sc.net, sc.row_sum_tolerance);
    std::cout << rep.summary();
    bool ok = rep.pass();
    for (std::size_t i = 0; i < sc.net.size(); ++i) {
        auto urep = vacnet::validate_uncertainty(sc.net.regions[i], sc.uncertainty[i]);
        if (!urep.pass()) {
            std::cout << "uncertainty checks, region " << (i + 1) << ":\n" << urep.summary();
            ok = false;
        }
    }
    std::cout << (ok ? "PASS" : "FAIL") << ": " << sc.name << "\n";
    return ok ? 0 : 1;
}

// --- check ---

int cmd_check(const std::string& config, const std::string& gains_path,
              const std::string& interp_name, const std::string& xi_name,
              const std::string& vdl_name, double margin) {
    vacnet::Scenario sc;
    std::vector<double> eta;
    std::string source;
    try {
        sc = vacnet::load_scenario(config);
        if (!gains_path.empty()) {
            json jg = json::parse(vacnet::read_file(gains_path));
            eta = jg.at("eta").get<std::vector<double>>();
            source = "file " + gains_path;
        } else if (!sc.printed_eta.empty()) {
            eta = sc.printed_eta;
            source = "fixture reference gains";
        }
    } catch (const std::exception& e) {
        return input_error(e.what());
    }

    vacnet::MarginOptions mo;
    mo.interpretation = interp_name == "congested"
                            ? vacnet::LipschitzInterpretation::congested_slope
                            : vacnet::LipschitzInterpretation::max_slope;
    if (vdl_name == "max") {
        if (sc.v_dl_max.empty()) return input_error("fixture carries no v_dl max table");
        mo.v_dl = sc.v_dl_max;
    } else if (vdl_name == "min") {
        if (sc.v_dl_min.empty()) return input_error("fixture carries no v_dl min table");
        mo.v_dl = sc.v_dl_min;
    }

    if (eta.empty()) {
        vacnet::SynthesisOptions so;
        so.interpretation = mo.interpretation;
        so.margin = margin;
        so.xi_mode = xi_name == "descent" ? vacnet::XiMode::coordinate_descent
                                          : vacnet::XiMode::fixed_one;
        so.v_dl = mo.v_dl;
        auto syn = vacnet::synthesize_gains(sc.net, so);
        eta = syn.eta;
        mo.xi = syn.xi;
        source = "synthesized (margin " + fmt(margin) + ")";
    } else if (xi_name == "descent") {
        // reuse the descent weights so the check sees the same certificate
        vacnet::SynthesisOptions so;
        so.interpretation = mo.interpretation;
        so.xi_mode = vacnet::XiMode::coordinate_descent;
        so.v_dl = mo.v_dl;
        mo.xi = vacnet::synthesize_gains(sc.net, so).xi;
    }
    if (eta.size() != sc.net.size())
        return input_error("gain vector length does not match the network");

    auto rep = vacnet::stability_margin(sc.net, eta, mo);
    std::cout << "scenario: " << sc.name << "\n"
              << "gains: " << source << "\n"
              << "interpretation: " << (interp_name == "congested" ? "congested" : "max")
              << ", xi: " << (xi_name == "descent" ? "descent" : "fixed") << "\n";
    for (std::size_t i = 0; i < eta.size(); ++i)
        std::cout << "region " << (i + 1) << ": eta = " << fmt(eta[i])
                  << "  required = " << fmt(rep.required[i])
                  << "  margin = " << fmt(rep.margins[i]) << "\n";
    if (rep.pass) {
        std::cout << "PASS: all margins positive\n";
        return 0;
    }
    std::cout << "FAIL: negative margin in regions";
    for (auto i : rep.failing) std::cout << " " << (i + 1);
    std::cout << "\n";
    return 1;
}

// --- calibrate ---

int cmd_calibrate(const std::string& config, const std::string& case_name,
                  const std::vector<double>& rho_star_cli, bool allow_negative,
                  bool with_uncertainty, const std::string& out_file) {
    vacnet::Scenario sc;
    try {
        sc = vacnet::load_scenario(config);
    } catch (const std::exception& e) {
        return input_error(e.what());
    }

    std::vector<double> u_star, constants, rho_star;
    std::vector<vacnet::ControllerSpec> specs;
    try {
        const auto& cs = sc.pick_case(case_name);
        specs = cs.specs;
        rho_star = rho_star_cli.empty() ? sc.case_rho_star(cs) : rho_star_cli;
        if (rho_star.size() != sc.net.size())
            return input_error("set-point vector length does not match the network");
        auto models = vacnet::scenario_models(sc, with_uncertainty);
        u_star = vacnet::equilibrium_inputs(sc.net, models, rho_star);
        std::vector<std::size_t> neg, zero_flow;
        for (std::size_t i = 0; i < u_star.size(); ++i) {
            if (u_star[i] < 0.0) neg.push_back(i + 1);
            if (vacnet::g_total(models[i], rho_star[i]) == 0.0) zero_flow.push_back(i + 1);
        }
        if (!neg.empty() && !allow_negative) {
            std::cerr << "set-point infeasible: negative equilibrium inflow in regions";
            for (auto i : neg) std::cerr << " " << i;
            std::cerr << "\n";
            return 1;
        }
        if (!zero_flow.empty()) {
            std::cout << "warning: zero flow at the set-point in regions";
            for (auto i : zero_flow) std::cout << " " << i;
            std::cout << "\n";
        }
        auto cal = vacnet::calibrate_setpoint(sc.net, models, rho_star, specs,
                                              /*require_nonneg=*/false);
        constants = cal.constants;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    json j;
    j["scenario"] = sc.name;
    j["case"] = case_name.empty() ? sc.default_case : case_name;
    j["rho_star"] = rho_star;
    j["u_star"] = u_star;
    j["constants"] = constants;
    for (std::size_t i = 0; i < u_star.size(); ++i)
        std::cout << "region " << (i + 1) << ": u_star = " << fmt(u_star[i])
                  << "  c = " << fmt(constants[i]) << "\n";
    if (!out_file.empty()) {
        try {
            vacnet::write_file(out_file, j.dump(2) + "\n");
        } catch (const std::exception& e) {
            return io_error(e.what());
        }
        std::cout << "wrote " << out_file << "\n";
    }
    return 0;
}

// --- simulate ---

int cmd_simulate(const std::string& config, const std::string& case_name,
                 bool no_uncertainty, bool no_override, bool printed_constants,
                 double rho0_frac, double noise_sigma, std::uint64_t noise_seed,
                 double horizon_min, double dt_hours, std::string out_dir) {
    vacnet::Scenario sc;
    std::string config_bytes;
    try {
        config_bytes = vacnet::read_file(config);
        sc = vacnet::load_scenario(config);
    } catch (const std::exception& e) {
        return input_error(e.what());
    }

    vacnet::ScenarioRunConfig rc;
    rc.case_name = case_name;
    rc.with_uncertainty = !no_uncertainty;
    rc.use_printed_constants = printed_constants;
    rc.rho0_frac = rho0_frac;
    rc.with_override = !no_override;
    rc.horizon_min = horizon_min;
    rc.dt_hours = dt_hours;
    if (noise_sigma > 0.0) {
        rc.noise.enabled = true;
        rc.noise.sigma_rel = noise_sigma;
        rc.noise.seed = noise_seed;
    }

    Stopwatch watch;
    vacnet::ScenarioRunResult rr;
    try {
        rr = vacnet::run_scenario(sc, rc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const std::string eff_case = case_name.empty() ? sc.default_case : case_name;
    if (out_dir.empty()) out_dir = out_root() + "/" + sc.name + "-" + eff_case;

    auto models = vacnet::scenario_models(sc, rc.with_uncertainty);
    const auto& res = rr.sim;
    auto t_min = minutes_axis(res.t);
    std::vector<std::vector<double>> speeds(res.t.size()), flows(res.t.size());
    for (std::size_t k = 0; k < res.t.size(); ++k) {
        speeds[k].resize(res.n_regions);
        flows[k].resize(res.n_regions);
        for (std::size_t i = 0; i < res.n_regions; ++i) {
            speeds[k][i] = vacnet::speed(models[i], res.rho[k][i]);
            flows[k][i] = vacnet::g_total(models[i], res.rho[k][i]);
        }
    }

    json manifest;
    manifest["scenario"] = sc.name;
    manifest["case"] = eff_case;
    manifest["tool_version"] = kVersion;
    manifest["config_path"] = config;
    manifest["config_hash"] = vacnet::fnv1a64_hex(config_bytes);
    manifest["seeds"] = json::object();
    if (rc.noise.enabled) manifest["seeds"]["noise"] = noise_seed;
    manifest["options"] = {{"uncertainty", rc.with_uncertainty},
                           {"override", rc.with_override},
                           {"printed_constants", rc.use_printed_constants},
                           {"rho0_frac", rc.rho0_frac},
                           {"noise_sigma", noise_sigma},
                           {"horizon_min", horizon_min > 0 ? horizon_min : sc.horizon_min},
                           {"dt_hours", dt_hours > 0 ? dt_hours : sc.dt_hours}};
    manifest["rho_star"] = rr.rho_star;
    manifest["u_star"] = rr.u_star;
    manifest["constants"] = rr.constants;
    manifest["certificate"] = certificate_summary(sc.net, effective_etas(rr.specs));

    std::string err;
    if (!ensure_dir(out_dir, err)) return io_error(err);
    try {
        write_series_csv(out_dir + "/rho.csv", "rho", t_min, res.rho);
        write_series_csv(out_dir + "/u.csv", "u", t_min, res.u);
        write_series_csv(out_dir + "/speed.csv", "speed", t_min, speeds);
        write_series_csv(out_dir + "/g.csv", "g", t_min, flows);
        vacnet::Simulator sim(sc.net, models, rr.specs);
        vacnet::write_file(out_dir + "/trace.csv",
                           vacnet::trace_csv(sim, res, rr.rho_star).to_string());
        write_series_svg(out_dir + "/rho.svg", "density [veh/km]", "rho", t_min, res.rho);
        write_series_svg(out_dir + "/u.svg", "admitted inflow [veh/h]", "u", t_min, res.u);
        write_series_svg(out_dir + "/speed.svg", "speed [km/h]", "speed", t_min, speeds);
        write_series_svg(out_dir + "/g.svg", "total flow [veh/h]", "g", t_min, flows);
        manifest["outputs"] = {out_dir + "/rho.csv",   out_dir + "/u.csv",
                               out_dir + "/speed.csv", out_dir + "/g.csv",
                               out_dir + "/trace.csv", out_dir + "/rho.svg",
                               out_dir + "/u.svg",     out_dir + "/speed.svg",
                               out_dir + "/g.svg"};
        manifest["duration_ms"] = watch.ms();
        vacnet::write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        return io_error(e.what());
    }
    std::cout << "wrote " << out_dir << " (" << res.t.size() << " samples)\n";
    return 0;
}

// --- montecarlo ---

int cmd_montecarlo(const std::string& config, const std::string& case_name,
                   std::size_t runs, std::uint64_t seed, double amplitude_max,
                   unsigned threads, std::string out_dir) {
    vacnet::Scenario sc;
    std::string config_bytes;
    try {
        config_bytes = vacnet::read_file(config);
        sc = vacnet::load_scenario(config);
    } catch (const std::exception& e) {
        return input_error(e.what());
    }

    vacnet::MonteCarloConfig mc;
    mc.case_name = case_name;
    mc.n_runs = runs;
    mc.seed = seed;
    mc.amplitude_max = amplitude_max;
    mc.threads = threads;
    mc.sample_times_min = {15.0, 30.0, 45.0, 55.0, 70.0};

    Stopwatch watch;
    vacnet::MonteCarloReport rep;
    std::vector<vacnet::ControllerSpec> case_specs;
    try {
        case_specs = sc.pick_case(case_name).specs;
        rep = vacnet::monte_carlo_sweep(sc, mc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const std::string eff_case = case_name.empty() ? sc.default_case : case_name;
    if (out_dir.empty()) out_dir = out_root() + "/" + sc.name + "-mc";
    std::string err;
    if (!ensure_dir(out_dir, err)) return io_error(err);

    json manifest;
    manifest["scenario"] = sc.name;
    manifest["case"] = eff_case;
    manifest["tool_version"] = kVersion;
    manifest["config_hash"] = vacnet::fnv1a64_hex(config_bytes);
    manifest["seeds"] = {{"base", seed}};
    manifest["n_runs"] = runs;
    manifest["amplitude_max"] = amplitude_max;
    manifest["sample_times_min"] = mc.sample_times_min;
    manifest["reference_time_min"] = mc.reference_time_min;
    manifest["certificate"] = certificate_summary(sc.net, effective_etas(case_specs));

    json jruns = json::array();
    std::vector<std::string> outputs;
    try {
        for (std::size_t r = 0; r < rep.runs.size(); ++r) {
            const auto& run = rep.runs[r];
            vacnet::CsvTable tab;
            tab.columns = {"t_min", "error"};
            for (std::size_t k = 0; k < rep.t_min.size(); ++k)
                tab.rows.push_back({rep.t_min[k], run.error_series[k]});
            std::ostringstream name;
            name << "run_" << std::setw(3) << std::setfill('0') << r << ".csv";
            vacnet::write_file(out_dir + "/" + name.str(), tab.to_string());
            outputs.push_back(out_dir + "/" + name.str());
            json jr;
            jr["index"] = r;
            jr["seed"] = run.seed;
            jr["errors_at_samples"] = run.errors;
            jr["max_density_ratio"] = run.max_density_ratio;
            jr["gridlocked"] = run.gridlocked;
            jr["diverging"] = run.diverging;
            jruns.push_back(std::move(jr));
        }
        vacnet::CsvTable env;
        env.columns = {"t_min", "envelope"};
        for (std::size_t k = 0; k < rep.t_min.size(); ++k)
            env.rows.push_back({rep.t_min[k], rep.envelope[k]});
        vacnet::write_file(out_dir + "/envelope.csv", env.to_string());
        outputs.push_back(out_dir + "/envelope.csv");

        manifest["runs"] = std::move(jruns);
        manifest["worst_errors"] = rep.worst_errors;
        manifest["flagged_runs"] = rep.flagged;
        manifest["outputs"] = outputs;
        manifest["duration_ms"] = watch.ms();
        vacnet::write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        return io_error(e.what());
    }

    std::cout << "runs: " << rep.runs.size() << ", flagged: " << rep.flagged.size() << "\n";
    for (std::size_t s = 0; s < mc.sample_times_min.size(); ++s)
        std::cout << "worst error at t = " << fmt(mc.sample_times_min[s])
                  << " min: " << fmt(rep.worst_errors[s]) << "\n";
    std::cout << "wrote " << out_dir << "\n";
    if (!rep.flagged.empty()) {
        std::cout << "FAIL: flagged runs:";
        for (auto r : rep.flagged) std::cout << " " << r;
        std::cout << "\n";
        return 1;
    }
    std::cout << "PASS: all runs reconverged\n";
    return 0;
}

// --- sensitivity ---

int cmd_sensitivity(const std::string& config, std::size_t draws, std::uint64_t seed,
                    double factor_lo, double factor_hi, double margin,
                    std::string out_dir) {
    vacnet::Scenario sc;
    std::string config_bytes;
    try {
        config_bytes = vacnet::read_file(config);
        sc = vacnet::load_scenario(config);
    } catch (const std::exception& e) {
        return input_error(e.what());
    }

    vacnet::SensitivityConfig cfg;
    cfg.n_draws = draws;
    cfg.seed = seed;
    cfg.factor_lo = factor_lo;
    cfg.factor_hi = factor_hi;
    cfg.margin = margin;

    Stopwatch watch;
    vacnet::SensitivityReport rep;
    try {
        rep = vacnet::gain_sensitivity(sc, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (out_dir.empty()) out_dir = out_root() + "/" + sc.name + "-sens";
    std::string err;
    if (!ensure_dir(out_dir, err)) return io_error(err);

    const std::size_t n = sc.net.size();
    vacnet::CsvTable tab;
    tab.columns = {"draw"};
    for (std::size_t i = 0; i < n; ++i) tab.columns.push_back("factor_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < n; ++i) tab.columns.push_back("eta_" + std::to_string(i + 1));
    tab.columns.push_back("settle_error");
    tab.columns.push_back("final_error");
    tab.columns.push_back("certified");
    for (std::size_t d = 0; d < rep.draws.size(); ++d) {
        const auto& dr = rep.draws[d];
        std::vector<double> row;
        row.push_back(static_cast<double>(d));
        row.insert(row.end(), dr.factors.begin(), dr.factors.end());
        row.insert(row.end(), dr.eta.begin(), dr.eta.end());
        row.push_back(dr.settle_error);
        row.push_back(dr.final_error);
        row.push_back(dr.certified ? 1.0 : 0.0);
        tab.rows.push_back(std::move(row));
    }

    json manifest;
    manifest["scenario"] = sc.name;
    manifest["tool_version"] = kVersion;
    manifest["config_hash"] = vacnet::fnv1a64_hex(config_bytes);
    manifest["seeds"] = {{"base", seed}};
    manifest["n_draws"] = draws;
    manifest["factor_range"] = {factor_lo, factor_hi};
    manifest["base_eta"] = rep.base.eta;
    manifest["base_check"] = margin_to_json(rep.base.check);
    manifest["worst_settle_error"] = rep.worst_settle_error;
    manifest["duration_ms"] = watch.ms();
    try {
        vacnet::write_file(out_dir + "/draws.csv", tab.to_string());
        vacnet::write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        return io_error(e.what());
    }
    std::cout << "draws: " << rep.draws.size()
              << ", worst settle error: " << fmt(rep.worst_settle_error) << "\n"
              << "wrote " << out_dir << "\n";
    return 0;
}

// --- plot ---

bool parse_csv(const std::string& text, vacnet::CsvTable& tab, std::string& err) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        err = "empty CSV";
        return false;
    }
    std::istringstream hdr(line);
    std::string cell;
    while (std::getline(hdr, cell, ',')) tab.columns.push_back(cell);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::vector<double> vals;
        while (std::getline(row, cell, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
                vals.push_back(v);
            } catch (const std::exception&) {
                err = "line " + std::to_string(lineno) + ": bad numeric cell '" + cell + "'";
                return false;
            }
        }
        if (vals.size() != tab.columns.size()) {
            err = "line " + std::to_string(lineno) + ": expected " +
                  std::to_string(tab.columns.size()) + " cells";
            return false;
        }
        tab.rows.push_back(std::move(vals));
    }
    return true;
}

int cmd_plot(const std::string& csv_path, const std::string& out_file,
             std::string title, const std::string& x_col) {
    vacnet::CsvTable tab;
    std::string err;
    try {
        if (!parse_csv(vacnet::read_file(csv_path), tab, err))
            return input_error(csv_path + ": " + err);
    } catch (const std::exception& e) {
        return input_error(e.what());
    }
    std::size_t xi = 0;
    if (!x_col.empty()) {
        auto it = std::find(tab.columns.begin(), tab.columns.end(), x_col);
        if (it == tab.columns.end()) return input_error("no column named '" + x_col + "'");
        xi = static_cast<std::size_t>(it - tab.columns.begin());
    }
    std::vector<double> x(tab.rows.size());
    for (std::size_t k = 0; k < tab.rows.size(); ++k) x[k] = tab.rows[k][xi];
    std::vector<vacnet::SvgSeries> series;
    for (std::size_t c = 0; c < tab.columns.size(); ++c) {
        if (c == xi) continue;
        vacnet::SvgSeries s;
        s.label = tab.columns[c];
        s.y.resize(tab.rows.size());
        for (std::size_t k = 0; k < tab.rows.size(); ++k) s.y[k] = tab.rows[k][c];
        series.push_back(std::move(s));
    }
    if (title.empty()) title = std::filesystem::path(csv_path).filename().string();
    try {
        vacnet::write_file(out_file, vacnet::svg_line_plot(title, tab.columns[xi], x, series));
    } catch (const std::exception& e) {
        return io_error(e.what());
    }
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vacnet: multi-region traffic network admission control toolkit"};
    app.set_version_flag("--version", std::string("vacnet ") + kVersion);
    app.require_subcommand(1);

    std::string config, gains_path, out_dir, out_file, case_name, title, x_col;
    std::string interp = "max", xi_mode = "fixed", vdl = "declared", csv_path;
    std::vector<double> rho_star_cli;
    bool no_uncertainty = false, no_override = false, printed_constants = false;
    bool allow_negative = false;
    double rho0_frac = 0.25, noise_sigma = 0.0, horizon_min = 0.0, dt_hours = 0.0;
    double amplitude_max = 500.0, factor_lo = 1.0, factor_hi = 3.0, margin = 0.05;
    std::size_t runs = 50, draws = 50;
    std::uint64_t seed = 1000, noise_seed = 0, sens_seed = 7;
    unsigned threads = 0;

    auto* v = app.add_subcommand("validate", "structural checks of a scenario fixture");
    v->add_option("config", config, "scenario fixture (JSON)")->required();

    auto* ch = app.add_subcommand("check", "decoupled stability margins for a gain vector");
    ch->add_option("config", config)->required();
    ch->add_option("--gains", gains_path, "JSON file with an \"eta\" array");
    ch->add_option("--lipschitz-interpretation", interp, "max | congested")
        ->check(CLI::IsMember({"max", "congested"}));
    ch->add_option("--xi-mode", xi_mode, "fixed | descent")
        ->check(CLI::IsMember({"fixed", "descent"}));
    ch->add_option("--v-dl", vdl, "declared | max | min (fixture demand-slope table)")
        ->check(CLI::IsMember({"declared", "max", "min"}));
    ch->add_option("--margin", margin, "synthesis slack when no gains are given");

    auto* ca = app.add_subcommand("calibrate", "equilibrium inflows and scheme constants");
    ca->add_option("config", config)->required();
    ca->add_option("--case", case_name, "controller case (fixture default otherwise)");
    ca->add_option("--rho-star", rho_star_cli, "override set-points (veh/km)");
    ca->add_flag("--allow-negative", allow_negative, "do not refuse negative inflows");
    bool cal_with_unc = false;
    ca->add_flag("--with-uncertainty", cal_with_unc,
                 "include the scenario disturbance in the equilibrium flows");
    ca->add_option("--out", out_file, "write the result as JSON");

    auto* si = app.add_subcommand("simulate", "closed-loop run with CSV/SVG artifacts");
    si->add_option("config", config)->required();
    si->add_option("--case", case_name);
    si->add_flag("--no-uncertainty", no_uncertainty, "drop the scenario disturbance");
    si->add_flag("--no-override", no_override, "skip the scheduled input override");
    si->add_flag("--printed-constants", printed_constants,
                 "use the fixture reference constants instead of calibrating");
    si->add_option("--rho0-frac", rho0_frac, "initial density fraction of rho*");
    si->add_option("--noise", noise_sigma, "relative actuation noise std");
    si->add_option("--noise-seed", noise_seed);
    si->add_option("--horizon", horizon_min, "minutes (fixture default otherwise)");
    si->add_option("--dt", dt_hours, "step in hours (fixture default otherwise)");
    si->add_option("--out", out_dir, "output directory");

    auto* mcs = app.add_subcommand("montecarlo", "uncertainty sweep with fixed gains");
    mcs->add_option("config", config)->required();
    mcs->add_option("--case", case_name);
    mcs->add_option("--runs", runs);
    mcs->add_option("--seed", seed);
    mcs->add_option("--amplitude-max", amplitude_max, "tent amplitude bound (veh/h)");
    mcs->add_option("--threads", threads, "0 = hardware concurrency");
    mcs->add_option("--out", out_dir);

    auto* se = app.add_subcommand("sensitivity", "random gain scaling above synthesis");
    se->add_option("config", config)->required();
    se->add_option("--draws", draws);
    se->add_option("--seed", sens_seed);
    se->add_option("--factor-lo", factor_lo);
    se->add_option("--factor-hi", factor_hi);
    se->add_option("--margin", margin);
    se->add_option("--out", out_dir);

    auto* pl = app.add_subcommand("plot", "render a CSV as an SVG line plot");
    pl->add_option("csv", csv_path, "CSV produced by this tool")->required();
    pl->add_option("--out", out_file, "SVG path")->required();
    pl->add_option("--title", title);
    pl->add_option("--x-col", x_col, "x axis column (first column otherwise)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*v) return cmd_validate(config);
    if (*ch) return cmd_check(config, gains_path, interp, xi_mode, vdl, margin);
    if (*ca)
        return cmd_calibrate(config, case_name, rho_star_cli, allow_negative, cal_with_unc,
                             out_file);
    if (*si)
        return cmd_simulate(config, case_name, no_uncertainty, no_override, printed_constants,
                            rho0_frac, noise_sigma, noise_seed, horizon_min, dt_hours, out_dir);
    if (*mcs)
        return cmd_montecarlo(config, case_name, runs, seed, amplitude_max, threads, out_dir);
    if (*se) return cmd_sensitivity(config, draws, sens_seed, factor_lo, factor_hi, margin, out_dir);
    if (*pl) return cmd_plot(csv_path, out_file, title, x_col);
    return 2;
}
