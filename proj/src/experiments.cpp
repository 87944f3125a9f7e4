#include "vacnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace vacnet {

namespace {

using nlohmann::json;

constexpr double kMinPerHour = 60.0;

[[noreturn]] void fail_key(const std::string& key, const std::string& why) {
    throw std::runtime_error("scenario fixture: key '" + key + "' " + why);
}

const json& need(const json& j, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) fail_key(key, "is missing");
    return *it;
}

double need_num(const json& j, const std::string& key) {
    const json& v = need(j, key);
    if (!v.is_number()) fail_key(key, "must be a number");
    return v.get<double>();
}

std::vector<double> need_vec(const json& j, const std::string& key, std::size_t n) {
    const json& v = need(j, key);
    if (!v.is_array()) fail_key(key, "must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) fail_key(key, "must contain numbers only");
        out.push_back(e.get<double>());
    }
    if (n != 0 && out.size() != n)
        fail_key(key, "has length " + std::to_string(out.size()) +
                          ", expected " + std::to_string(n));
    return out;
}

std::vector<double> opt_vec(const json& j, const std::string& key, std::size_t n) {
    if (!j.contains(key)) return {};
    return need_vec(j, key, n);
}

UncertaintyFn parse_uncertainty(const json& j) {
    const std::string kind = need(j, "type").get<std::string>();
    if (kind == "zero") return UncertaintyFn::none();
    if (kind == "tent")
        return UncertaintyFn::tent(need_num(j, "amplitude"), need_num(j, "peak"));
    if (kind == "tabulated")
        return UncertaintyFn::tabulated(need_vec(j, "rho", 0), need_vec(j, "flow", 0));
    fail_key("type", "must be zero, tent or tabulated, got '" + kind + "'");
}

json uncertainty_to_json(const UncertaintyFn& d) {
    json j;
    switch (d.kind) {
    case UncertaintyFn::Kind::zero:
        j["type"] = "zero";
        break;
    case UncertaintyFn::Kind::tent:
        j["type"] = "tent";
        j["amplitude"] = d.amplitude;
        j["peak"] = d.peak_density;
        break;
    case UncertaintyFn::Kind::tabulated:
        j["type"] = "tabulated";
        j["rho"] = d.table_rho;
        j["flow"] = d.table_flow;
        break;
    }
    return j;
}

Scheme parse_scheme(const std::string& s) {
    if (s == "proportional") return Scheme::proportional;
    if (s == "prop_nonlinear") return Scheme::prop_nonlinear;
    if (s == "first_order") return Scheme::first_order;
    if (s == "second_order") return Scheme::second_order;
    if (s == "bounded_filter") return Scheme::bounded_filter;
    fail_key("scheme", "unknown value '" + s + "'");
}

std::string scheme_name(Scheme s) {
    switch (s) {
    case Scheme::proportional: return "proportional";
    case Scheme::prop_nonlinear: return "prop_nonlinear";
    case Scheme::first_order: return "first_order";
    case Scheme::second_order: return "second_order";
    case Scheme::bounded_filter: return "bounded_filter";
    }
    return "?";
}

ControllerSpec parse_controller(const json& j) {
    ControllerSpec spec;
    spec.scheme = parse_scheme(need(j, "scheme").get<std::string>());
    auto& g = spec.gains;
    switch (spec.scheme) {
    case Scheme::proportional:
        g.eta = need_num(j, "eta");
        break;
    case Scheme::prop_nonlinear:
        g.eta = need_num(j, "eta");
        if (j.contains("kappa_phi")) g.kappa_phi = need_num(j, "kappa_phi");
        break;
    case Scheme::first_order:
        g.eta = need_num(j, "eta");
        g.gamma = need_num(j, "gamma");
        g.tau = need_num(j, "tau");
        break;
    case Scheme::second_order:
        g.eta = need_num(j, "eta");
        g.tau = need_num(j, "tau");
        g.kappa = need_num(j, "kappa");
        break;
    case Scheme::bounded_filter:
        g.K = need_num(j, "K");
        g.T1 = need_num(j, "T1");
        g.T2 = need_num(j, "T2");
        g.T3 = need_num(j, "T3");
        g.beta_c = need_num(j, "beta_c");
        g.gamma_c = need_num(j, "gamma_c");
        g.p_max = need_num(j, "p_max");
        g.rho_th1 = need_num(j, "rho_th1");
        g.rho_th2 = need_num(j, "rho_th2");
        break;
    }
    if (j.contains("c")) g.c = need_num(j, "c");
    if (j.contains("integrator")) {
        const json& ji = j["integrator"];
        spec.with_integrator = true;
        spec.upsilon = need_num(ji, "upsilon");
    }
    if (j.contains("saturation")) {
        const json& js = j["saturation"];
        if (js.contains("lower")) spec.saturation.lower = need_num(js, "lower");
        if (js.contains("upper")) spec.saturation.upper = need_num(js, "upper");
    }
    return spec;
}

json controller_to_json(const ControllerSpec& spec) {
    json j;
    j["scheme"] = scheme_name(spec.scheme);
    const auto& g = spec.gains;
    switch (spec.scheme) {
    case Scheme::proportional:
        j["eta"] = g.eta;
        break;
    case Scheme::prop_nonlinear:
        j["eta"] = g.eta;
        j["kappa_phi"] = g.kappa_phi;
        break;
    case Scheme::first_order:
        j["eta"] = g.eta;
        j["gamma"] = g.gamma;
        j["tau"] = g.tau;
        break;
    case Scheme::second_order:
        j["eta"] = g.eta;
        j["tau"] = g.tau;
        j["kappa"] = g.kappa;
        break;
    case Scheme::bounded_filter:
        j["K"] = g.K;
        j["T1"] = g.T1;
        j["T2"] = g.T2;
        j["T3"] = g.T3;
        j["beta_c"] = g.beta_c;
        j["gamma_c"] = g.gamma_c;
        j["p_max"] = g.p_max;
        j["rho_th1"] = g.rho_th1;
        j["rho_th2"] = g.rho_th2;
        break;
    }
    if (g.c != 0.0) j["c"] = g.c;
    if (spec.with_integrator) j["integrator"] = json{{"upsilon", spec.upsilon}};
    if (spec.saturation.lower != 0.0 || spec.saturation.upper) {
        json js;
        js["lower"] = spec.saturation.lower;
        if (spec.saturation.upper) js["upper"] = *spec.saturation.upper;
        j["saturation"] = js;
    }
    return j;
}

// tail index of the last recorded sample strictly before t_min
std::size_t index_before(const std::vector<double>& t, double t_query) {
    auto it = std::lower_bound(t.begin(), t.end(), t_query);
    if (it == t.begin()) return 0;
    return static_cast<std::size_t>(it - t.begin()) - 1;
}

} // namespace

const ScenarioCase& Scenario::pick_case(const std::string& name) const {
    const std::string& key = name.empty() ? default_case : name;
    auto it = cases.find(key);
    if (it == cases.end())
        throw std::runtime_error("scenario has no case named '" + key + "'");
    return it->second;
}

Scenario load_scenario(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("scenario fixture " + path + ": " + e.what());
    }

    Scenario sc;
    sc.name = need(j, "name").get<std::string>();

    const json& regions = need(j, "regions");
    if (!regions.is_array() || regions.size() < 2)
        fail_key("regions", "must be an array of at least two regions");
    const std::size_t n = regions.size();
    for (const auto& r : regions) {
        RegionParams p;
        if (r.contains("name")) p.name = r["name"].get<std::string>();
        p.length_km = need_num(r, "length_km");
        p.trip_length_km = need_num(r, "trip_length_km");
        p.free_speed = need_num(r, "free_speed");
        p.critical_density = need_num(r, "critical_density");
        p.jam_density = need_num(r, "jam_density");
        p.lipschitz_f = need_num(r, "lipschitz_f");
        p.lipschitz_d = need_num(r, "lipschitz_d");
        sc.net.regions.push_back(p);
    }

    const json& split = need(j, "split");
    if (!split.is_array() || split.size() != n)
        fail_key("split", "must be an n x n array");
    for (const auto& row : split) {
        std::vector<double> r;
        for (const auto& e : row) r.push_back(e.get<double>());
        if (r.size() != n) fail_key("split", "row length differs from region count");
        sc.net.split.push_back(std::move(r));
    }

    sc.rho_star = need_vec(j, "rho_star", n);

    sc.uncertainty.assign(n, UncertaintyFn::none());
    if (j.contains("uncertainty")) {
        const json& unc = j["uncertainty"];
        if (!unc.is_array() || unc.size() != n)
            fail_key("uncertainty", "must list one entry per region");
        for (std::size_t i = 0; i < n; ++i)
            sc.uncertainty[i] = parse_uncertainty(unc[i]);
    }

    const json& cases = need(j, "cases");
    if (!cases.is_object() || cases.empty())
        fail_key("cases", "must be a non-empty object");
    for (auto it = cases.begin(); it != cases.end(); ++it) {
        ScenarioCase cs;
        const json& controllers = need(it.value(), "controllers");
        if (!controllers.is_array() || controllers.size() != n)
            fail_key("cases." + it.key(), "must list one controller per region");
        for (const auto& cj : controllers) cs.specs.push_back(parse_controller(cj));
        cs.rho_star = opt_vec(it.value(), "rho_star", n);
        sc.cases.emplace(it.key(), std::move(cs));
    }
    sc.default_case = j.contains("default_case")
                          ? j["default_case"].get<std::string>()
                          : sc.cases.begin()->first;
    if (sc.cases.find(sc.default_case) == sc.cases.end())
        fail_key("default_case", "names a case that does not exist");

    if (j.contains("overrides")) {
        for (const auto& oj : j["overrides"]) {
            OverrideWindow w;
            w.t_start = need_num(oj, "t_start_min") / kMinPerHour;
            w.t_end = need_num(oj, "t_end_min") / kMinPerHour;
            const json& vals = need(oj, "values");
            if (!vals.is_array() || vals.size() != n)
                fail_key("overrides.values", "must list one entry per region");
            for (const auto& v : vals) {
                if (v.is_null())
                    w.values.emplace_back(std::nullopt);
                else
                    w.values.emplace_back(v.get<double>());
            }
            sc.overrides.push_back(std::move(w));
        }
    }

    sc.printed_constants = opt_vec(j, "printed_constants", n);
    sc.printed_eta = opt_vec(j, "printed_eta", n);
    if (j.contains("row_sum_tolerance")) sc.row_sum_tolerance = need_num(j, "row_sum_tolerance");
    sc.v_dl_max = opt_vec(j, "v_dl_max", n);
    sc.v_dl_min = opt_vec(j, "v_dl_min", n);
    if (j.contains("horizon_min")) sc.horizon_min = need_num(j, "horizon_min");
    if (j.contains("dt_hours")) sc.dt_hours = need_num(j, "dt_hours");
    if (j.contains("record_every"))
        sc.record_every = j["record_every"].get<std::size_t>();
    return sc;
}

std::string scenario_to_json(const Scenario& sc) {
    json j;
    j["name"] = sc.name;
    json regions = json::array();
    for (const auto& p : sc.net.regions) {
        json r;
        if (!p.name.empty()) r["name"] = p.name;
        r["length_km"] = p.length_km;
        r["trip_length_km"] = p.trip_length_km;
        r["free_speed"] = p.free_speed;
        r["critical_density"] = p.critical_density;
        r["jam_density"] = p.jam_density;
        r["lipschitz_f"] = p.lipschitz_f;
        r["lipschitz_d"] = p.lipschitz_d;
        regions.push_back(r);
    }
    j["regions"] = regions;
    j["split"] = sc.net.split;
    j["rho_star"] = sc.rho_star;
    json unc = json::array();
    for (const auto& d : sc.uncertainty) unc.push_back(uncertainty_to_json(d));
    j["uncertainty"] = unc;
    json cases;
    for (const auto& [name, cs] : sc.cases) {
        json cj;
        json arr = json::array();
        for (const auto& s : cs.specs) arr.push_back(controller_to_json(s));
        cj["controllers"] = arr;
        if (!cs.rho_star.empty()) cj["rho_star"] = cs.rho_star;
        cases[name] = cj;
    }
    j["cases"] = cases;
    j["default_case"] = sc.default_case;
    json ovs = json::array();
    for (const auto& w : sc.overrides) {
        json o;
        o["t_start_min"] = w.t_start * kMinPerHour;
        o["t_end_min"] = w.t_end * kMinPerHour;
        json vals = json::array();
        for (const auto& v : w.values) {
            if (v)
                vals.push_back(*v);
            else
                vals.push_back(nullptr);
        }
        o["values"] = vals;
        ovs.push_back(o);
    }
    j["overrides"] = ovs;
    if (!sc.printed_constants.empty()) j["printed_constants"] = sc.printed_constants;
    if (!sc.printed_eta.empty()) j["printed_eta"] = sc.printed_eta;
    j["row_sum_tolerance"] = sc.row_sum_tolerance;
    if (!sc.v_dl_max.empty()) j["v_dl_max"] = sc.v_dl_max;
    if (!sc.v_dl_min.empty()) j["v_dl_min"] = sc.v_dl_min;
    j["horizon_min"] = sc.horizon_min;
    j["dt_hours"] = sc.dt_hours;
    j["record_every"] = sc.record_every;
    return j.dump(2) + "\n";
}

std::vector<FlowModel> scenario_models(const Scenario& sc, bool with_uncertainty) {
    std::vector<FlowModel> models;
    models.reserve(sc.net.size());
    for (std::size_t i = 0; i < sc.net.size(); ++i) {
        FlowModel m = FlowModel::nominal(sc.net.regions[i]);
        if (with_uncertainty) m.d = sc.uncertainty[i];
        models.push_back(std::move(m));
    }
    return models;
}

ScenarioRunResult run_scenario(const Scenario& sc, const ScenarioRunConfig& cfg) {
    const ScenarioCase& cs = sc.pick_case(cfg.case_name);
    std::vector<ControllerSpec> specs = cs.specs;

    auto models = scenario_models(sc, cfg.with_uncertainty);
    const std::vector<double>& rho_star = sc.case_rho_star(cs);

    ScenarioRunResult out;
    out.rho_star = rho_star;
    if (cfg.use_printed_constants) {
        if (sc.printed_constants.size() != sc.net.size())
            throw std::runtime_error("scenario carries no printed constants");
        for (std::size_t i = 0; i < specs.size(); ++i) {
            specs[i].gains.c = sc.printed_constants[i];
            if (specs[i].with_integrator) specs[i].rho_tilde = rho_star[i];
        }
        out.constants = sc.printed_constants;
    } else {
        auto cal = calibrate_setpoint(sc.net, models, rho_star, specs);
        out.u_star = std::move(cal.u_star);
        out.constants = std::move(cal.constants);
    }

    Simulator sim(sc.net, models, specs);
    SimConfig sim_cfg;
    sim_cfg.t_end = (cfg.horizon_min > 0 ? cfg.horizon_min : sc.horizon_min) / kMinPerHour;
    sim_cfg.dt = cfg.dt_hours > 0 ? cfg.dt_hours : sc.dt_hours;
    sim_cfg.record_every = sc.record_every;
    sim_cfg.noise = cfg.noise;
    if (cfg.with_override) sim_cfg.overrides = sc.overrides;

    std::vector<double> rho0(sc.net.size());
    for (std::size_t i = 0; i < rho0.size(); ++i) rho0[i] = cfg.rho0_frac * rho_star[i];

    out.sim = sim.run(rho0, sim.equilibrium_states(rho_star), sim_cfg);
    out.specs = std::move(specs);
    return out;
}

MonteCarloReport monte_carlo_sweep(const Scenario& sc, const MonteCarloConfig& cfg) {
    const ScenarioCase& cs = sc.pick_case(cfg.case_name);
    const std::size_t n = sc.net.size();

    // constants fixed once, calibrated on the unperturbed model
    std::vector<ControllerSpec> specs = cs.specs;
    auto nominal = scenario_models(sc, false);
    const std::vector<double>& rho_star = sc.case_rho_star(cs);
    calibrate_setpoint(sc.net, nominal, rho_star, specs);

    SimConfig sim_cfg;
    sim_cfg.t_end = cfg.horizon_min / kMinPerHour;
    sim_cfg.dt = cfg.dt_hours;
    sim_cfg.record_every = cfg.record_every;
    sim_cfg.overrides = sc.overrides;

    MonteCarloReport report;
    report.runs.resize(cfg.n_runs);

    auto worker = [&](std::size_t idx) {
        const std::uint64_t seed = cfg.seed + idx;
        Rng rng(seed);
        auto models = nominal;
        for (std::size_t i = 0; i < n; ++i)
            models[i].d = gen_uncertainty(sc.net.regions[i], rng.raw(),
                                          cfg.amplitude_max, cfg.peak_frac_lo,
                                          cfg.peak_frac_hi);

        Simulator sim(sc.net, models, specs);
        // run starts at the nominal set-point; the mismatched uncertainty
        // pulls it to a shifted steady state before the override hits
        auto res = sim.run(rho_star, sim.equilibrium_states(rho_star), sim_cfg);

        MonteCarloRun run;
        run.seed = seed;
        const std::size_t ref_idx = index_before(res.t, cfg.reference_time_min / kMinPerHour);
        const std::vector<double>& ref = res.rho[ref_idx];

        run.error_series.resize(res.t.size());
        for (std::size_t k = 0; k < res.t.size(); ++k)
            run.error_series[k] = setpoint_error(res.rho[k], ref);
        for (double tm : cfg.sample_times_min)
            run.errors.push_back(run.error_series[res.index_at(tm / kMinPerHour)]);

        for (std::size_t k = 0; k < res.t.size(); ++k)
            for (std::size_t i = 0; i < n; ++i)
                run.max_density_ratio = std::max(
                    run.max_density_ratio, res.rho[k][i] / sc.net.regions[i].jam_density);
        for (std::size_t i = 0; i < n; ++i)
            if (res.rho.back()[i] >= 0.999 * sc.net.regions[i].jam_density)
                run.gridlocked = true;

        // diverging: still strictly increasing at the end of the run, has
        // been for at least 10 minutes, and the final error is material.
        // Sub-veh/km creep is expected: the slow schemes keep settling for
        // most of the horizon, so monotone growth alone is not divergence.
        if (!res.t.empty() && run.error_series.back() >= 1.0) {
            double streak_start = res.t.back();
            for (std::size_t k = res.t.size(); k-- > 1;) {
                if (run.error_series[k] <= run.error_series[k - 1]) break;
                streak_start = res.t[k - 1];
            }
            if ((res.t.back() - streak_start) * kMinPerHour >= 10.0) run.diverging = true;
        }

        if (idx == 0) {
            std::vector<double> t_min(res.t.size());
            for (std::size_t k = 0; k < res.t.size(); ++k)
                t_min[k] = res.t[k] * kMinPerHour;
            report.t_min = std::move(t_min);
        }
        report.runs[idx] = std::move(run);
    };

    unsigned n_threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
    if (n_threads == 0) n_threads = 1;
    n_threads = std::min<unsigned>(n_threads, std::max<std::size_t>(cfg.n_runs, 1));
    if (n_threads <= 1) {
        for (std::size_t idx = 0; idx < cfg.n_runs; ++idx) worker(idx);
    } else {
        std::vector<std::thread> pool;
        std::mutex err_mutex;
        std::string first_error;
        for (unsigned w = 0; w < n_threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t idx = w; idx < cfg.n_runs; idx += n_threads) {
                    try {
                        worker(idx);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lk(err_mutex);
                        if (first_error.empty()) first_error = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (!first_error.empty()) throw std::runtime_error(first_error);
    }

    report.envelope.assign(report.t_min.size(), 0.0);
    for (const auto& run : report.runs)
        for (std::size_t k = 0; k < report.envelope.size() && k < run.error_series.size(); ++k)
            report.envelope[k] = std::max(report.envelope[k], run.error_series[k]);
    report.worst_errors.assign(cfg.sample_times_min.size(), 0.0);
    for (const auto& run : report.runs)
        for (std::size_t k = 0; k < report.worst_errors.size(); ++k)
            report.worst_errors[k] = std::max(report.worst_errors[k], run.errors[k]);
    for (std::size_t idx = 0; idx < report.runs.size(); ++idx)
        if (report.runs[idx].diverging || report.runs[idx].gridlocked)
            report.flagged.push_back(idx);
    return report;
}

SensitivityReport gain_sensitivity(const Scenario& sc, const SensitivityConfig& cfg) {
    const std::size_t n = sc.net.size();
    SynthesisOptions synth;
    synth.interpretation = cfg.interpretation;
    synth.margin = cfg.margin;
    synth.xi_mode = XiMode::coordinate_descent;
    if (!sc.v_dl_max.empty()) synth.v_dl = sc.v_dl_max;

    SensitivityReport report;
    report.base = synthesize_gains(sc.net, synth);
    if (!report.base.check.pass)
        throw std::runtime_error("synthesized gains fail their own margin check");

    auto models = scenario_models(sc, true);
    const std::vector<double>& rho_star = sc.rho_star;

    SimConfig sim_cfg;
    sim_cfg.t_end = cfg.horizon_min / kMinPerHour;
    sim_cfg.dt = cfg.dt_hours;
    sim_cfg.record_every = cfg.record_every;

    Rng rng(cfg.seed);
    MarginOptions margin_opts;
    margin_opts.interpretation = cfg.interpretation;
    margin_opts.xi = report.base.xi;
    if (!sc.v_dl_max.empty()) margin_opts.v_dl = sc.v_dl_max;

    for (std::size_t k = 0; k < cfg.n_draws; ++k) {
        SensitivityDraw draw;
        for (int attempt = 0; attempt < 64; ++attempt) {
            draw.factors.clear();
            draw.eta.clear();
            for (std::size_t i = 0; i < n; ++i) {
                double f = rng.uniform(cfg.factor_lo, cfg.factor_hi);
                draw.factors.push_back(f);
                draw.eta.push_back(report.base.eta[i] * f);
            }
            draw.certified = stability_margin(sc.net, draw.eta, margin_opts).pass;
            if (draw.certified) break;
        }
        if (!draw.certified)
            throw std::runtime_error("sensitivity draw failed the margin check repeatedly");

        std::vector<ControllerSpec> specs(n);
        for (std::size_t i = 0; i < n; ++i) {
            specs[i].scheme = Scheme::proportional;
            specs[i].gains.eta = draw.eta[i];
        }
        calibrate_setpoint(sc.net, models, rho_star, specs);
        Simulator sim(sc.net, models, specs);
        std::vector<double> rho0(n);
        for (std::size_t i = 0; i < n; ++i) rho0[i] = cfg.rho0_frac * rho_star[i];
        auto res = sim.run(rho0, sim.equilibrium_states(rho_star), sim_cfg);

        draw.settle_error = res.max_abs_error(cfg.settle_time_min / kMinPerHour, rho_star);
        draw.final_error = setpoint_error(res.rho.back(), rho_star);
        report.worst_settle_error = std::max(report.worst_settle_error, draw.settle_error);
        report.draws.push_back(std::move(draw));
    }
    return report;
}

std::vector<LyapunovSample> lyapunov_trace(const Simulator& sim, const SimResult& res,
                                           const std::vector<double>& rho_star) {
    const std::size_t n = sim.network().size();
    if (rho_star.size() != n)
        throw std::invalid_argument("lyapunov_trace: rho_star size mismatch");
    const auto offsets = sim.state_offsets();
    std::vector<ControllerState> eq(n);
    for (std::size_t i = 0; i < n; ++i)
        eq[i] = equilibrium_state(sim.specs()[i], rho_star[i]);

    std::vector<LyapunovSample> out;
    out.reserve(res.t.size());
    for (std::size_t k = 0; k < res.t.size(); ++k) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double drho = res.rho[k][i] - rho_star[i];
            v += 0.5 * sim.network().regions[i].length_km * drho * drho;
            const std::size_t dim = sim.specs()[i].state_dim();
            if (dim == 0) {
                if (has_storage(sim.specs()[i]))
                    v += storage_value(sim.specs()[i], {}, eq[i]);
                continue;
            }
            ControllerState st(res.controller_states[k].begin() + offsets[i],
                               res.controller_states[k].begin() + offsets[i] + dim);
            v += storage_value(sim.specs()[i], st, eq[i]);
        }
        out.push_back({res.t[k], v});
    }
    return out;
}

RandomNetwork random_feasible_network(const RandomNetworkConfig& cfg) {
    if (cfg.n < 3) throw std::invalid_argument("random network needs >= 3 regions");
    Rng rng(cfg.seed);
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const std::size_t n = cfg.n;
        RandomNetwork out;
        out.net.regions.resize(n);
        std::vector<double> length(n), trip(n), vf(n), jam(n), crit(n);
        for (std::size_t i = 0; i < n; ++i) length[i] = rng.uniform(0.8, 1.3);
        for (std::size_t i = 0; i < n; ++i) trip[i] = rng.uniform(0.3, 0.6);
        for (std::size_t i = 0; i < n; ++i) vf[i] = rng.uniform(28.0, 45.0);
        for (std::size_t i = 0; i < n; ++i) jam[i] = rng.uniform(95.0, 140.0);
        for (std::size_t i = 0; i < n; ++i) crit[i] = jam[i] * rng.uniform(0.18, 0.28);
        for (std::size_t i = 0; i < n; ++i) {
            auto& r = out.net.regions[i];
            r.length_km = length[i];
            r.trip_length_km = trip[i];
            r.free_speed = vf[i];
            r.jam_density = jam[i];
            r.critical_density = crit[i];
            r.lipschitz_f = std::max(r.free_speed, r.congested_slope());
            r.lipschitz_d = 0.0;
        }
        // ring with one chord per row: self share plus the two next regions
        out.net.split.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            const double a = rng.uniform(0.2, 0.5);
            const double b = rng.uniform(0.2, (1.0 - a) * 0.9);
            out.net.split[i][i] = a;
            out.net.split[i][(i + 1) % n] = b;
            out.net.split[i][(i + 2) % n] = 1.0 - a - b;
        }
        out.rho_star.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out.rho_star[i] = crit[i] * rng.uniform(0.5, 0.9);

        out.models.clear();
        for (std::size_t i = 0; i < n; ++i)
            out.models.push_back(FlowModel::nominal(out.net.regions[i]));
        out.u_star = equilibrium_inputs(out.net, out.models, out.rho_star);
        bool feasible = true;
        for (double u : out.u_star)
            if (u < 0.0) feasible = false;
        if (!feasible) continue;

        SynthesisOptions synth;
        synth.interpretation = LipschitzInterpretation::max_slope;
        synth.margin = cfg.margin;
        out.eta = synthesize_gains(out.net, synth).eta;
        return out;
    }
    throw std::runtime_error("no feasible random network within the attempt budget");
}

CsvTable trace_csv(const Simulator& sim, const SimResult& res,
                   const std::vector<double>& rho_star) {
    const std::size_t n = res.n_regions;
    bool lyap_ok = rho_star.size() == n;
    for (std::size_t i = 0; lyap_ok && i < n; ++i)
        if (!has_storage(sim.specs()[i])) lyap_ok = false;
    std::vector<LyapunovSample> ly;
    if (lyap_ok) ly = lyapunov_trace(sim, res, rho_star);

    CsvTable csv;
    csv.columns.push_back("t_min");
    for (std::size_t i = 0; i < n; ++i) csv.columns.push_back("rho_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < n; ++i) csv.columns.push_back("u_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < n; ++i) csv.columns.push_back("speed_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < n; ++i) csv.columns.push_back("g_" + std::to_string(i + 1));
    csv.columns.push_back("lyapunov");
    csv.columns.push_back("sat_flags");

    for (std::size_t k = 0; k < res.t.size(); ++k) {
        std::vector<double> row;
        row.reserve(csv.columns.size());
        row.push_back(res.t[k] * kMinPerHour);
        for (std::size_t i = 0; i < n; ++i) row.push_back(res.rho[k][i]);
        for (std::size_t i = 0; i < n; ++i) row.push_back(res.u[k][i]);
        for (std::size_t i = 0; i < n; ++i)
            row.push_back(speed(sim.models()[i], res.rho[k][i]));
        for (std::size_t i = 0; i < n; ++i)
            row.push_back(g_total_extended(sim.models()[i], res.rho[k][i]));
        row.push_back(lyap_ok ? ly[k].value : std::numeric_limits<double>::quiet_NaN());
        row.push_back(static_cast<double>(res.sat_flags[k]));
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

} // namespace vacnet
