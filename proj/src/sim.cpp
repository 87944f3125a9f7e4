#include "vacnet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vacnet {

std::vector<double> plant_rhs(const Network& net, const std::vector<FlowModel>& models,
                              const std::vector<double>& rho,
                              const std::vector<double>& u) {
    const std::size_t n = net.size();
    std::vector<double> g(n), drho(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = g_total_extended(models[i], rho[i]);
    for (std::size_t i = 0; i < n; ++i) {
        double inflow = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && net.has_edge(j, i)) inflow += net.split[j][i] * g[j];
        drho[i] = (-g[i] + inflow + u[i]) / net.regions[i].length_km;
    }
    return drho;
}

std::vector<double> SimResult::rho_at(double t_query) const {
    return rho[index_at(t_query)];
}

std::size_t SimResult::index_at(double t_query) const {
    auto it = std::lower_bound(t.begin(), t.end(), t_query);
    if (it == t.end()) return t.size() - 1;
    return static_cast<std::size_t>(it - t.begin());
}

double SimResult::max_abs_error(double t_query, const std::vector<double>& rho_ref) const {
    return setpoint_error(rho[index_at(t_query)], rho_ref);
}

double setpoint_error(const std::vector<double>& rho, const std::vector<double>& rho_star) {
    double e = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i)
        e = std::max(e, std::abs(rho[i] - rho_star[i]));
    return e;
}

bool speeds_recovered(const std::vector<FlowModel>& models,
                      const std::vector<double>& rho, double frac) {
    for (std::size_t i = 0; i < models.size(); ++i)
        if (speed(models[i], rho[i]) < frac * models[i].region.free_speed) return false;
    return true;
}

std::vector<std::size_t> congested_regions(const std::vector<FlowModel>& models,
                                           const std::vector<double>& rho,
                                           std::size_t grid_n) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < models.size(); ++i)
        if (rho[i] > congestion_threshold(models[i], grid_n)) out.push_back(i);
    return out;
}

Simulator::Simulator(Network net, std::vector<FlowModel> models,
                     std::vector<ControllerSpec> specs)
    : net_(std::move(net)), models_(std::move(models)), specs_(std::move(specs)) {
    if (models_.size() != net_.size() || specs_.size() != net_.size())
        throw std::invalid_argument("simulator needs one model and one spec per region");
    for (const auto& sp : specs_) sp.check();
}

std::vector<std::size_t> Simulator::state_offsets() const {
    std::vector<std::size_t> off(net_.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        off[i] = acc;
        acc += specs_[i].state_dim();
    }
    return off;
}

std::size_t Simulator::total_controller_dim() const {
    std::size_t acc = 0;
    for (const auto& sp : specs_) acc += sp.state_dim();
    return acc;
}

std::vector<double> Simulator::equilibrium_states(const std::vector<double>& rho_star) const {
    std::vector<double> x;
    x.reserve(total_controller_dim());
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        ControllerState st = equilibrium_state(specs_[i], rho_star[i]);
        x.insert(x.end(), st.begin(), st.end());
    }
    return x;
}

namespace {

// fastest self-rate of a controller's internal dynamics (eigenvalue based;
// the pure integrator channel has eigenvalue 0 and contributes nothing)
double controller_rate(const ControllerSpec& sp) {
    const auto& g = sp.gains;
    switch (sp.scheme) {
    case Scheme::proportional:
    case Scheme::prop_nonlinear:
        return 0.0;
    case Scheme::first_order:
        return 1.0 / g.tau;
    case Scheme::second_order:
        return std::max(1.0 / g.tau, 1.0 / g.kappa);
    case Scheme::bounded_filter:
        // poles of G(s) sit at -1/T2 and -1/T3
        return std::max(1.0 / g.T2, 1.0 / g.T3);
    }
    return 0.0;
}

} // namespace

SimResult Simulator::run(const std::vector<double>& rho0, const std::vector<double>& x0,
                         const SimConfig& cfg) const {
    const std::size_t n = net_.size();
    if (rho0.size() != n) throw std::invalid_argument("rho0 size mismatch");
    if (x0.size() != total_controller_dim())
        throw std::invalid_argument("controller state size mismatch");
    if (!(cfg.dt > 0.0) || cfg.t_end < cfg.dt)
        throw std::invalid_argument("need 0 < dt <= t_end");
    if (cfg.record_every == 0) throw std::invalid_argument("record_every must be >= 1");
    for (std::size_t i = 0; i < n; ++i)
        if (rho0[i] < 0.0 || rho0[i] > net_.regions[i].jam_density)
            throw std::invalid_argument("rho0 outside [0, jam] in region " +
                                        std::to_string(i + 1));

    // step-size precheck: the fastest linear self-rate must stay well inside
    // the stability region
    double max_rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = net_.regions[i];
        double plant = (r.completion_ratio() * r.lipschitz_f + r.lipschitz_d) /
                       r.length_km;
        max_rate = std::max({max_rate, plant, controller_rate(specs_[i])});
    }
    if (cfg.dt * max_rate > 0.1)
        throw std::invalid_argument("dt too large for the fastest time scale: dt*rate = " +
                                    std::to_string(cfg.dt * max_rate));

    const std::vector<std::size_t> off = state_offsets();
    const std::size_t dim = n + total_controller_dim();
    std::vector<double> x(dim);
    std::copy(rho0.begin(), rho0.end(), x.begin());
    std::copy(x0.begin(), x0.end(), x.begin() + static_cast<std::ptrdiff_t>(n));

    std::vector<FlowModel> models = models_; // swaps mutate the working copy
    std::size_t next_swap = 0;
    std::vector<UncertaintySwap> swaps = cfg.swaps;
    std::sort(swaps.begin(), swaps.end(),
              [](const UncertaintySwap& a, const UncertaintySwap& b) { return a.t < b.t; });

    Rng noise_rng(cfg.noise.seed);
    std::vector<double> eps(n, 0.0);

    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));

    SimResult res;
    res.n_regions = n;
    res.state_offsets = off;
    const std::size_t n_rec = steps / cfg.record_every + 2;
    res.t.reserve(n_rec);
    res.rho.reserve(n_rec);
    res.u.reserve(n_rec);
    res.sat_flags.reserve(n_rec);
    res.controller_states.reserve(n_rec);

    // scratch buffers reused across stages
    std::vector<double> g(n), us(n), k1(dim), k2(dim), k3(dim), k4(dim), xs(dim);

    const OverrideWindow* active = nullptr;
    bool noise_on = false;

    // controller outputs for the current stage state; returns saturation bits
    auto eval_inputs = [&](const std::vector<double>& xv, std::uint64_t& sat) {
        sat = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double forced_v = 0.0;
            bool forced = false;
            if (active && active->values[i]) {
                forced_v = *active->values[i];
                forced = true;
            }
            if (forced) {
                us[i] = forced_v;
                continue;
            }
            const ControllerSpec& sp = specs_[i];
            ControllerState st(xv.begin() + static_cast<std::ptrdiff_t>(n + off[i]),
                               xv.begin() +
                                   static_cast<std::ptrdiff_t>(n + off[i] + sp.state_dim()));
            double u = controller_output_raw(sp, st, -xv[i]);
            double clamped = std::max(u, sp.saturation.lower);
            if (sp.saturation.upper) clamped = std::min(clamped, *sp.saturation.upper);
            if (clamped != u) sat |= std::uint64_t{1} << i;
            u = clamped;
            if (noise_on) {
                double noisy = u * (1.0 + cfg.noise.sigma_rel * eps[i]);
                double lo = std::max(0.0, sp.saturation.lower);
                if (noisy < lo) {
                    noisy = lo;
                    sat |= std::uint64_t{1} << i;
                }
                u = noisy;
            }
            us[i] = u;
        }
        return;
    };

    auto rhs = [&](const std::vector<double>& xv, std::vector<double>& out,
                   std::uint64_t& sat) {
        for (std::size_t i = 0; i < n; ++i) g[i] = g_total_extended(models[i], xv[i]);
        eval_inputs(xv, sat);
        for (std::size_t i = 0; i < n; ++i) {
            double inflow = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i && net_.has_edge(j, i)) inflow += net_.split[j][i] * g[j];
            out[i] = (-g[i] + inflow + us[i]) / net_.regions[i].length_km;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const ControllerSpec& sp = specs_[i];
            const std::size_t d = sp.state_dim();
            if (d == 0) continue;
            if (active) {
                // scheme disengaged: internal states frozen
                std::fill(out.begin() + static_cast<std::ptrdiff_t>(n + off[i]),
                          out.begin() + static_cast<std::ptrdiff_t>(n + off[i] + d), 0.0);
                continue;
            }
            ControllerState st(xv.begin() + static_cast<std::ptrdiff_t>(n + off[i]),
                               xv.begin() + static_cast<std::ptrdiff_t>(n + off[i] + d));
            ControllerState dd = controller_derivative(sp, st, -xv[i]);
            std::copy(dd.begin(), dd.end(),
                      out.begin() + static_cast<std::ptrdiff_t>(n + off[i]));
        }
    };

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;

        while (next_swap < swaps.size() && t >= swaps[next_swap].t) {
            if (swaps[next_swap].d.size() != n)
                throw std::invalid_argument("uncertainty swap size mismatch");
            for (std::size_t i = 0; i < n; ++i) models[i].d = swaps[next_swap].d[i];
            ++next_swap;
        }

        active = nullptr;
        for (const auto& ov : cfg.overrides)
            if (t >= ov.t_start && t < ov.t_end) {
                if (ov.values.size() != n)
                    throw std::invalid_argument("override size mismatch");
                active = &ov;
                break;
            }

        noise_on = cfg.noise.enabled && t >= cfg.noise.t_start && t < cfg.noise.t_end;
        if (cfg.noise.enabled)
            for (std::size_t i = 0; i < n; ++i) eps[i] = noise_rng.unit_std_uniform();

        if (k % cfg.record_every == 0 || k == steps) {
            std::uint64_t sat = 0;
            eval_inputs(x, sat);
            res.t.push_back(t);
            res.rho.emplace_back(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
            res.u.push_back(us);
            res.sat_flags.push_back(active ? 0 : sat);
            res.controller_states.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(n),
                                               x.end());
        }
        if (k == steps) break;

        std::uint64_t sat = 0;
        rhs(x, k1, sat);
        for (std::size_t i = 0; i < dim; ++i) xs[i] = x[i] + 0.5 * cfg.dt * k1[i];
        rhs(xs, k2, sat);
        for (std::size_t i = 0; i < dim; ++i) xs[i] = x[i] + 0.5 * cfg.dt * k2[i];
        rhs(xs, k3, sat);
        for (std::size_t i = 0; i < dim; ++i) xs[i] = x[i] + cfg.dt * k3[i];
        rhs(xs, k4, sat);
        for (std::size_t i = 0; i < dim; ++i)
            x[i] += cfg.dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        for (std::size_t i = 0; i < n; ++i) {
            double clamped = std::clamp(x[i], 0.0, net_.regions[i].jam_density);
            // log genuine overshoots, not representational dust
            if (std::abs(clamped - x[i]) > 1e-9 && res.clamp_events.size() < 10000)
                res.clamp_events.push_back({t + cfg.dt, i, x[i], clamped});
            x[i] = clamped;
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw std::runtime_error("state turned non-finite at t = " +
                                         std::to_string(t + cfg.dt) + " h");
    }

    return res;
}

} // namespace vacnet
