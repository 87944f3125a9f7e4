#include "vacnet/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vacnet {

namespace {

std::size_t scheme_dim(Scheme s) {
    switch (s) {
    case Scheme::proportional:
    case Scheme::prop_nonlinear:
        return 0;
    case Scheme::first_order:
        return 1;
    case Scheme::second_order:
    case Scheme::bounded_filter:
        return 2;
    }
    return 0;
}

// denominator coefficients of the bounded_filter transfer function in
// controllable canonical form: s^2 + a1 s + a0, numerator b1 s + b0
struct BfCoeffs {
    double a0, a1, b0, b1;
};

BfCoeffs bf_coeffs(const ControllerGains& g) {
    double a0 = 1.0 / (g.T2 * g.T3);
    double a1 = (g.T2 + g.T3) / (g.T2 * g.T3);
    return {a0, a1, g.K * a0, g.K * g.T1 * a0};
}

} // namespace

std::size_t ControllerSpec::state_dim() const {
    return scheme_dim(scheme) + (with_integrator ? 1 : 0);
}

void ControllerSpec::check() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("controller spec: ") + what);
    };
    need(gains.eta >= 0.0, "eta must be >= 0");
    switch (scheme) {
    case Scheme::proportional:
        break;
    case Scheme::prop_nonlinear:
        need(gains.kappa_phi >= 0.0, "kappa_phi must be >= 0");
        break;
    case Scheme::first_order:
        need(gains.tau > 0.0, "tau must be > 0");
        need(gains.gamma > 0.0, "gamma must be > 0");
        break;
    case Scheme::second_order:
        need(gains.tau > 0.0, "tau must be > 0");
        need(gains.kappa > 0.0, "kappa must be > 0");
        break;
    case Scheme::bounded_filter:
        need(gains.K > 0.0, "K must be > 0");
        need(gains.T1 > 0.0 && gains.T2 > 0.0 && gains.T3 > 0.0,
             "T1, T2, T3 must be > 0");
        need(gains.beta_c > 0.0, "beta_c must be > 0");
        need(gains.gamma_c >= 0.0, "gamma_c must be >= 0");
        need(gains.rho_th2 > gains.rho_th1 && gains.rho_th1 >= 0.0,
             "thresholds must satisfy 0 <= rho_th1 < rho_th2");
        need(gains.p_max >= 0.0, "p_max must be >= 0");
        need(gains.gamma_c < gains.beta_c / gains.K,
             "demand slope must stay below beta_c / K");
        break;
    }
    if (with_integrator) need(upsilon > 0.0, "upsilon must be > 0");
    if (saturation.upper && *saturation.upper < saturation.lower)
        throw std::invalid_argument("controller spec: empty saturation interval");
}

double pc_curve(const ControllerGains& g, double rho) {
    if (rho < g.rho_th1) return g.p_max;
    if (rho > g.rho_th2) return g.p_max - g.gamma_c * (g.rho_th2 - g.rho_th1);
    return g.p_max - g.gamma_c * (rho - g.rho_th1);
}

ControllerState equilibrium_state(const ControllerSpec& spec, double rho_star) {
    ControllerState st;
    const auto& g = spec.gains;
    switch (spec.scheme) {
    case Scheme::proportional:
    case Scheme::prop_nonlinear:
        break;
    case Scheme::first_order:
        st = {g.gamma * (-rho_star) + g.c};
        break;
    case Scheme::second_order:
        st = {-rho_star, -rho_star};
        break;
    case Scheme::bounded_filter: {
        auto k = bf_coeffs(g);
        st = {pc_curve(g, rho_star) / k.a0, 0.0};
        break;
    }
    }
    if (spec.with_integrator) st.push_back(0.0);
    return st;
}

ControllerState controller_init(const ControllerSpec& spec, const ControllerState& x0) {
    if (x0.size() != spec.state_dim())
        throw std::invalid_argument("controller state dimension mismatch");
    return x0;
}

ControllerState controller_derivative(const ControllerSpec& spec,
                                      const ControllerState& state, double minus_rho) {
    ControllerState d;
    const auto& g = spec.gains;
    const double rho = -minus_rho;
    switch (spec.scheme) {
    case Scheme::proportional:
    case Scheme::prop_nonlinear:
        break;
    case Scheme::first_order:
        d = {-(state[0] - g.gamma * minus_rho - g.c) / g.tau};
        break;
    case Scheme::second_order:
        d = {(-state[0] + minus_rho) / g.tau, (state[0] - state[1]) / g.kappa};
        break;
    case Scheme::bounded_filter: {
        auto k = bf_coeffs(g);
        d = {state[1], -k.a0 * state[0] - k.a1 * state[1] + pc_curve(g, rho)};
        break;
    }
    }
    if (spec.with_integrator) d.push_back((spec.rho_tilde - rho) / spec.upsilon);
    return d;
}

double controller_output_raw(const ControllerSpec& spec, const ControllerState& state,
                             double minus_rho) {
    const auto& g = spec.gains;
    const double rho = -minus_rho;
    double u = 0.0;
    switch (spec.scheme) {
    case Scheme::proportional:
        u = g.c + g.eta * minus_rho;
        break;
    case Scheme::prop_nonlinear:
        u = g.c + g.eta * minus_rho - g.kappa_phi * rho * rho * rho;
        break;
    case Scheme::first_order:
        u = state[0] + g.eta * minus_rho;
        break;
    case Scheme::second_order:
        u = state[1] + g.eta * minus_rho + g.c;
        break;
    case Scheme::bounded_filter: {
        auto k = bf_coeffs(g);
        u = k.b0 * state[0] + k.b1 * state[1] - g.beta_c * rho + g.c;
        break;
    }
    }
    if (spec.with_integrator) u += state.back();
    return u;
}

double controller_output(const ControllerSpec& spec, const ControllerState& state,
                         double minus_rho) {
    double u = controller_output_raw(spec, state, minus_rho);
    u = std::max(u, spec.saturation.lower);
    if (spec.saturation.upper) u = std::min(u, *spec.saturation.upper);
    return u;
}

StaticMaps static_maps(const ControllerSpec& spec) {
    StaticMaps maps;
    maps.integrator_restricted = spec.with_integrator;
    ControllerSpec s = spec;
    maps.k_u = [s](double minus_rho_bar) {
        return equilibrium_state(s, -minus_rho_bar);
    };
    maps.k_uy = [s](double minus_rho_bar) {
        return controller_output_raw(s, equilibrium_state(s, -minus_rho_bar),
                                     minus_rho_bar);
    };
    return maps;
}

std::vector<double> equilibrium_inputs(const Network& net,
                                       const std::vector<FlowModel>& models,
                                       const std::vector<double>& rho_star) {
    const std::size_t n = net.size();
    if (models.size() != n || rho_star.size() != n)
        throw std::invalid_argument("equilibrium_inputs: size mismatch");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = g_total(models[i], rho_star[i]);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        double inflow = 0.0;
        for (std::size_t j : net.predecessors(i)) inflow += net.split[j][i] * g[j];
        u[i] = g[i] - inflow;
    }
    return u;
}

CalibrationResult calibrate_setpoint(const Network& net,
                                     const std::vector<FlowModel>& models,
                                     const std::vector<double>& rho_star,
                                     std::vector<ControllerSpec>& specs,
                                     bool require_nonneg) {
    if (specs.size() != net.size())
        throw std::invalid_argument("calibrate_setpoint: one spec per region required");
    CalibrationResult res;
    res.u_star = equilibrium_inputs(net, models, rho_star);
    if (require_nonneg)
        for (std::size_t i = 0; i < res.u_star.size(); ++i)
            if (res.u_star[i] < 0.0)
                throw std::runtime_error("set-point needs negative inflow in region " +
                                         std::to_string(i + 1));
    res.constants.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto& sp = specs[i];
        const double rs = rho_star[i], us = res.u_star[i];
        auto& g = sp.gains;
        double c = 0.0;
        switch (sp.scheme) {
        case Scheme::proportional:
            c = us + g.eta * rs;
            break;
        case Scheme::prop_nonlinear:
            c = us + g.eta * rs + g.kappa_phi * rs * rs * rs;
            break;
        case Scheme::first_order:
            c = us + (g.gamma + g.eta) * rs;
            break;
        case Scheme::second_order:
            c = us + (1.0 + g.eta) * rs;
            break;
        case Scheme::bounded_filter:
            c = us + g.beta_c * rs - g.K * pc_curve(g, rs);
            break;
        }
        g.c = c;
        res.constants[i] = c;
        if (sp.with_integrator) sp.rho_tilde = rs;
    }
    return res;
}

bool has_storage(const ControllerSpec& spec) {
    switch (spec.scheme) {
    case Scheme::proportional:
    case Scheme::first_order:
        return true;
    case Scheme::second_order:
        return spec.storage_m.has_value();
    case Scheme::prop_nonlinear:
    case Scheme::bounded_filter:
        return false;
    }
    return false;
}

double storage_value(const ControllerSpec& spec, const ControllerState& state,
                     const ControllerState& eq_state) {
    if (!has_storage(spec))
        throw std::runtime_error("no storage certificate registered for this scheme");
    if (state.size() != spec.state_dim() || eq_state.size() != spec.state_dim())
        throw std::invalid_argument("storage_value: state dimension mismatch");
    double v = 0.0;
    const auto& g = spec.gains;
    switch (spec.scheme) {
    case Scheme::proportional:
        break; // memoryless, zero storage
    case Scheme::first_order: {
        double dx = state[0] - eq_state[0];
        v = g.tau / (2.0 * g.gamma) * dx * dx;
        break;
    }
    case Scheme::second_order: {
        const Mat2& m = *spec.storage_m;
        double d0 = state[0] - eq_state[0], d1 = state[1] - eq_state[1];
        v = d0 * (m[0][0] * d0 + m[0][1] * d1) + d1 * (m[1][0] * d0 + m[1][1] * d1);
        break;
    }
    default:
        break;
    }
    if (spec.with_integrator) {
        double dz = state.back() - eq_state.back();
        v += spec.upsilon / 2.0 * dz * dz;
    }
    return v;
}

ProbeReport dissipation_probe(const ControllerSpec& spec,
                              const std::vector<ProbeSample>& trajectory,
                              double rho_star, double u_star, double eta_supply,
                              double tolerance_rel) {
    if (trajectory.size() < 2)
        throw std::invalid_argument("dissipation_probe: need at least two samples");
    const ControllerState eq = equilibrium_state(spec, rho_star);

    ProbeReport rep;
    double scale = 1.0;
    auto supply = [&](const ProbeSample& s) {
        double drho = s.rho - rho_star;
        double du = s.u - u_star;
        return (-drho) * du - eta_supply * drho * drho;
    };
    double v_prev = storage_value(spec, trajectory[0].state, eq);
    double s_prev = supply(trajectory[0]);
    scale = std::max(scale, std::abs(v_prev));
    for (std::size_t k = 1; k < trajectory.size(); ++k) {
        double v = storage_value(spec, trajectory[k].state, eq);
        double s = supply(trajectory[k]);
        double dt = trajectory[k].t - trajectory[k - 1].t;
        double violation = (v - v_prev) - 0.5 * (s + s_prev) * dt;
        rep.max_violation = std::max(rep.max_violation, violation);
        scale = std::max({scale, std::abs(v), std::abs(s) * dt});
        v_prev = v;
        s_prev = s;
    }
    rep.scale = scale;
    rep.pass = rep.max_violation <= tolerance_rel * scale;
    return rep;
}

Lti controller_lti(const ControllerSpec& spec) {
    const auto& g = spec.gains;
    Lti sys;
    switch (spec.scheme) {
    case Scheme::proportional:
        sys.n = 0;
        sys.D = g.eta;
        return sys;
    case Scheme::first_order:
        sys.n = 1;
        sys.A[0][0] = -1.0 / g.tau;
        sys.B[0] = g.gamma / g.tau;
        sys.C[0] = 1.0;
        sys.D = g.eta;
        return sys;
    case Scheme::second_order:
        sys.n = 2;
        sys.A = {{{-1.0 / g.tau, 0.0}, {1.0 / g.kappa, -1.0 / g.kappa}}};
        sys.B = {1.0 / g.tau, 0.0};
        sys.C = {0.0, 1.0};
        sys.D = g.eta;
        return sys;
    default:
        throw std::invalid_argument("controller_lti: scheme is not linear in -rho");
    }
}

Lti bounded_filter_lti(const ControllerGains& g) {
    auto k = bf_coeffs(g);
    Lti sys;
    sys.n = 2;
    sys.A = {{{0.0, 1.0}, {-k.a0, -k.a1}}};
    sys.B = {0.0, 1.0};
    sys.C = {k.b0, k.b1};
    sys.D = 0.0;
    return sys;
}

} // namespace vacnet
