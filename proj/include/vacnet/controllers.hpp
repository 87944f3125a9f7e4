#pragma once
// The admission-control scheme library: five controller families, optional
// integrator augmentation, equilibrium calibration, static characteristic
// maps and the dissipation probe used to certify passivity numerically.
//
// Every controller sees the negated density -rho as input and produces an
// admitted inflow u >= 0 (saturation applied at the plant side).

#include <functional>
#include <optional>
#include <vector>

#include "vacnet/linalg.hpp"
#include "vacnet/mfd.hpp"

namespace vacnet {

enum class Scheme {
    proportional,   // u = c + eta*(-rho)
    prop_nonlinear, // u = c + eta*(-rho) - phi(rho), phi = kappa_phi * rho^3
    first_order,    // tau*x' = -(x - gamma*(-rho) - c), u = x + eta*(-rho)
    second_order,   // two-state LTI with output offset c
    bounded_filter, // filtered piecewise-linear demand curve, see below
};

struct ControllerGains {
    double eta = 0.0;
    double c = 0.0;         // calibrated constant (output offset)
    double gamma = 0.0;     // first_order
    double tau = 0.0;       // first_order / second_order
    double kappa = 0.0;     // second_order
    double kappa_phi = 0.001; // cubic coefficient of prop_nonlinear
    // bounded_filter: u = G(s) p_c(rho) - beta_c*rho + c with
    // G(s) = K(1+s T1)/((1+s T2)(1+s T3)) and p_c piecewise linear,
    // flat at p_max below rho_th1, slope -gamma_c on [rho_th1, rho_th2],
    // flat again above rho_th2.
    double K = 0.0, T1 = 0.0, T2 = 0.0, T3 = 0.0;
    double beta_c = 0.0, gamma_c = 0.0;
    double p_max = 0.0, rho_th1 = 0.0, rho_th2 = 0.0;
};

struct Saturation {
    double lower = 0.0;
    std::optional<double> upper; // unbounded unless configured
};

struct ControllerSpec {
    Scheme scheme = Scheme::proportional;
    ControllerGains gains;
    bool with_integrator = false;
    double upsilon = 0.0;   // integrator time constant
    double rho_tilde = 0.0; // integrator target density
    Saturation saturation;  // applied by controller_output
    // optional storage certificate for the second_order scheme (symmetric)
    std::optional<Mat2> storage_m;

    // internal state dimension: scheme states plus one integrator channel
    std::size_t state_dim() const;
    // validates positivity of the gains that must be positive and the
    // bounded_filter admissibility condition gamma_c < beta_c / K
    void check() const; // throws std::invalid_argument
};

using ControllerState = std::vector<double>;

// State with all channels at their equilibrium values for the calibrated
// set-point rho_star (integrator channel at 0).
ControllerState equilibrium_state(const ControllerSpec& spec, double rho_star);

// Throws on dimension mismatch.
ControllerState controller_init(const ControllerSpec& spec, const ControllerState& x0);

// d/dt of the controller state given the measured -rho.
ControllerState controller_derivative(const ControllerSpec& spec,
                                      const ControllerState& state,
                                      double minus_rho);

// Scheme output including the integrator channel, then saturation.
double controller_output(const ControllerSpec& spec, const ControllerState& state,
                         double minus_rho);
// Same but without the saturation stage (used by the dissipation probes).
double controller_output_raw(const ControllerSpec& spec, const ControllerState& state,
                             double minus_rho);

// piecewise-linear demand curve of the bounded_filter scheme
double pc_curve(const ControllerGains& g, double rho);

// Static characteristic maps: steady state and steady output under a frozen
// input -rho_bar.
struct StaticMaps {
    // k_u: constant input -> steady internal state (empty for stateless)
    std::function<ControllerState(double)> k_u;
    // k_uy: constant input -> steady output
    std::function<double(double)> k_uy;
    bool integrator_restricted = false; // maps only defined at rho_bar == rho_tilde
};
StaticMaps static_maps(const ControllerSpec& spec);

// Flow-balance equilibrium inputs: u*_i = g_i(rho*_i) - sum_j w_ji g_j(rho*_j).
std::vector<double> equilibrium_inputs(const Network& net,
                                       const std::vector<FlowModel>& models,
                                       const std::vector<double>& rho_star);

struct CalibrationResult {
    std::vector<double> u_star;
    std::vector<double> constants; // per-region c written back into the specs
};

// Solves each scheme's constant c so that the steady output at rho_star
// equals u_star. When require_nonneg is set, throws if any u* < 0.
CalibrationResult calibrate_setpoint(const Network& net,
                                     const std::vector<FlowModel>& models,
                                     const std::vector<double>& rho_star,
                                     std::vector<ControllerSpec>& specs,
                                     bool require_nonneg = true);

// One sample of a controller trajectory for the dissipation probe.
struct ProbeSample {
    double t = 0.0;
    double rho = 0.0;
    ControllerState state;
    double u = 0.0;
};

struct ProbeReport {
    double max_violation = 0.0; // max over samples of dV - supply*dt
    double scale = 0.0;         // normalization used for the pass threshold
    bool pass = false;
};

// Evaluates the registered storage function along the trajectory and checks
// the dissipation inequality dV/dt <= (d(-rho))(du) - eta*(drho)^2 between
// consecutive samples (trapezoidal supply). Throws for schemes without a
// registered storage (prop_nonlinear, bounded_filter; second_order requires
// storage_m).
ProbeReport dissipation_probe(const ControllerSpec& spec,
                              const std::vector<ProbeSample>& trajectory,
                              double rho_star, double u_star, double eta_supply,
                              double tolerance_rel = 1e-6);

// Storage value of a single controller at the given state (used by the
// network Lyapunov function). Throws when no storage is registered.
double storage_value(const ControllerSpec& spec, const ControllerState& state,
                     const ControllerState& eq_state);
bool has_storage(const ControllerSpec& spec);

// (A, B, C, D) realization of the schemes that are linear in (-rho):
// proportional (0 states), first_order (1), second_order (2).
Lti controller_lti(const ControllerSpec& spec);
// Realization of the bounded_filter transfer function G(s) alone.
Lti bounded_filter_lti(const ControllerGains& g);

} // namespace vacnet
