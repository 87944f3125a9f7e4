#pragma once
// Closed-loop network simulation: joint plant and controller state advanced
// with classical RK4 on a fixed step, with a disturbance scheduler for input
// overrides (controller states frozen while active), actuation noise windows
// and mid-run uncertainty swaps. Saturation flags and density clamp events
// are logged per step.
//
// Units: time in hours, lengths in km, densities in veh/km, flows in veh/h.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vacnet/controllers.hpp"
#include "vacnet/io.hpp"
#include "vacnet/mfd.hpp"
#include "vacnet/model.hpp"

namespace vacnet {

// Replaces u_i by a fixed value on [t_start, t_end); controller states do
// not advance while the override is active.
struct OverrideWindow {
    double t_start = 0.0; // hours
    double t_end = 0.0;
    std::vector<std::optional<double>> values; // per region; nullopt = untouched
};

// u <- max(0, u * (1 + sigma_rel * eps)), eps ~ U[-sqrt3, sqrt3] (zero mean,
// unit variance), one draw per region per step, held across the four stages.
struct NoiseConfig {
    bool enabled = false;
    double sigma_rel = 0.0;
    std::uint64_t seed = 0;
    double t_start = 0.0;
    double t_end = std::numeric_limits<double>::infinity();
};

// Replaces every region's uncertainty function from t onward.
struct UncertaintySwap {
    double t = 0.0;
    std::vector<UncertaintyFn> d;
};

struct SimConfig {
    double t_end = 1.0;           // hours
    double dt = 1e-4;             // hours
    std::size_t record_every = 1; // record every k-th step
    NoiseConfig noise;
    std::vector<OverrideWindow> overrides;
    std::vector<UncertaintySwap> swaps;
};

struct ClampEvent {
    double t = 0.0;
    std::size_t region = 0;
    double rho_before = 0.0; // value the integrator produced
    double clamped_to = 0.0;
};

struct SimResult {
    std::vector<double> t;
    // samples indexed [k][i]
    std::vector<std::vector<double>> rho;
    std::vector<std::vector<double>> u;     // applied inputs (post noise/override)
    std::vector<std::uint64_t> sat_flags;   // bit i set when u_i was clamped
    std::vector<std::vector<double>> controller_states; // flattened per sample
    std::vector<ClampEvent> clamp_events;
    std::size_t n_regions = 0;
    std::vector<std::size_t> state_offsets; // region i's slice of the flat vector

    std::vector<double> rho_at(double t_query) const; // first sample with t >= query
    std::size_t index_at(double t_query) const;       // clamped to the last sample
    // max_i |rho_i(t) - rho_ref_i|
    double max_abs_error(double t_query, const std::vector<double>& rho_ref) const;
};

// drho_i/dt = (1/L_i) (-g_i(rho_i) + sum_{j in P_i} w_ji g_j(rho_j) + u_i);
// outflow terms collapse because each split row sums to one.
std::vector<double> plant_rhs(const Network& net, const std::vector<FlowModel>& models,
                              const std::vector<double>& rho,
                              const std::vector<double>& u);

class Simulator {
  public:
    Simulator(Network net, std::vector<FlowModel> models,
              std::vector<ControllerSpec> specs);

    const Network& network() const { return net_; }
    const std::vector<FlowModel>& models() const { return models_; }
    const std::vector<ControllerSpec>& specs() const { return specs_; }
    std::vector<ControllerSpec>& specs() { return specs_; }

    // rho0 per region, x0 flattened controller states (pass
    // equilibrium_states(rho_star) for a calibrated start). Throws when the
    // step fails the rate precheck dt * max_rate <= 0.1 (max_rate collects
    // the plant slope bound per region and each controller's eigenvalue
    // rates; pure integrator channels contribute nothing), when dimensions
    // disagree, or when the state turns non-finite mid-run.
    SimResult run(const std::vector<double>& rho0, const std::vector<double>& x0,
                  const SimConfig& cfg) const;

    // flattened equilibrium controller states at the given set-point
    std::vector<double> equilibrium_states(const std::vector<double>& rho_star) const;

    std::vector<std::size_t> state_offsets() const;
    std::size_t total_controller_dim() const;

  private:
    Network net_;
    std::vector<FlowModel> models_;
    std::vector<ControllerSpec> specs_;
};

// Convenience: set-point error max_i |rho_i - rho_star_i| in veh/km.
double setpoint_error(const std::vector<double>& rho, const std::vector<double>& rho_star);

// True when every region's speed f(rho)/rho is at least frac times its free
// speed (speed at rho = 0 is the free speed by continuity).
bool speeds_recovered(const std::vector<FlowModel>& models,
                      const std::vector<double>& rho, double frac);

// Regions whose density exceeds the argmax of their total flow curve.
std::vector<std::size_t> congested_regions(const std::vector<FlowModel>& models,
                                           const std::vector<double>& rho,
                                           std::size_t grid_n = 4000);

} // namespace vacnet
