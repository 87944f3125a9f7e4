#pragma once
// Flow functions of the MFD model: nominal flow f, total inter-regional flow
// g = r*f + d, transfer flows, speeds, Lipschitz estimation and the tent
// uncertainty generator.

#include <cstdint>
#include <functional>
#include <vector>

#include "vacnet/model.hpp"

namespace vacnet {

// Nominal triangular flow together with the region's uncertainty flow.
struct FlowModel {
    RegionParams region;
    UncertaintyFn d;

    static FlowModel nominal(RegionParams region);
};

// Triangular nominal MFD: min of the free-flow branch and the congested
// branch. Throws std::domain_error outside [0, jam].
double f_nominal(const RegionParams& region, double rho);

// Total flow g = r*f + d. Same domain contract as f_nominal.
double g_total(const FlowModel& model, double rho);

// g evaluated with rho clamped into [0, jam]; used by integrator stages that
// may transiently leave the physical domain.
double g_total_extended(const FlowModel& model, double rho);

// Transfer flow from region i to region l: w_il * g_i(rho_i).
// Throws std::invalid_argument when l is not a successor of i.
double transfer_flow(const Network& net, const std::vector<FlowModel>& models,
                     std::size_t i, std::size_t l, double rho_i);

// speed = f(rho)/rho, extended by continuity to the free-flow speed at 0.
double speed(const FlowModel& model, double rho);

// Max absolute slope between adjacent samples of fn over [0, hi].
double lipschitz_estimate(const std::function<double(double)>& fn,
                          double hi, std::size_t grid_n);

// Deterministic tent-uncertainty generator: amplitude ~ U(0, max_amplitude],
// peak ~ U(peak_frac_lo, peak_frac_hi) * jam. Retries with reduced amplitude
// (halving, bounded) if the declared lipschitz_d gate fails; throws when the
// gate cannot be met.
UncertaintyFn gen_uncertainty(const RegionParams& region, std::uint64_t seed,
                              double max_amplitude,
                              double peak_frac_lo = 0.2,
                              double peak_frac_hi = 0.3);

// argmax of g over a uniform grid; densities above this count as congested
double congestion_threshold(const FlowModel& model, std::size_t grid_n = 4000);

} // namespace vacnet
