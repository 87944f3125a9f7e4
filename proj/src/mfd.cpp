#include "vacnet/mfd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vacnet/io.hpp"

namespace vacnet {

FlowModel FlowModel::nominal(RegionParams region) {
    FlowModel m;
    m.region = std::move(region);
    m.d = UncertaintyFn::none();
    return m;
}

double f_nominal(const RegionParams& r, double rho) {
    if (rho < 0.0 || rho > r.jam_density)
        throw std::domain_error("density outside [0, jam]");
    double free_branch = r.free_speed * rho;
    double congested_branch = r.congested_slope() * (r.jam_density - rho);
    return std::min(free_branch, congested_branch);
}

double g_total(const FlowModel& m, double rho) {
    return m.region.completion_ratio() * f_nominal(m.region, rho) +
           m.d.eval(rho, m.region.jam_density);
}

double g_total_extended(const FlowModel& m, double rho) {
    double clamped = std::clamp(rho, 0.0, m.region.jam_density);
    return g_total(m, clamped);
}

double transfer_flow(const Network& net, const std::vector<FlowModel>& models,
                     std::size_t i, std::size_t l, double rho_i) {
    if (!net.has_edge(i, l) || i == l)
        throw std::invalid_argument("no transfer share from region i to l");
    return net.split[i][l] * g_total(models[i], rho_i);
}

double speed(const FlowModel& m, double rho) {
    if (rho == 0.0) return m.region.free_speed; // limit of f(rho)/rho
    return f_nominal(m.region, rho) / rho;
}

double lipschitz_estimate(const std::function<double(double)>& fn, double hi,
                          std::size_t grid_n) {
    double h = hi / static_cast<double>(grid_n);
    double worst = 0.0;
    double prev = fn(0.0);
    for (std::size_t k = 1; k <= grid_n; ++k) {
        double cur = fn(static_cast<double>(k) * h);
        worst = std::max(worst, std::abs(cur - prev) / h);
        prev = cur;
    }
    return worst;
}

UncertaintyFn gen_uncertainty(const RegionParams& region, std::uint64_t seed,
                              double max_amplitude, double peak_frac_lo,
                              double peak_frac_hi) {
    Rng rng(seed);
    double peak = rng.uniform(peak_frac_lo, peak_frac_hi) * region.jam_density;
    double amp = rng.uniform(0.0, max_amplitude);
    // shrink until the slope fits the declared bound; the tent slopes are
    // amp/peak and amp/(jam - peak) so halving always terminates
    for (int attempt = 0; attempt < 64; ++attempt) {
        double slope = std::max(amp / peak, amp / (region.jam_density - peak));
        if (slope <= region.lipschitz_d) return UncertaintyFn::tent(amp, peak);
        amp *= 0.5;
    }
    throw std::runtime_error("could not fit uncertainty under the slope bound");
}

double congestion_threshold(const FlowModel& m, std::size_t grid_n) {
    double best_rho = 0.0, best_g = -1.0;
    double h = m.region.jam_density / static_cast<double>(grid_n);
    for (std::size_t k = 0; k <= grid_n; ++k) {
        double rho = static_cast<double>(k) * h;
        double g = g_total(m, rho);
        if (g > best_g) { best_g = g; best_rho = rho; }
    }
    return best_rho;
}

} // namespace vacnet
