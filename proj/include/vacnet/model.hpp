#pragma once
// Domain types for the multi-region traffic network: per-region physical
// parameters, the split (routing) matrix, bounded uncertainty flows, and
// validators for the structural assumptions the stability results rely on.

#include <cstddef>
#include <string>
#include <vector>

namespace vacnet {

// Per-region physical constants. Units: km, km/h, veh/km, veh/h.
struct RegionParams {
    std::string name;
    double length_km = 0.0;        // L
    double trip_length_km = 0.0;   // l, average trip length
    double free_speed = 0.0;       // free-flow speed of the nominal MFD
    double critical_density = 0.0; // density maximizing the nominal flow f
    double jam_density = 0.0;      // density at which flow is zero
    double lipschitz_f = 0.0;      // declared Lipschitz bound for f
    double lipschitz_d = 0.0;      // declared Lipschitz bound for d

    // trip completion ratio: region length over average trip length
    double completion_ratio() const { return length_km / trip_length_km; }
    // slope of the congested branch of the triangular nominal MFD
    double congested_slope() const {
        return free_speed * critical_density / (jam_density - critical_density);
    }
};

// Bounded perturbation d of the total flow g = r*f + d.
// tent: d(rho) = amplitude * min{rho/peak, (rhoJ-rho)/(rhoJ-peak)}, zero at both ends.
// tabulated: piecewise-linear through (density, flow) samples.
struct UncertaintyFn {
    enum class Kind { zero, tent, tabulated };
    Kind kind = Kind::zero;
    double amplitude = 0.0;    // max value, veh/h
    double peak_density = 0.0; // argmax, veh/km
    std::vector<double> table_rho;
    std::vector<double> table_flow;

    static UncertaintyFn none();
    static UncertaintyFn tent(double amplitude, double peak_density);
    static UncertaintyFn tabulated(std::vector<double> rho, std::vector<double> flow);

    // evaluate d(rho); rho is clamped to [0, jam] by the caller's contract
    double eval(double rho, double jam_density) const;
    // true when d vanishes identically (zero kind, zero amplitude or table)
    bool is_zero() const;
};

struct Network {
    std::vector<RegionParams> regions;
    // split[i][j] = share of region i's outflow sent to region j; split[i][i]
    // is the in-region trip completion share. Rows sum to 1.
    std::vector<std::vector<double>> split;

    std::size_t size() const { return regions.size(); }
    // structural zero threshold for deriving the edge set
    static constexpr double kEdgeEps = 1e-12;

    bool has_edge(std::size_t i, std::size_t j) const {
        return i != j && split[i][j] > kEdgeEps;
    }
    // predecessors of i: j with w_ji > 0
    std::vector<std::size_t> predecessors(std::size_t i) const;
    // successors of i: j with w_ij > 0
    std::vector<std::size_t> successors(std::size_t i) const;
};

struct CheckResult {
    std::string check;
    bool pass = false;
    double margin = 0.0;          // worst-case numeric margin for this check
    std::vector<std::size_t> offending;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    std::string summary() const;
};

// Structural validation of the network: parameter sanity, row sums of the
// split matrix within row_sum_tol, and (undirected) connectivity of the
// split-derived graph.
ValidationReport validate_network(const Network& net, double row_sum_tol = 1e-6);

// Checks the uncertainty assumptions on a uniform density grid:
//  (i)  d bounded and Lipschitz with constant <= region.lipschitz_d,
//  (ii) g = r*f + d non-negative,
//  (iii) g concave with a unique maximum.
ValidationReport validate_uncertainty(const RegionParams& region,
                                      const UncertaintyFn& d,
                                      std::size_t grid_n = 1000);

} // namespace vacnet
