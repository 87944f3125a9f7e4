#include "vacnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vacnet {

double UncertaintyFn::eval(double rho, double jam_density) const {
    switch (kind) {
    case Kind::zero:
        return 0.0;
    case Kind::tent: {
        // triangle anchored at 0 and rho_jam, apex (peak_density, amplitude)
        if (rho <= 0.0 || rho >= jam_density) return 0.0;
        if (rho <= peak_density) return amplitude * rho / peak_density;
        return amplitude * (jam_density - rho) / (jam_density - peak_density);
    }
    case Kind::tabulated: {
        if (table_rho.empty()) return 0.0;
        if (rho <= table_rho.front()) return table_flow.front();
        if (rho >= table_rho.back()) return table_flow.back();
        auto it = std::upper_bound(table_rho.begin(), table_rho.end(), rho);
        std::size_t k = static_cast<std::size_t>(it - table_rho.begin());
        double t = (rho - table_rho[k - 1]) / (table_rho[k] - table_rho[k - 1]);
        return table_flow[k - 1] + t * (table_flow[k] - table_flow[k - 1]);
    }
    }
    return 0.0;
}

UncertaintyFn UncertaintyFn::none() { return UncertaintyFn{}; }

UncertaintyFn UncertaintyFn::tent(double amplitude, double peak_density) {
    UncertaintyFn d;
    d.kind = Kind::tent;
    d.amplitude = amplitude;
    d.peak_density = peak_density;
    return d;
}

UncertaintyFn UncertaintyFn::tabulated(std::vector<double> rho, std::vector<double> flow) {
    if (rho.size() != flow.size() || rho.size() < 2)
        throw std::invalid_argument("tabulated uncertainty needs matching tables, size >= 2");
    if (!std::is_sorted(rho.begin(), rho.end()))
        throw std::invalid_argument("tabulated uncertainty density grid must be sorted");
    UncertaintyFn d;
    d.kind = Kind::tabulated;
    d.table_rho = std::move(rho);
    d.table_flow = std::move(flow);
    return d;
}

bool UncertaintyFn::is_zero() const {
    if (kind == Kind::zero) return true;
    if (kind == Kind::tent) return amplitude == 0.0;
    return std::all_of(table_flow.begin(), table_flow.end(),
                       [](double v) { return v == 0.0; });
}

std::vector<std::size_t> Network::predecessors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < size(); ++j)
        if (j != i && has_edge(j, i)) out.push_back(j);
    return out;
}

std::vector<std::size_t> Network::successors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < size(); ++l)
        if (l != i && has_edge(i, l)) out.push_back(l);
    return out;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.pass ? "ok   " : "FAIL ") << c.check << " (margin "
           << c.margin << ")";
        if (!c.offending.empty()) {
            os << " regions";
            for (std::size_t i : c.offending) os << " " << i + 1;
        }
        if (!c.detail.empty()) os << ": " << c.detail;
        os << "\n";
    }
    return os.str();
}

namespace {

void add_check(ValidationReport& rep, std::string name, bool pass, double margin,
               std::vector<std::size_t> offending = {}, std::string detail = {}) {
    rep.checks.push_back({std::move(name), pass, margin, std::move(offending),
                          std::move(detail)});
}

// triangular nominal flow, duplicated here so validators stay below the
// flow-function layer
double f_tri(const RegionParams& r, double rho) {
    return std::min(r.free_speed * rho, r.congested_slope() * (r.jam_density - rho));
}

} // namespace

ValidationReport validate_network(const Network& net, double row_sum_tol) {
    const std::size_t n = net.size();
    if (n < 2) throw std::invalid_argument("network needs at least 2 regions");
    for (const auto& r : net.regions)
        if (!(std::isfinite(r.length_km) && std::isfinite(r.trip_length_km) &&
              std::isfinite(r.free_speed) && std::isfinite(r.critical_density) &&
              std::isfinite(r.jam_density) && std::isfinite(r.lipschitz_f) &&
              std::isfinite(r.lipschitz_d)))
            throw std::invalid_argument("region parameters must be finite");
    for (const auto& row : net.split)
        for (double w : row)
            if (!std::isfinite(w))
                throw std::invalid_argument("split entries must be finite");

    ValidationReport rep;

    {
        bool ok = net.split.size() == n &&
                  std::all_of(net.split.begin(), net.split.end(),
                              [n](const auto& row) { return row.size() == n; });
        add_check(rep, "split matrix is n x n", ok, 0.0);
        if (!ok) return rep; // nothing below is meaningful
    }

    {
        std::vector<std::size_t> bad;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = net.regions[i];
            if (!(r.length_km > 0.0 && r.trip_length_km > 0.0 && r.free_speed > 0.0 &&
                  r.critical_density > 0.0 && r.jam_density > r.critical_density))
                bad.push_back(i);
        }
        add_check(rep, "region parameters positive, jam above critical", bad.empty(),
                  0.0, bad);
    }

    {
        std::vector<std::size_t> bad;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            bool range_ok = true;
            for (std::size_t l = 0; l < n; ++l) {
                double w = net.split[i][l];
                if (w < 0.0 || w > 1.0) range_ok = false;
                sum += w;
            }
            double resid = std::abs(sum - 1.0);
            worst = std::max(worst, resid);
            if (!range_ok || resid > row_sum_tol) bad.push_back(i);
        }
        add_check(rep, "split rows sum to one", bad.empty(), worst, bad);
    }

    {
        // the graph must be connected through its undirected closure
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i) {
            reach[i][i] = true;
            for (std::size_t l = 0; l < n; ++l)
                if (l != i && (net.has_edge(i, l) || net.has_edge(l, i)))
                    reach[i][l] = true;
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[i][k] && reach[k][j]) reach[i][j] = true;
        std::vector<std::size_t> bad;
        for (std::size_t j = 0; j < n; ++j)
            if (!reach[0][j]) bad.push_back(j);
        add_check(rep, "transfer graph connected", bad.empty(), 0.0, bad);
    }

    {
        std::vector<std::size_t> bad;
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = net.regions[i];
            // declared bound must cover the triangular family's max slope
            double actual = std::max(r.free_speed, r.congested_slope());
            double margin = r.lipschitz_f - actual;
            worst = std::min(worst, margin);
            if (r.lipschitz_f <= 0.0 || r.lipschitz_d < 0.0 ||
                margin < -1e-9 * actual)
                bad.push_back(i);
        }
        add_check(rep, "declared slope bounds cover the flow family", bad.empty(),
                  worst, bad);
    }

    return rep;
}

ValidationReport validate_uncertainty(const RegionParams& region, const UncertaintyFn& d,
                                      std::size_t grid_n) {
    if (grid_n < 100)
        throw std::invalid_argument("validation grid needs at least 100 points");
    if (d.kind == UncertaintyFn::Kind::tent && d.amplitude < 0.0)
        throw std::invalid_argument("uncertainty amplitude must be non-negative");
    if (d.kind == UncertaintyFn::Kind::tent &&
        !(d.peak_density > 0.0 && d.peak_density < region.jam_density))
        throw std::invalid_argument("uncertainty peak must lie inside (0, jam)");

    ValidationReport rep;
    const double rho_j = region.jam_density;
    const double h = rho_j / static_cast<double>(grid_n);
    const double r = region.completion_ratio();

    std::vector<double> g(grid_n + 1), dv(grid_n + 1);
    for (std::size_t k = 0; k <= grid_n; ++k) {
        double rho = static_cast<double>(k) * h;
        dv[k] = d.eval(rho, rho_j);
        g[k] = r * f_tri(region, rho) + dv[k];
    }

    {
        double max_slope = 0.0;
        for (std::size_t k = 1; k <= grid_n; ++k)
            max_slope = std::max(max_slope, std::abs(dv[k] - dv[k - 1]) / h);
        double margin = region.lipschitz_d - max_slope;
        add_check(rep, "uncertainty slope within declared bound",
                  margin >= -1e-9 * std::max(1.0, region.lipschitz_d), margin);
    }

    {
        double g_min = *std::min_element(g.begin(), g.end());
        add_check(rep, "total flow non-negative", g_min >= 0.0, g_min);
    }

    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    {
        // concavity via second central differences
        double worst = 0.0;
        for (std::size_t k = 1; k < grid_n; ++k)
            worst = std::max(worst, g[k + 1] - 2.0 * g[k] + g[k - 1]);
        double tol = 1e-9 * scale;
        add_check(rep, "total flow concave", worst <= tol, tol - worst);
    }

    {
        // the set of near-maximal grid points must be one contiguous block
        double g_max = *std::max_element(g.begin(), g.end());
        double tol = 1e-9 * std::max(1.0, scale);
        std::size_t first = grid_n + 1, last = 0, count = 0;
        for (std::size_t k = 0; k <= grid_n; ++k)
            if (g[k] >= g_max - tol) {
                first = std::min(first, k);
                last = std::max(last, k);
                ++count;
            }
        bool contiguous = count == last - first + 1;
        add_check(rep, "total flow has a single maximum region", contiguous,
                  static_cast<double>(count));
    }

    return rep;
}

} // namespace vacnet
