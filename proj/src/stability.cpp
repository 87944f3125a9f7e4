#include "vacnet/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vacnet {

void effective_slope_bounds(const Network& net, LipschitzInterpretation interp,
                            const std::optional<std::vector<double>>& v_dl_in,
                            std::vector<double>& v_l, std::vector<double>& v_dl) {
    const std::size_t n = net.size();
    v_l.resize(n);
    v_dl.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = net.regions[i];
        double literal = std::max(r.free_speed, r.congested_slope());
        double dl = v_dl_in ? (*v_dl_in)[i] : r.lipschitz_d;
        if (interp == LipschitzInterpretation::max_slope) {
            v_l[i] = literal;
            v_dl[i] = dl;
        } else {
            v_l[i] = r.congested_slope();
            v_dl[i] = dl * (r.congested_slope() / literal);
        }
    }
}

namespace {

double xi_weight(const std::vector<std::vector<double>>& xi, std::size_t j,
                 std::size_t i) {
    if (xi.empty()) return 1.0;
    return xi[i][j];
}

} // namespace

double coupling_coefficient(const Network& net, std::size_t j, std::size_t i,
                            const std::vector<double>& v_l,
                            const std::vector<double>& v_dl) {
    return net.split[j][i] * (net.regions[j].completion_ratio() * v_l[j] + v_dl[j]);
}

MarginReport stability_margin(const Network& net, const std::vector<double>& eta,
                              const MarginOptions& opts) {
    const std::size_t n = net.size();
    if (eta.size() != n) throw std::invalid_argument("stability_margin: size mismatch");
    std::vector<double> v_l, v_dl;
    effective_slope_bounds(net, opts.interpretation, opts.v_dl, v_l, v_dl);

    MarginReport rep;
    rep.required.resize(n);
    rep.margins.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rhs = v_dl[i] + net.regions[i].completion_ratio() * v_l[i];
        for (std::size_t j : net.predecessors(i))
            rhs += coupling_coefficient(net, j, i, v_l, v_dl) /
                   (2.0 * xi_weight(opts.xi, j, i));
        for (std::size_t l : net.successors(i))
            rhs += xi_weight(opts.xi, i, l) *
                   coupling_coefficient(net, i, l, v_l, v_dl) / 2.0;
        rep.required[i] = rhs;
        rep.margins[i] = eta[i] - rhs;
        if (!(rep.margins[i] > 0.0)) rep.failing.push_back(i);
    }
    rep.pass = rep.failing.empty();
    return rep;
}

SynthesisResult synthesize_gains(const Network& net, const SynthesisOptions& opts) {
    const std::size_t n = net.size();
    SynthesisResult res;
    res.xi.assign(n, std::vector<double>(n, 1.0));

    MarginOptions mopts;
    mopts.interpretation = opts.interpretation;
    mopts.v_dl = opts.v_dl;

    auto required_at = [&](const std::vector<std::vector<double>>& xi) {
        MarginOptions m = mopts;
        m.xi = xi;
        return stability_margin(net, std::vector<double>(n, 0.0), m).required;
    };

    if (opts.xi_mode == XiMode::coordinate_descent) {
        std::vector<double> v_l, v_dl;
        effective_slope_bounds(net, opts.interpretation, opts.v_dl, v_l, v_dl);

        auto xi = res.xi;
        std::vector<double> req = required_at(xi);
        double best = *std::max_element(req.begin(), req.end());
        bool converged = false;
        for (int it = 0; it < opts.xi_iteration_cap; ++it) {
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < n; ++i) {
                    if (j == i || !net.has_edge(j, i)) continue;
                    double a = coupling_coefficient(net, j, i, v_l, v_dl);
                    if (a <= 0.0) continue;
                    // xi_ji enters RHS_i as a/(2 xi) and RHS_j as xi a/2;
                    // the max of the two is minimized where they cross:
                    //   base_i + a/(2 xi) = base_j + xi a/2
                    double base_i = req[i] - a / (2.0 * xi[i][j]);
                    double base_j = req[j] - xi[i][j] * a / 2.0;
                    double diff = base_j - base_i;
                    double nx = (-diff + std::sqrt(diff * diff + a * a)) / a;
                    req[i] = base_i + a / (2.0 * nx);
                    req[j] = base_j + nx * a / 2.0;
                    xi[i][j] = nx;
                }
            req = required_at(xi); // refresh against drift
            double cur = *std::max_element(req.begin(), req.end());
            if (best - cur < 1e-6) {
                converged = true;
                best = std::min(best, cur);
                break;
            }
            best = cur;
        }
        if (converged) {
            res.xi = xi;
        } else {
            res.xi_converged = false; // keep the all-ones weights
        }
    }

    std::vector<double> req = required_at(res.xi);
    res.eta.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.eta[i] = req[i] * (1.0 + opts.margin);

    MarginOptions verify = mopts;
    verify.xi = res.xi;
    res.check = stability_margin(net, res.eta, verify);
    return res;
}

namespace {

// shared grid for the frequency sweeps: 0 plus a log spacing
std::vector<double> omega_grid() {
    std::vector<double> w;
    w.reserve(2001);
    w.push_back(0.0);
    const double lo = std::log10(1e-3), hi = std::log10(1e6);
    const int npts = 2000;
    for (int k = 0; k < npts; ++k)
        w.push_back(std::pow(10.0, lo + (hi - lo) * k / (npts - 1)));
    return w;
}

// golden-section minimization of fn on [a, b]
template <class F>
double golden_min(F fn, double a, double b, double tol_rel) {
    const double gr = 0.6180339887498949;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int it = 0; it < 200; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a);
            fc = fn(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a);
            fd = fn(d);
        }
        double mid = 0.5 * (a + b);
        if ((b - a) <= tol_rel * std::max(1.0, std::abs(mid))) break;
    }
    return 0.5 * (a + b);
}

template <class F>
double grid_min(F fn, double tol_rel, double* argmin, std::size_t* evals) {
    std::vector<double> grid = omega_grid();
    std::size_t best = 0;
    double best_v = fn(grid[0]);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double v = fn(grid[k]);
        if (v < best_v) { best_v = v; best = k; }
    }
    double lo = grid[best > 0 ? best - 1 : 0];
    double hi = grid[std::min(best + 1, grid.size() - 1)];
    double w_star = grid[best];
    if (hi > lo) {
        double cand = golden_min(fn, lo, hi, tol_rel);
        double v = fn(cand);
        if (v < best_v) { best_v = v; w_star = cand; }
    }
    if (argmin) *argmin = w_star;
    if (evals) *evals = grid.size() + 402;
    return best_v;
}

} // namespace

IndexSweepResult passivity_index_sweep(const Lti& sys, double tol_rel) {
    if (!is_hurwitz(sys))
        throw std::invalid_argument("passivity index needs a stable realization");
    IndexSweepResult res;
    res.index = grid_min([&](double w) { return lti_response(sys, w).real(); },
                         tol_rel, &res.argmin_omega, &res.evaluations);
    return res;
}

double hinf_norm(const Lti& sys, double tol_rel) {
    if (!is_hurwitz(sys))
        throw std::invalid_argument("peak gain needs a stable realization");
    return -grid_min([&](double w) { return -std::abs(lti_response(sys, w)); },
                     tol_rel, nullptr, nullptr);
}

LmiResult kyp_residual(const Lti& sys, const Mat2& m, double q, double s, double r,
                       double tol) {
    const std::size_t n = sys.n;
    if (n < 1 || n > 2) throw std::invalid_argument("kyp_residual: n must be 1 or 2");
    const std::size_t dim = n + 1;

    LmiResult res;
    res.tol = tol;
    if (n == 1) {
        res.m_eigenvalues = {m[0][0], m[0][0]};
        res.m_positive_definite = m[0][0] > 0.0;
    } else {
        res.m_eigenvalues = sym_eig_2x2(m);
        res.m_positive_definite = res.m_eigenvalues[0] > 0.0;
    }

    // [ A'M + MA  MB; B'M  0 ]
    std::vector<std::vector<double>> lmi(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double v = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                v += sys.A[k][i] * m[k][j] + m[i][k] * sys.A[k][j];
            lmi[i][j] = v;
        }
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t k = 0; k < n; ++k) v += m[i][k] * sys.B[k];
        lmi[i][n] = v;
        lmi[n][i] = v;
    }

    // subtract F2' W F2 with F2 rows f_u = [0..0 1] and f_y = [C D]
    std::vector<double> f_y(dim);
    for (std::size_t k = 0; k < n; ++k) f_y[k] = sys.C[k];
    f_y[n] = sys.D;
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double fu_i = (i == n) ? 1.0 : 0.0;
            double fu_j = (j == n) ? 1.0 : 0.0;
            double supply = fu_i * q * fu_j + fu_i * s * f_y[j] + f_y[i] * s * fu_j +
                            f_y[i] * r * f_y[j];
            lmi[i][j] -= supply;
        }

    res.eigenvalues = sym_eig_jacobi(lmi);
    res.feasible = res.m_positive_definite && res.eigenvalues.back() <= tol;
    return res;
}

double certified_eta_bound(const ControllerSpec& spec, double eta_hi, double tol) {
    if (spec.scheme != Scheme::second_order || !spec.storage_m)
        throw std::invalid_argument("certified_eta_bound needs a second_order "
                                    "spec with a storage certificate");
    Lti sys = controller_lti(spec);
    auto feasible = [&](double eta) {
        return kyp_residual(sys, *spec.storage_m, -eta, 0.5, 0.0).feasible;
    };
    if (!feasible(0.0)) return -1.0; // certificate fails even without strictness
    double lo = 0.0, hi = eta_hi;
    if (feasible(hi)) return hi;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

double bounded_filter_eta(const ControllerGains& g) {
    return g.beta_c - g.gamma_c * hinf_norm(bounded_filter_lti(g));
}

} // namespace vacnet
