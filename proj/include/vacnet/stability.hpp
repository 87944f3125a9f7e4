#pragma once
// Stability certificates for the interconnected network: the decoupled
// margin test with its coupling weights, gain synthesis meeting a requested
// margin, passivity index estimation for the linear schemes (frequency sweep
// and a KYP-style certificate check), and the effective excess-passivity
// bound of the bounded_filter scheme.

#include <optional>
#include <string>
#include <vector>

#include "vacnet/controllers.hpp"
#include "vacnet/linalg.hpp"
#include "vacnet/model.hpp"

namespace vacnet {

// Which slope bounds enter the margin test. `max_slope` uses the full
// Lipschitz constant of f (the larger of the two branch slopes);
// `congested_slope` uses only the congested branch and rescales the
// demand-curve bound by the same ratio, preserving v_dl / v_l.
enum class LipschitzInterpretation { max_slope, congested_slope };

struct MarginOptions {
    LipschitzInterpretation interpretation = LipschitzInterpretation::max_slope;
    // xi weights on the coupling terms; empty means all ones. xi[i][j] is
    // the weight of edge j -> i.
    std::vector<std::vector<double>> xi;
    std::optional<std::vector<double>> v_dl; // per-region demand slope bound
};

struct MarginReport {
    std::vector<double> margins;    // eta_i minus required right-hand side
    std::vector<double> required;   // right-hand side per region
    bool pass = false;              // all margins > 0
    std::vector<std::size_t> failing;
};

// margin_i = eta_i - [ v_dl_i + r_i v_l_i
//                      + sum_{j in P_i} a_ji / (2 xi_ji)
//                      + sum_{j in S_i} xi_ij a_ij / 2 ]
// with a_ji = w_ji (r_j v_l_j + v_dl_j).
MarginReport stability_margin(const Network& net, const std::vector<double>& eta,
                              const MarginOptions& opts = {});

// Coupling coefficient a_ji for edge j -> i (exposed for tests and reports).
double coupling_coefficient(const Network& net, std::size_t j, std::size_t i,
                            const std::vector<double>& v_l,
                            const std::vector<double>& v_dl);

// Effective slope bounds under the chosen interpretation (exposed so
// callers can print the numbers entering the margin test).
void effective_slope_bounds(const Network& net, LipschitzInterpretation interp,
                            const std::optional<std::vector<double>>& v_dl_in,
                            std::vector<double>& v_l, std::vector<double>& v_dl);

enum class XiMode { fixed_one, coordinate_descent };

struct SynthesisOptions {
    LipschitzInterpretation interpretation = LipschitzInterpretation::max_slope;
    double margin = 0.0;         // fractional slack: eta = (1+margin) * bound
    XiMode xi_mode = XiMode::fixed_one;
    int xi_iteration_cap = 200;
    std::optional<std::vector<double>> v_dl;
};

struct SynthesisResult {
    std::vector<double> eta;     // smallest gains meeting the bound + margin
    std::vector<std::vector<double>> xi; // weights used
    bool xi_converged = true;    // false when descent hit the iteration cap
    MarginReport check;          // verification at the synthesized gains
};

// eta_i = (1 + margin) * RHS_i(xi). In coordinate_descent mode each edge
// weight is set to the closed-form crossing point that equalizes the two
// region bounds it appears in, sweeping edges until the max RHS stops
// improving by 1e-6; on hitting the cap the all-ones result is returned
// with xi_converged = false.
SynthesisResult synthesize_gains(const Network& net, const SynthesisOptions& opts = {});

// --- passivity index estimation for the linear schemes ---

struct IndexSweepResult {
    double index = 0.0;          // min over omega of Re H(j omega)
    double argmin_omega = 0.0;
    std::size_t evaluations = 0;
};

// Excess input passivity of the map -rho -> u realized by a stable LTI
// system: the index is min_omega Re H(j omega) over {0} plus a log grid on
// [1e-3, 1e6] rad/h, refined around the grid minimum until the relative
// interval drops below tol.
IndexSweepResult passivity_index_sweep(const Lti& sys, double tol_rel = 1e-9);

// Peak gain max_omega |H(j omega)| over the same grid with refinement.
double hinf_norm(const Lti& sys, double tol_rel = 1e-9);

struct LmiResult {
    std::array<double, 2> m_eigenvalues{};  // of the storage matrix
    bool m_positive_definite = false;
    std::vector<double> eigenvalues;        // of the assembled LMI, ascending
    bool feasible = false;  // M pos. def. and all LMI eigenvalues <= tol
    double tol = 0.0;
};

// Certificate check for storage x' M x and supply
// s(du, dy) = du Q du + 2 du S dy + dy R dy on the realization (A, B, C, D):
// assembles
//   [ A'M + M A   M B ]
//   [ B' M        0   ]  -  F2' W F2,   F2 = [0 I; C D],  W = [Q S; S R],
// where F2 stacks [du; dy], and reports its eigenvalues (closed form for
// 2x2, cyclic Jacobi above). Feasible iff M is positive definite and the
// assembled matrix is negative semidefinite within tol. Input-strict
// passivity with index eta uses Q = -eta, S = 1/2, R = 0.
LmiResult kyp_residual(const Lti& sys, const Mat2& m, double q, double s, double r,
                       double tol = 1e-9);

// Largest eta for which the given second_order spec's storage certificate
// keeps the KYP residual negative semidefinite, located by bisection on
// [0, eta_hi]. Returns -1 when the certificate fails already at eta = 0.
double certified_eta_bound(const ControllerSpec& spec, double eta_hi,
                           double tol = 1e-6);

// Effective excess passivity of the bounded_filter scheme: beta_c minus the
// demand slope gamma_c times the numerically computed peak gain of G(s).
// Positive iff the scheme is admissible (gamma_c < beta_c / |G|_inf).
double bounded_filter_eta(const ControllerGains& g);

} // namespace vacnet
