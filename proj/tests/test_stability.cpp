#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "vacnet/experiments.hpp"
#include "vacnet/io.hpp"
#include "vacnet/stability.hpp"

using namespace vacnet;

namespace {

RegionParams simple_region() {
    RegionParams r;
    r.length_km = 1.2;
    r.trip_length_km = 0.6;
    r.free_speed = 30.0;
    r.critical_density = 30.0;
    r.jam_density = 120.0;
    r.lipschitz_f = 30.0;
    r.lipschitz_d = 8.0;
    return r;
}

// Direct evaluation of the decoupled margin condition, written against the
// raw split matrix instead of the Network edge helpers so it cannot share a
// wrong convention with the implementation under test.
void brute_margins(const Network& net, const std::vector<double>& eta,
                   LipschitzInterpretation interp,
                   const std::vector<std::vector<double>>& xi,
                   const std::optional<std::vector<double>>& vdl_in,
                   std::vector<double>& required, std::vector<double>& margins) {
    const std::size_t n = net.regions.size();
    std::vector<double> vl(n), vdl(n), ratio(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = net.regions[i];
        const double cong =
            r.free_speed * r.critical_density / (r.jam_density - r.critical_density);
        const double lit = std::max(r.free_speed, cong);
        const double base = vdl_in ? (*vdl_in)[i] : r.lipschitz_d;
        if (interp == LipschitzInterpretation::max_slope) {
            vl[i] = lit;
            vdl[i] = base;
        } else {
            vl[i] = cong;
            vdl[i] = base * (cong / lit);
        }
        ratio[i] = r.length_km / r.trip_length_km;
    }
    auto weight = [&](std::size_t from, std::size_t to) {
        return xi.empty() ? 1.0 : xi[to][from];
    };
    required.resize(n);
    margins.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rhs = vdl[i] + ratio[i] * vl[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || net.split[j][i] <= 1e-12) continue;
            rhs += net.split[j][i] * (ratio[j] * vl[j] + vdl[j]) /
                   (2.0 * weight(j, i));
        }
        for (std::size_t l = 0; l < n; ++l) {
            if (l == i || net.split[i][l] <= 1e-12) continue;
            rhs += weight(i, l) * net.split[i][l] * (ratio[i] * vl[i] + vdl[i]) / 2.0;
        }
        required[i] = rhs;
        margins[i] = eta[i] - rhs;
    }
}

Network random_net(Rng& rng, std::size_t n) {
    Network net;
    net.regions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = net.regions[i];
        r.name = "r" + std::to_string(i + 1);
        r.length_km = 0.5 + rng.u01();
        r.trip_length_km = 0.3 + 0.5 * rng.u01();
        r.free_speed = 20.0 + 20.0 * rng.u01();
        r.critical_density = 20.0 + 20.0 * rng.u01();
        r.jam_density = r.critical_density * (3.0 + 2.0 * rng.u01());
        r.lipschitz_d = 10.0 * rng.u01();
        r.lipschitz_f = std::max(r.free_speed, r.congested_slope());
    }
    net.split.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            if (j == i) {
                net.split[j][i] = rng.u01(); // in-region share, not an edge
            } else if (rng.u01() < 0.5) {
                net.split[j][i] = 0.05 + 0.45 * rng.u01();
            }
        }
    return net;
}

ControllerSpec scheme23_spec() {
    ControllerSpec spec;
    spec.scheme = Scheme::second_order;
    spec.gains.eta = 110.4;
    spec.gains.tau = 0.02;
    spec.gains.kappa = 0.003;
    spec.storage_m = Mat2{{{0.403, 0.028}, {0.028, 0.022}}};
    return spec;
}

ControllerGains filter_gains() {
    ControllerGains g;
    g.eta = 0.0;
    g.K = 0.1;
    g.T1 = 0.01;
    g.T2 = 0.1;
    g.T3 = 0.2;
    g.beta_c = 485.3;
    g.gamma_c = 1.023;
    g.p_max = 134.1;
    g.rho_th1 = 0.4;
    g.rho_th2 = 131.4;
    return g;
}

} // namespace

TEST_CASE("effective slope bounds under both interpretations") {
    Network net;
    net.regions = {simple_region()};
    net.split = {{1.0}};

    std::vector<double> vl, vdl;
    effective_slope_bounds(net, LipschitzInterpretation::max_slope, std::nullopt, vl, vdl);
    CHECK(vl[0] == 30.0);  // free branch is the steeper one here
    CHECK(vdl[0] == 8.0);

    effective_slope_bounds(net, LipschitzInterpretation::congested_slope, std::nullopt,
                           vl, vdl);
    CHECK(vl[0] == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(vdl[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-15));

    // explicit demand bound replaces the region's own constant
    std::optional<std::vector<double>> vin = std::vector<double>{5.0};
    effective_slope_bounds(net, LipschitzInterpretation::max_slope, vin, vl, vdl);
    CHECK(vdl[0] == 5.0);
    effective_slope_bounds(net, LipschitzInterpretation::congested_slope, vin, vl, vdl);
    CHECK(vdl[0] == doctest::Approx(5.0 / 3.0).epsilon(1e-15));

    // when the congested branch is already the steeper one the two
    // interpretations coincide
    net.regions[0].critical_density = 90.0;
    net.regions[0].jam_density = 120.0; // congested slope 90
    effective_slope_bounds(net, LipschitzInterpretation::max_slope, std::nullopt, vl, vdl);
    std::vector<double> vl2, vdl2;
    effective_slope_bounds(net, LipschitzInterpretation::congested_slope, std::nullopt,
                           vl2, vdl2);
    CHECK(vl[0] == vl2[0]);
    CHECK(vdl[0] == vdl2[0]);
}

TEST_CASE("coupling coefficient closed form") {
    Network net;
    net.regions = {simple_region(), simple_region()};
    net.split = {{0.6, 0.4}, {0.3, 0.7}};
    std::vector<double> vl = {30.0, 30.0}, vdl = {8.0, 8.0};
    // a_{0 -> 1} = w_01 (r_0 vl_0 + vdl_0) = 0.4 (2*30 + 8)
    CHECK(coupling_coefficient(net, 0, 1, vl, vdl) == doctest::Approx(27.2).epsilon(1e-15));
    CHECK(coupling_coefficient(net, 1, 0, vl, vdl) == doctest::Approx(0.3 * 68.0).epsilon(1e-15));
}

TEST_CASE("margins match a direct evaluation on random networks") {
    Rng rng(424242);
    for (int cse = 0; cse < 20; ++cse) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform(0.0, 4.0));
        Network net = random_net(rng, n);

        std::vector<double> eta(n);
        for (auto& e : eta) e = 200.0 * rng.u01();

        MarginOptions opts;
        opts.interpretation = (cse % 2 == 0) ? LipschitzInterpretation::max_slope
                                             : LipschitzInterpretation::congested_slope;
        if (cse % 3 == 0) {
            std::vector<std::vector<double>> xi(n, std::vector<double>(n));
            for (auto& row : xi)
                for (auto& v : row) v = 0.1 + 2.9 * rng.u01();
            opts.xi = xi;
        }
        if (cse % 4 == 0) {
            std::vector<double> vdl(n);
            for (auto& v : vdl) v = 20.0 * rng.u01();
            opts.v_dl = vdl;
        }

        auto rep = stability_margin(net, eta, opts);
        std::vector<double> req, mar;
        brute_margins(net, eta, opts.interpretation, opts.xi, opts.v_dl, req, mar);

        REQUIRE(rep.margins.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = std::max({1.0, std::abs(req[i]), std::abs(mar[i])});
            CHECK(std::abs(rep.required[i] - req[i]) <= 1e-12 * scale);
            CHECK(std::abs(rep.margins[i] - mar[i]) <= 1e-12 * scale);
            const bool flagged = std::find(rep.failing.begin(), rep.failing.end(), i) !=
                                 rep.failing.end();
            CHECK(flagged == !(mar[i] > 0.0));
        }
        CHECK(rep.pass == rep.failing.empty());
    }
}

TEST_CASE("margin report rejects a gain vector of the wrong size") {
    Network net;
    net.regions = {simple_region(), simple_region()};
    net.split = {{0.6, 0.4}, {0.3, 0.7}};
    CHECK_THROWS_AS(stability_margin(net, {1.0}, {}), std::invalid_argument);
}

TEST_CASE("six-region margins at the published gains") {
    auto sc = load_scenario(std::string(VACNET_FIXTURE_DIR) + "/six_region.json");
    REQUIRE(sc.printed_eta.size() == 6);

    MarginOptions lit;
    lit.interpretation = LipschitzInterpretation::max_slope;
    auto rep = stability_margin(sc.net, sc.printed_eta, lit);
    const double expect_lit[6] = {-49.67235539215686, -65.05154925303455,
                                  -62.307011204481825, -61.12773214285713,
                                  -61.62301470588237, -61.610750466853375};
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(rep.margins[i] == doctest::Approx(expect_lit[i]).epsilon(1e-12));
    CHECK_FALSE(rep.pass);
    CHECK(rep.failing.size() == 6);

    MarginOptions cong;
    cong.interpretation = LipschitzInterpretation::congested_slope;
    rep = stability_margin(sc.net, sc.printed_eta, cong);
    const double expect_cong[6] = {31.31553397193712, 27.270941683054033,
                                   37.14181847132564, 48.130414381026895,
                                   39.1056503311038, 65.15737906702897};
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(rep.margins[i] == doctest::Approx(expect_cong[i]).epsilon(1e-12));
    CHECK(rep.pass);
    CHECK(rep.failing.empty());
}

TEST_CASE("twenty-region margins with declared demand bounds") {
    auto sc = load_scenario(std::string(VACNET_FIXTURE_DIR) + "/twenty_region.json");
    REQUIRE(sc.printed_eta.size() == 20);
    REQUIRE(sc.v_dl_max.size() == 20);

    MarginOptions opts;
    opts.interpretation = LipschitzInterpretation::max_slope;
    opts.v_dl = sc.v_dl_max;
    auto rep = stability_margin(sc.net, sc.printed_eta, opts);

    const double expect[20] = {260.522, 178.117, 137.166, 140.272, 124.784,
                               189.683, 295.418, 306.132, -17.502, 100.862,
                               -74.103, -74.117, 35.171,  163.196, 6.052,
                               298.188, 219.958, 3.731,   40.782,  71.352};
    for (std::size_t i = 0; i < 20; ++i)
        CHECK(std::abs(rep.margins[i] - expect[i]) < 6e-4);
    CHECK(*std::min_element(rep.margins.begin(), rep.margins.end()) ==
          doctest::Approx(-74.11708967731485).epsilon(1e-9));
    CHECK(rep.failing == std::vector<std::size_t>{8, 10, 11});
    CHECK_FALSE(rep.pass);

    // the optimistic demand bounds do not rescue the literal reading either
    opts.v_dl = sc.v_dl_min;
    auto rep_min = stability_margin(sc.net, sc.printed_eta, opts);
    for (std::size_t i = 0; i < 20; ++i) CHECK(rep_min.margins[i] > rep.margins[i]);
}

TEST_CASE("synthesis meets the requested slack with unit weights") {
    auto sc = load_scenario(std::string(VACNET_FIXTURE_DIR) + "/six_region.json");

    SynthesisOptions opts;
    opts.interpretation = LipschitzInterpretation::max_slope;
    opts.margin = 0.1;
    opts.xi_mode = XiMode::fixed_one;
    auto res = synthesize_gains(sc.net, opts);

    REQUIRE(res.eta.size() == 6);
    CHECK(res.xi_converged);
    for (const auto& row : res.xi)
        for (double v : row) CHECK(v == 1.0);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(res.eta[i] ==
              doctest::Approx(1.1 * res.check.required[i]).epsilon(1e-12));
        CHECK(res.check.margins[i] ==
              doctest::Approx(0.1 * res.check.required[i]).epsilon(1e-9));
    }
    CHECK(res.check.pass);
}

TEST_CASE("coordinate descent never worsens the largest required gain") {
    for (const char* name : {"/six_region.json", "/twenty_region.json"}) {
        auto sc = load_scenario(std::string(VACNET_FIXTURE_DIR) + name);

        SynthesisOptions fixed;
        fixed.interpretation = LipschitzInterpretation::congested_slope;
        fixed.margin = 0.05;
        auto base = synthesize_gains(sc.net, fixed);

        SynthesisOptions desc = fixed;
        desc.xi_mode = XiMode::coordinate_descent;
        auto tuned = synthesize_gains(sc.net, desc);

        CHECK(tuned.xi_converged);
        CHECK(tuned.check.pass);
        const double worst_fixed =
            *std::max_element(base.check.required.begin(), base.check.required.end());
        const double worst_tuned =
            *std::max_element(tuned.check.required.begin(), tuned.check.required.end());
        CHECK(worst_tuned <= worst_fixed + 1e-9);
        for (const auto& row : tuned.xi)
            for (double v : row) CHECK(v > 0.0);
    }
}

TEST_CASE("passivity index of the second-order scheme by frequency sweep") {
    auto spec = scheme23_spec();
    auto res = passivity_index_sweep(controller_lti(spec));
    CHECK(res.index == doctest::Approx(110.33222747399077).epsilon(1e-6));
    CHECK(res.argmin_omega == doctest::Approx(257.2468111961081).epsilon(5e-3));
    CHECK(res.index < spec.gains.eta); // the sweep sees the dip below D
    CHECK(res.evaluations > 2000);

    // a memoryless gain has a flat response
    ControllerSpec prop;
    prop.scheme = Scheme::proportional;
    prop.gains.eta = 40.0;
    auto flat = passivity_index_sweep(controller_lti(prop));
    CHECK(flat.index == 40.0);
}

TEST_CASE("peak gain and excess passivity of the demand filter") {
    auto g = filter_gains();
    CHECK(hinf_norm(bounded_filter_lti(g)) == doctest::Approx(0.1).epsilon(1e-12));

    auto dip = passivity_index_sweep(bounded_filter_lti(g));
    CHECK(dip.index == doctest::Approx(-0.008977374112781222).epsilon(1e-4));

    CHECK(bounded_filter_eta(g) ==
          doctest::Approx(485.3 - 1.023 * 0.1).epsilon(1e-12));

    // demand slope at twice the admissibility limit flips the sign
    g.gamma_c = 2.0 * g.beta_c / g.K;
    CHECK(bounded_filter_eta(g) == doctest::Approx(-485.3).epsilon(1e-12));
}

TEST_CASE("sweeps reject unstable realizations") {
    Lti sys;
    sys.n = 1;
    sys.A[0][0] = 1.0;
    sys.B[0] = 1.0;
    sys.C[0] = 1.0;
    CHECK_THROWS_AS(passivity_index_sweep(sys), std::invalid_argument);
    CHECK_THROWS_AS(hinf_norm(sys), std::invalid_argument);
}

TEST_CASE("kyp residual on a hand-solved example") {
    // A = -I, B = 0, C = 0, D = 5, M = I, supply with q = 0, s = 1/2,
    // r = -0.01 assembles to diag(-2, -2, -4.75)
    Lti sys;
    sys.n = 2;
    sys.A = {{{-1.0, 0.0}, {0.0, -1.0}}};
    sys.D = 5.0;
    auto res = kyp_residual(sys, Mat2{{{1.0, 0.0}, {0.0, 1.0}}}, 0.0, 0.5, -0.01);
    CHECK(res.m_positive_definite);
    CHECK(res.m_eigenvalues[0] == 1.0);
    REQUIRE(res.eigenvalues.size() == 3);
    CHECK(res.eigenvalues[0] == doctest::Approx(-4.75).epsilon(1e-14));
    CHECK(res.eigenvalues[1] == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(res.eigenvalues[2] == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(res.feasible);
}

TEST_CASE("first-order scheme is exactly strict-passive under its own storage") {
    // with M = tau/(2 gamma) the residual reduces to diag(-1/gamma, 0):
    // the canonical storage certifies the index eta with nothing to spare
    ControllerSpec spec;
    spec.scheme = Scheme::first_order;
    spec.gains.eta = 40.0;
    spec.gains.gamma = 20.0;
    spec.gains.tau = 0.1;
    const double m = spec.gains.tau / (2.0 * spec.gains.gamma);
    auto res = kyp_residual(controller_lti(spec), Mat2{{{m, 0.0}, {0.0, 0.0}}},
                            -spec.gains.eta, 0.5, 0.0);
    REQUIRE(res.eigenvalues.size() == 2);
    CHECK(res.eigenvalues[0] == doctest::Approx(-1.0 / 20.0).epsilon(1e-14));
    CHECK(std::abs(res.eigenvalues[1]) <= 1e-12);
    CHECK(res.feasible);

    // asking for any more strictness tips the top eigenvalue positive
    auto pushed = kyp_residual(controller_lti(spec), Mat2{{{m, 0.0}, {0.0, 0.0}}},
                               -(spec.gains.eta + 1.0), 0.5, 0.0);
    CHECK_FALSE(pushed.feasible);
}

TEST_CASE("kyp residual with the published storage matrix") {
    auto spec = scheme23_spec();
    Lti sys = controller_lti(spec);
    const Mat2& m = *spec.storage_m;

    auto at = [&](double eta) { return kyp_residual(sys, m, -eta, 0.5, 0.0); };
    CHECK(at(0.0).feasible);
    auto mid = at(50.0);
    CHECK(mid.feasible);
    CHECK(mid.eigenvalues.back() == doctest::Approx(-10.9424).epsilon(1e-4));
    CHECK_FALSE(at(100.0).feasible);
    CHECK_FALSE(at(110.4).feasible);
}

TEST_CASE("largest certified strictness level by bisection") {
    auto spec = scheme23_spec();
    const double bound = certified_eta_bound(spec, 200.0);
    CHECK(std::abs(bound - 91.26801123726177) < 2e-6);

    // an indefinite storage matrix fails before any strictness is asked
    auto bad = spec;
    bad.storage_m = Mat2{{{-1.0, 0.0}, {0.0, 1.0}}};
    CHECK(certified_eta_bound(bad, 200.0) == -1.0);

    // only the two-state scheme carries this certificate
    ControllerSpec prop;
    prop.scheme = Scheme::proportional;
    prop.gains.eta = 40.0;
    CHECK_THROWS_AS(certified_eta_bound(prop, 200.0), std::invalid_argument);
}

TEST_CASE("kyp residual rejects a stateless realization") {
    Lti sys;
    sys.n = 0;
    sys.D = 1.0;
    CHECK_THROWS_AS(kyp_residual(sys, Mat2{{{1.0, 0.0}, {0.0, 1.0}}}, 0.0, 0.5, 0.0),
                    std::invalid_argument);
}
