#include <doctest.h>

#include <limits>
#include <stdexcept>

#include "vacnet/model.hpp"

using namespace vacnet;

namespace {

RegionParams simple_region() {
    RegionParams r;
    r.name = "r";
    r.length_km = 1.2;
    r.trip_length_km = 0.6;
    r.free_speed = 30.0;
    r.critical_density = 30.0;
    r.jam_density = 120.0;
    r.lipschitz_f = 30.0;
    r.lipschitz_d = 8.0;
    return r;
}

Network two_ring() {
    Network net;
    net.regions = {simple_region(), simple_region()};
    net.split = {{0.7, 0.3}, {0.4, 0.6}};
    return net;
}

const CheckResult& find_check(const ValidationReport& rep, const std::string& name) {
    for (const auto& c : rep.checks)
        if (c.check == name) return c;
    throw std::runtime_error("no check named " + name);
}

} // namespace

TEST_CASE("region derived quantities") {
    auto r = simple_region();
    CHECK(r.completion_ratio() == doctest::Approx(2.0));
    // 30 * 30 / (120 - 30) = 10
    CHECK(r.congested_slope() == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("tent uncertainty evaluates piecewise linearly and vanishes at the ends") {
    auto d = UncertaintyFn::tent(150.0, 26.5);
    const double jam = 106.0;
    CHECK(d.eval(0.0, jam) == 0.0);
    CHECK(d.eval(26.5, jam) == doctest::Approx(150.0).epsilon(1e-15));
    CHECK(d.eval(jam, jam) == doctest::Approx(0.0));
    CHECK(d.eval(13.25, jam) == doctest::Approx(75.0).epsilon(1e-15));
    // right branch: 150 * (106 - 66.25) / (106 - 26.5) = 75
    CHECK(d.eval(66.25, jam) == doctest::Approx(75.0).epsilon(1e-15));
    CHECK_FALSE(d.is_zero());
}

TEST_CASE("zero detection covers all uncertainty kinds") {
    CHECK(UncertaintyFn::none().is_zero());
    CHECK(UncertaintyFn::tent(0.0, 10.0).is_zero());
    CHECK(UncertaintyFn::tabulated({0.0, 50.0, 100.0}, {0.0, 0.0, 0.0}).is_zero());
    CHECK_FALSE(UncertaintyFn::tabulated({0.0, 50.0, 100.0}, {0.0, 10.0, 0.0}).is_zero());
}

TEST_CASE("tabulated uncertainty interpolates through its samples") {
    auto d = UncertaintyFn::tabulated({0.0, 50.0, 100.0}, {0.0, 100.0, 0.0});
    CHECK(d.eval(0.0, 100.0) == 0.0);
    CHECK(d.eval(25.0, 100.0) == doctest::Approx(50.0).epsilon(1e-15));
    CHECK(d.eval(50.0, 100.0) == doctest::Approx(100.0).epsilon(1e-15));
    CHECK(d.eval(75.0, 100.0) == doctest::Approx(50.0).epsilon(1e-15));
    CHECK_THROWS_AS(UncertaintyFn::tabulated({0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(UncertaintyFn::tabulated({1.0, 0.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("edge set derives from the split matrix") {
    auto net = two_ring();
    CHECK(net.has_edge(0, 1));
    CHECK(net.has_edge(1, 0));
    CHECK_FALSE(net.has_edge(0, 0)); // self loops are not edges
    net.split[0][1] = 0.0;
    CHECK_FALSE(net.has_edge(0, 1));
    net.split[0][1] = 1e-13; // below the structural zero threshold
    CHECK_FALSE(net.has_edge(0, 1));
    CHECK(net.predecessors(0) == std::vector<std::size_t>{1});
    CHECK(net.successors(1) == std::vector<std::size_t>{0});
    CHECK(net.successors(0).empty());
}

TEST_CASE("validate_network passes a sane two region ring") {
    auto rep = validate_network(two_ring(), 1e-9);
    CHECK(rep.pass());
    CHECK(rep.checks.size() == 5);
}

TEST_CASE("validate_network flags a perturbed split row") {
    auto net = two_ring();
    net.split[1][0] += 0.01;
    auto rep = validate_network(net, 1e-6);
    CHECK_FALSE(rep.pass());
    const auto& c = find_check(rep, "split rows sum to one");
    CHECK_FALSE(c.pass);
    REQUIRE(c.offending.size() == 1);
    CHECK(c.offending[0] == 1);
    CHECK(c.margin == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("validate_network flags a disconnected transfer graph") {
    Network net;
    net.regions = {simple_region(), simple_region(), simple_region(), simple_region()};
    net.split = {{0.5, 0.5, 0.0, 0.0},
                 {0.5, 0.5, 0.0, 0.0},
                 {0.0, 0.0, 0.5, 0.5},
                 {0.0, 0.0, 0.5, 0.5}};
    auto rep = validate_network(net, 1e-9);
    CHECK_FALSE(find_check(rep, "transfer graph connected").pass);
}

TEST_CASE("validate_network flags bad physical parameters") {
    auto net = two_ring();
    net.regions[0].critical_density = 130.0; // above jam
    auto rep = validate_network(net, 1e-9);
    const auto& c = find_check(rep, "region parameters positive, jam above critical");
    CHECK_FALSE(c.pass);
    REQUIRE(c.offending.size() == 1);
    CHECK(c.offending[0] == 0);
}

TEST_CASE("validate_network flags a declared slope bound below the actual family") {
    auto net = two_ring();
    net.regions[1].lipschitz_f = 5.0; // actual max slope is 30
    auto rep = validate_network(net, 1e-9);
    const auto& c = find_check(rep, "declared slope bounds cover the flow family");
    CHECK_FALSE(c.pass);
    CHECK(c.offending == std::vector<std::size_t>{1});
}

TEST_CASE("validate_network rejects degenerate input outright") {
    Network net;
    net.regions = {simple_region()};
    net.split = {{1.0}};
    CHECK_THROWS_AS(validate_network(net, 1e-9), std::invalid_argument);

    auto nan_net = two_ring();
    nan_net.split[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(validate_network(nan_net, 1e-9), std::invalid_argument);
}

TEST_CASE("validate_uncertainty accepts an in-bound tent") {
    auto r = simple_region();
    auto rep = validate_uncertainty(r, UncertaintyFn::tent(150.0, 30.0));
    CHECK(rep.pass());
}

TEST_CASE("validate_uncertainty rejects a tent steeper than the declared bound") {
    auto r = simple_region();
    r.lipschitz_d = 1.0; // tent rises 150 over 30 veh/km: slope 5
    auto rep = validate_uncertainty(r, UncertaintyFn::tent(150.0, 30.0));
    CHECK_FALSE(find_check(rep, "uncertainty slope within declared bound").pass);
}

TEST_CASE("validate_uncertainty rejects flow driven negative") {
    auto r = simple_region();
    r.lipschitz_d = 1e9; // slope gate out of the way
    auto d = UncertaintyFn::tabulated({0.0, 60.0, 120.0}, {0.0, -4000.0, 0.0});
    auto rep = validate_uncertainty(r, d);
    CHECK_FALSE(find_check(rep, "total flow non-negative").pass);
}

TEST_CASE("validate_uncertainty rejects a twin-peaked total flow") {
    auto r = simple_region();
    r.lipschitz_d = 1e9;
    // sharp bump far on the congested branch creates a second local maximum
    auto d = UncertaintyFn::tabulated({0.0, 80.0, 100.0, 110.0, 120.0},
                                      {0.0, 0.0, 900.0, 0.0, 0.0});
    auto rep = validate_uncertainty(r, d);
    bool concave = find_check(rep, "total flow concave").pass;
    bool single = find_check(rep, "total flow has a single maximum region").pass;
    CHECK_FALSE((concave && single));
}

TEST_CASE("validate_uncertainty rejects malformed tents and grids") {
    auto r = simple_region();
    CHECK_THROWS_AS(validate_uncertainty(r, UncertaintyFn::tent(150.0, 150.0)),
                    std::invalid_argument); // peak outside (0, jam)
    CHECK_THROWS_AS(validate_uncertainty(r, UncertaintyFn::none(), 10),
                    std::invalid_argument); // grid too coarse
}

TEST_CASE("report summary marks failing checks") {
    auto net = two_ring();
    net.split[0][0] += 0.02;
    auto rep = validate_network(net, 1e-6);
    auto text = rep.summary();
    CHECK(text.find("FAIL") != std::string::npos);
    CHECK(text.find("split rows sum to one") != std::string::npos);
    CHECK(text.find("regions 1") != std::string::npos);
}
