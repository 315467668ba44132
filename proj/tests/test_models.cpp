#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "bfl1/errors.hpp"
#include "bfl1/models.hpp"

using namespace bfl1;

TEST_CASE("hole centers and web gaps follow the drawing") {
    CHECK(BeamGeometry::hole_center(0) == doctest::Approx(5.0));
    CHECK(BeamGeometry::hole_center(2) == doctest::Approx(25.0));
    CHECK(BeamGeometry::hole_center(4) == doctest::Approx(45.0));
    CHECK_THROWS_AS(BeamGeometry::hole_center(5), config_error);

    // full diameter at a hole center, zero at the edge and between holes
    CHECK(BeamGeometry::web_gap(5.0) == doctest::Approx(3.0));
    CHECK(BeamGeometry::web_gap(5.0 + 1.5) == doctest::Approx(0.0));
    CHECK(BeamGeometry::web_gap(10.0) == 0.0);
    // chord 2*sqrt(r^2 - d^2) one unit off the center
    CHECK(BeamGeometry::web_gap(26.0) == doctest::Approx(2.0 * std::sqrt(1.25)));
}

TEST_CASE("section stiffness matches the transformed-section hand value") {
    // E1 = E2 = 1 MPa, E3 = 10 kPa, solid web. Strips about the centroid
    // (2.6 m by symmetry) give EI = 4214500/3 N m^2.
    const double ei = beam_section_ei(1e6, 1e6, 1e4);
    CHECK(ei == doctest::Approx(4214500.0 / 3.0).epsilon(1e-12));

    // removing the full 3 m hole strip keeps the centroid and drops EI to
    // 1382333.33 N m^2
    const double ei_hole = beam_section_ei(1e6, 1e6, 1e4, 3.0);
    CHECK(ei_hole == doctest::Approx(1382333.3333333333).epsilon(1e-10));
    CHECK(ei_hole < ei);
}

TEST_CASE("closed-form tip deflection is -qL^4 / (8 EI) in SI units") {
    const double ei = beam_section_ei(1e6, 1e6, 1e4);
    const double expect = -1e4 * std::pow(50.0, 4) / (8.0 * ei);
    CHECK(beam_lofi_deflection(10.0, 1.0, 1.0, 10.0) == doctest::Approx(expect).epsilon(1e-12));
    // nominal inputs put the tip around -5561 m (soft web, long span)
    CHECK(beam_lofi_deflection(10.0, 1.0, 1.0, 10.0) ==
          doctest::Approx(-5561.1578).epsilon(1e-6));
}

TEST_CASE("FE proxy without holes reproduces the closed form") {
    const double closed = beam_lofi_deflection(10.0, 1.0, 1.0, 10.0);
    const double fe = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 200, false);
    CHECK(std::abs(fe - closed) / std::abs(closed) < 1e-8);
}

TEST_CASE("FE proxy with holes deflects more and self-converges") {
    const double solid = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 200, false);
    const double holes = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 200, true);
    CHECK(std::abs(holes) > std::abs(solid)); // holes soften the web

    const double coarse = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 100, true);
    const double fine = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 400, true);
    CHECK(std::abs(coarse - fine) / std::abs(fine) < 1e-6);

    CHECK_THROWS_AS(beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 10, true), config_error);
}

TEST_CASE("FE deflection is linear in the load") {
    const double base = beam_hifi_proxy(10.0, 1.0, 1.0, 10.0, 200, true);
    const double doubled = beam_hifi_proxy(20.0, 1.0, 1.0, 10.0, 200, true);
    CHECK(doubled == doctest::Approx(2.0 * base).epsilon(1e-10));
}

TEST_CASE("nozzle_delta matches the quadratic root and stays in (-1, 1)") {
    CHECK(nozzle_delta(0.0) == 0.0);
    // xi = 1: delta solves delta/(1-delta^2) = 1, i.e. (sqrt(5)-1)/2
    CHECK(nozzle_delta(1.0) == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0));
    CHECK(nozzle_delta(-1.0) == doctest::Approx(-(std::sqrt(5.0) - 1.0) / 2.0));
    for (double xi : {-50.0, -3.0, -0.2, 0.7, 4.0, 80.0}) {
        const double d = nozzle_delta(xi);
        CHECK(std::abs(d) < 1.0);
        // defining relation xi = delta / (1 - delta^2)
        CHECK(d / (1.0 - d * d) == doctest::Approx(xi).epsilon(1e-12));
    }
    // monotone in xi
    CHECK(nozzle_delta(0.5) > nozzle_delta(0.2));
}

TEST_CASE("shock position lands on the correct branch") {
    namespace n = std::numbers;
    CHECK(nozzle_shock_position(0.0).value() == doctest::Approx(n::pi / 2.0));
    CHECK(nozzle_shock_position(0.3).value() == doctest::Approx(std::acos(-0.3)));
    CHECK(nozzle_shock_position(-0.3).value() == doctest::Approx(std::acos(0.3)));
    CHECK(nozzle_shock_position(0.6).value() ==
          doctest::Approx(n::pi - std::asin(0.8)));
    CHECK_FALSE(nozzle_shock_position(1.0).has_value());
    CHECK_FALSE(nozzle_shock_position(-1.2).has_value());
}

TEST_CASE("nozzle_field is sin before the shock and -sin after") {
    namespace n = std::numbers;
    const std::size_t m = 52;
    const Vector x = nozzle_grid(m);
    CHECK(x.front() == 0.0);
    CHECK(x.back() == doctest::Approx(n::pi));

    const double delta = 0.3;
    const double xs = nozzle_shock_position(delta).value();
    const Vector u = nozzle_field(delta, m);
    REQUIRE(u.size() == m);
    for (std::size_t i = 0; i < m; ++i) {
        const double expect = x[i] <= xs ? std::sin(x[i]) : -std::sin(x[i]);
        CHECK(u[i] == doctest::Approx(expect));
    }

    CHECK_THROWS_AS(nozzle_field(1.0, m), config_error);
    CHECK_THROWS_AS(nozzle_grid(1), config_error);
}

TEST_CASE("shock extraction recovers the crossing within one cell") {
    const std::size_t m = 52;
    const Vector x = nozzle_grid(m);
    const double spacing = std::numbers::pi / static_cast<double>(m - 1);

    for (double delta : {-0.7, -0.2, 0.0, 0.4, 0.8}) {
        const double xs = nozzle_shock_position(delta).value();
        const auto found = nozzle_shock_from_field(nozzle_field(delta, m));
        REQUIRE(found.has_value());
        CHECK(std::abs(found.value() - xs) <= spacing);
    }

    // all-negative profile has no positive-to-negative crossing
    const Vector flat(m, -1.0);
    CHECK_FALSE(shock_from_profile(x, flat).has_value());

    // the pinned end samples never vote: noise there must not drag the
    // crossing to the boundary or suppress it
    Vector noisy_ends = nozzle_field(0.4, m);
    const double clean = shock_from_profile(x, noisy_ends).value();
    noisy_ends.front() = -0.02;
    noisy_ends.back() = 0.02;
    CHECK(shock_from_profile(x, noisy_ends).value() == doctest::Approx(clean));

    // positive values only at the ends do not count as a crossing
    Vector ends_only(m, -1.0);
    ends_only.front() = 0.5;
    ends_only.back() = 0.5;
    CHECK_FALSE(shock_from_profile(x, ends_only).has_value());
}

TEST_CASE("shock extraction error shrinks with the grid") {
    // the crossing is bracketed in one cell, so the worst-case error is the
    // cell width pi / (m - 1) at every resolution
    for (std::size_t m : {64, 128, 256}) {
        const double spacing = std::numbers::pi / static_cast<double>(m - 1);
        double worst = 0.0;
        for (double delta : {-0.7, -0.3, 0.1, 0.45, 0.8}) {
            const double xs = nozzle_shock_position(delta).value();
            const auto found = nozzle_shock_from_field(nozzle_field(delta, m));
            REQUIRE(found.has_value());
            worst = std::max(worst, std::abs(found.value() - xs));
        }
        CHECK(worst <= spacing);
    }
}

TEST_CASE("interp_linear interpolates and validates its inputs") {
    const Vector xs = {0.0, 1.0, 3.0};
    const Vector ys = {0.0, 2.0, -2.0};
    const Vector out = interp_linear(xs, ys, {0.5, 1.0, 2.0});
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(2.0));
    CHECK(out[2] == doctest::Approx(0.0));

    CHECK_THROWS_AS(interp_linear({0.0, 0.0, 1.0}, ys, {0.5}), config_error);
    CHECK_THROWS_AS(interp_linear(xs, ys, {3.5}), config_error);
    CHECK_THROWS_AS(interp_linear(xs, {0.0, 1.0}, {0.5}), config_error);
}

TEST_CASE("upwind march conserves the integral and finds the shock") {
    namespace n = std::numbers;
    for (double delta : {0.0, 0.45}) {
        const auto res = burgers_steady_upwind(delta, 208, 0.4, 1e-10, 2'000'000);
        CHECK(res.converged);
        REQUIRE(res.u.size() == 208);

        // integral of the initial plateaus is 2*delta and the scheme's
        // boundary fluxes vanish, so the steady state must keep it
        const double dx = n::pi / 208.0;
        double mass = 0.0;
        for (double v : res.u) mass += v * dx;
        CHECK(mass == doctest::Approx(2.0 * delta).epsilon(1e-8));

        const double xs = nozzle_shock_position(delta).value();
        const auto found = shock_from_profile(res.x, res.u);
        REQUIRE(found.has_value());
        CHECK(std::abs(found.value() - xs) <= 2.0 * dx);
    }

    CHECK_THROWS_AS(burgers_steady_upwind(0.0, 4), config_error);
}

TEST_CASE("beam samples stay inside their sampling boxes") {
    Rng rng(12);
    const Dataset lo = generate_beam_samples(40, rng, false, 200);
    REQUIRE(lo.size() == 40);
    for (const auto& s : lo) {
        REQUIRE(s.x.size() == 4);
        REQUIRE(s.y.size() == 1);
        CHECK(s.x[0] >= 9.0);  CHECK(s.x[0] < 11.0);  // q
        CHECK(s.x[1] >= 0.9);  CHECK(s.x[1] < 1.1);   // E1
        CHECK(s.x[2] >= 0.9);  CHECK(s.x[2] < 1.1);   // E2
        CHECK(s.x[3] >= 9.0);  CHECK(s.x[3] < 11.0);  // E3
        CHECK(s.y[0] == doctest::Approx(
            beam_lofi_deflection(s.x[0], s.x[1], s.x[2], s.x[3])));
    }

    Rng rng2(12);
    const Dataset hi = generate_beam_samples(5, rng2, true, 200);
    for (const auto& s : hi)
        CHECK(s.y[0] == doctest::Approx(
            beam_hifi_proxy(s.x[0], s.x[1], s.x[2], s.x[3], 200, true)));
}

TEST_CASE("high-fidelity beam outputs differ from the closed form") {
    Rng rng(3);
    const Dataset hi = generate_beam_samples(5, rng, true, 200);
    for (const auto& s : hi) {
        const double lofi = beam_lofi_deflection(s.x[0], s.x[1], s.x[2], s.x[3]);
        CHECK(std::abs(s.y[0]) > std::abs(lofi)); // holes always soften
    }
}

TEST_CASE("nozzle samples are profiles indexed by a hidden normal draw") {
    Rng rng(8);
    const Dataset coarse = generate_nozzle_samples(6, rng, 52);
    for (const auto& s : coarse) {
        REQUIRE(s.x.size() == 52);
        CHECK(s.x == s.y); // the profile is both input and target
    }

    Rng rng2(8);
    const Dataset up = generate_nozzle_samples(6, rng2, 52, 1048);
    for (const auto& s : up) REQUIRE(s.x.size() == 1048);
    // same seed, so the same hidden draws: the upsampled profile is exactly
    // the coarse one carried onto the fine grid
    const Vector expect =
        interp_linear(nozzle_grid(52), coarse[0].x, nozzle_grid(1048));
    CHECK(up[0].x == expect);
}

TEST_CASE("bi-fidelity bundles have the requested shapes") {
    const auto beam = generate_bifidelity_dataset(Problem::Beam, 7, 3, 4, Rng(11));
    CHECK(beam.lo.size() == 7);
    CHECK(beam.hi.size() == 3);
    CHECK(beam.val.size() == 4);

    DatasetOptions opts;
    opts.nozzle_grid_lo = 26;
    opts.nozzle_grid_hi = 100;
    const auto noz = generate_bifidelity_dataset(Problem::Nozzle, 5, 2, 2, Rng(11), opts);
    CHECK(noz.lo.size() == 5);
    CHECK(noz.lo[0].x.size() == 100); // coarse fields live on the fine grid
    CHECK(noz.hi[0].x.size() == 100);
    CHECK(noz.val[0].x.size() == 100);

    // validation draws are independent of the training draws
    CHECK(noz.val[0].x != noz.hi[0].x);
}

TEST_CASE("dataset CSV round-trips exactly") {
    const std::string beam_path = "test_models_beam.csv";
    const std::string noz_path = "test_models_noz.csv";

    const auto beam = generate_bifidelity_dataset(Problem::Beam, 5, 2, 2, Rng(21));
    write_dataset_csv(beam_path, beam.lo, Problem::Beam);
    const Dataset beam_back = load_dataset_csv(beam_path, Problem::Beam);
    REQUIRE(beam_back.size() == beam.lo.size());
    for (std::size_t i = 0; i < beam_back.size(); ++i) {
        CHECK(beam_back[i].x == beam.lo[i].x);
        CHECK(beam_back[i].y == beam.lo[i].y);
    }

    DatasetOptions opts;
    opts.nozzle_grid_lo = 26;
    opts.nozzle_grid_hi = 64;
    const auto noz = generate_bifidelity_dataset(Problem::Nozzle, 3, 1, 1, Rng(21), opts);
    write_dataset_csv(noz_path, noz.hi, Problem::Nozzle);
    const Dataset noz_back = load_dataset_csv(noz_path, Problem::Nozzle);
    REQUIRE(noz_back.size() == noz.hi.size());
    for (std::size_t i = 0; i < noz_back.size(); ++i) {
        CHECK(noz_back[i].x == noz.hi[i].x);
        CHECK(noz_back[i].y == noz.hi[i].y);
    }

    CHECK_THROWS_AS(load_dataset_csv("no_such_file.csv", Problem::Beam), input_error);
    std::remove(beam_path.c_str());
    std::remove(noz_path.c_str());
}

TEST_CASE("problem names round-trip") {
    CHECK(problem_from_name(problem_name(Problem::Beam)) == Problem::Beam);
    CHECK(problem_from_name(problem_name(Problem::Nozzle)) == Problem::Nozzle);
    CHECK_THROWS_AS(problem_from_name("plate"), config_error);
}

TEST_CASE("json bundles round-trip with their meta block") {
    DatasetOptions opts;
    opts.nozzle_grid_lo = 26;
    opts.nozzle_grid_hi = 64;
    const auto noz = generate_bifidelity_dataset(Problem::Nozzle, 4, 2, 2, Rng(31), opts);

    const auto j = dataset_bundle_to_json(noz);
    CHECK(j["meta"]["problem"] == "nozzle");
    CHECK(j["meta"]["seed"].get<std::uint64_t>() == noz.meta.seed);
    CHECK(j["meta"]["grids"]["nozzle_grid_lo"] == 26);
    CHECK(j["meta"]["grids"]["nozzle_grid_hi"] == 64);
    CHECK(j["meta"]["units"]["x"] == "dimensionless");

    const auto back = dataset_bundle_from_json(j);
    CHECK(back.meta.problem == Problem::Nozzle);
    CHECK(back.meta.seed == noz.meta.seed);
    CHECK(back.meta.grids.nozzle_grid_hi == 64);
    REQUIRE(back.lo.size() == noz.lo.size());
    REQUIRE(back.hi.size() == noz.hi.size());
    REQUIRE(back.val.size() == noz.val.size());
    for (std::size_t i = 0; i < back.lo.size(); ++i) {
        CHECK(back.lo[i].x == noz.lo[i].x); // doubles survive json exactly
        CHECK(back.lo[i].y == noz.lo[i].y);
    }

    const auto beam = generate_bifidelity_dataset(Problem::Beam, 3, 2, 2, Rng(31));
    const auto jb = dataset_bundle_to_json(beam);
    CHECK(jb["meta"]["units"]["q"] == "kN/m");
    CHECK(jb["meta"]["units"]["E3"] == "kPa");
    CHECK(dataset_bundle_from_json(jb).hi[0].x == beam.hi[0].x);
}

TEST_CASE("malformed bundles are rejected as bad input") {
    const auto beam = generate_bifidelity_dataset(Problem::Beam, 3, 2, 2, Rng(33));
    auto j = dataset_bundle_to_json(beam);

    auto missing = j;
    missing.erase("meta");
    CHECK_THROWS_AS(dataset_bundle_from_json(missing), input_error);

    auto bad_name = j;
    bad_name["meta"]["problem"] = "plate";
    CHECK_THROWS_AS(dataset_bundle_from_json(bad_name), input_error);

    auto ragged = j;
    ragged["lo"][1]["x"] = {1.0, 2.0};
    CHECK_THROWS_AS(dataset_bundle_from_json(ragged), input_error);

    auto empty = j;
    empty["hi"] = nlohmann::json::array();
    CHECK_THROWS_AS(dataset_bundle_from_json(empty), input_error);

    CHECK_THROWS_AS(dataset_bundle_from_json(nlohmann::json::parse("[1,2]")),
                    input_error);
}
