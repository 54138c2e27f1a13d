#include <doctest.h>

#include <cmath>

#include "homsim/rng.hpp"
#include "homsim/theory.hpp"

using namespace homsim;

TEST_CASE("mode functions at the origin evaluate to the normalisation") {
    TheoryModel m(TheoryParams::reference_setup());
    CHECK(m.psi(0.0, 0.0, ModeSign::Plus) == doctest::Approx(m.norm()).epsilon(1e-12));
    CHECK(m.psi(0.0, 0.0, ModeSign::Minus) == doctest::Approx(-m.norm()).epsilon(1e-12));
}

TEST_CASE("antisymmetric bracket identity: psi_+ + psi_- = 2 N G kappa s") {
    TheoryModel m(TheoryParams::reference_setup());
    double sigma = m.sigma_corr_um();
    Rng rng(17);
    for (int i = 0; i < 10; ++i) {
        double x1 = (rng.next_double() - 0.5) * 3.0 * sigma;
        double x2 = (rng.next_double() - 0.5) * 3.0 * sigma;
        double s = x1 + x2;
        double lhs = m.psi(x1, x2, ModeSign::Plus) + m.psi(x1, x2, ModeSign::Minus);
        double g = m.psi(x1, x2, ModeSign::Plus) / (1.0 + std::sqrt(2.0) / sigma * s);
        double rhs = 2.0 * g * (std::sqrt(2.0) / sigma) * s;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("on the anti-diagonal only the envelope factor survives") {
    TheoryParams p = TheoryParams::reference_setup();
    TheoryModel m(p);
    double sigma_m = 0.5 * p.pump_width_mm * 1000.0 / p.diffraction_scale;
    for (double x : {100.0, 500.0, 1500.0}) {
        double expected = m.norm() * std::exp(-(2.0 * x) * (2.0 * x) / (4.0 * sigma_m * sigma_m));
        CHECK(m.psi(x, -x, ModeSign::Plus) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("normalisation matches the separable closed form") {
    for (double binv : {50.0, 25.0, 15.0}) {
        TheoryParams p = TheoryParams::reference_setup();
        p.diffraction_scale = 1.0 / binv;
        p.pump_width_mm = 4.8 / binv;
        TheoryModel m(p);
        double sigma = m.sigma_corr_um();
        double w_over_beta_um = p.pump_width_mm * 1000.0 / p.diffraction_scale;
        double n2 = std::sqrt(2.0) / (2.0 * 3.14159265358979323846 * sigma * w_over_beta_um);
        CHECK(m.norm() * m.norm() == doctest::Approx(n2).epsilon(1e-10));
    }
}

TEST_CASE("coincidence probability limits") {
    TheoryParams p = TheoryParams::reference_setup();
    TheoryModel m(p);
    double sigma = m.sigma_corr_um();
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
        double x1 = (rng.next_double() - 0.5) * 4.0 * sigma;
        double x2 = (rng.next_double() - 0.5) * 4.0 * sigma;
        double pp = m.psi(x1, x2, ModeSign::Plus);
        double pm = m.psi(x1, x2, ModeSign::Minus);
        // far delay: no interference term
        CHECK(m.coincidence_probability(x1, x2, 20.0 * p.dip_width_um) ==
              doctest::Approx(pp * pp + pm * pm).epsilon(1e-9));
        // zero delay: perfect indistinguishability
        CHECK(m.coincidence_probability(x1, x2, 0.0) ==
              doctest::Approx((pp + pm) * (pp + pm)).epsilon(1e-9));
        // exchange symmetry
        CHECK(m.coincidence_probability(x1, x2, 7.0) ==
              doctest::Approx(m.coincidence_probability(x2, x1, 7.0)).epsilon(1e-12));
        // nonnegative up to rounding
        CHECK(m.coincidence_probability(x1, x2, 7.0) >= -1e-12);
    }
}

TEST_CASE("fully dead pixels integrate to zero") {
    TheoryParams p = TheoryParams::reference_setup();
    p.loss_rate = 1.0;
    TheoryModel m(p);
    CHECK(m.pixel_pair_probability(15, 16, 0.0) == 0.0);
}

TEST_CASE("pixel integrals converge under order doubling") {
    TheoryParams p = TheoryParams::reference_setup();
    TheoryModel m(p);
    int n = p.pixel_count();
    // probe near-anti-diagonal pairs where the integrand is largest
    for (int i : {n / 2 - 2, n / 2, n / 2 + 3}) {
        int j = n - 1 - i;
        double lo = m.pixel_pair_probability_fixed(i, j, 5.0, 24);
        double hi = m.pixel_pair_probability_fixed(i, j, 5.0, 48);
        CHECK(std::abs(hi - lo) <= 1e-8 * std::abs(hi));
        // and the adaptive path agrees
        double adaptive = m.pixel_pair_probability(i, j, 5.0);
        CHECK(adaptive == doctest::Approx(hi).epsilon(1e-8));
    }
}

TEST_CASE("total coincidence probability decreases with the loss rate") {
    double prev = std::numeric_limits<double>::infinity();
    for (double gamma : {0.5, 0.7, 0.9}) {
        TheoryParams p = TheoryParams::reference_setup();
        p.loss_rate = gamma;
        TheoryModel m(p);
        auto t = m.total_terms();
        double total = m.total_coincidence(20.0 * p.dip_width_um, t);
        CHECK(total > 0.0);
        CHECK(total < prev);
        prev = total;
    }
}

TEST_CASE("reference-instrument spot values rise toward the optimum") {
    // gamma = 0.93, k_p = 2 pi / 347 nm, L_c = 0.5 mm; beta^-1 in {50, 25, 15}
    double prev_v = -1.0;
    double prev_r = 0.0;
    for (double binv : {50.0, 25.0, 15.0}) {
        TheoryParams p = TheoryParams::reference_setup();
        p.diffraction_scale = 1.0 / binv;
        p.pump_width_mm = 4.8 / binv; // constant illumination area
        TheoryModel m(p);
        double v = m.visibility();
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(p.pixel_ratio() > prev_r); // R grows as the correlation tightens
        CHECK(v > prev_v);               // still on the rising side of the optimum
        prev_v = v;
        prev_r = p.pixel_ratio();
    }
}

TEST_CASE("visibility curve peaks where the correlation width matches the pixel") {
    TheoryParams base = TheoryParams::reference_setup();
    std::vector<double> rs;
    for (double r = 0.2; r <= 4.0001; r += 0.1)
        rs.push_back(r);
    auto curve = visibility_curve(base, rs);
    size_t imax = 0;
    for (size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].visibility >= 0.0);
        CHECK(curve[i].visibility <= 1.0);
        if (curve[i].visibility > curve[imax].visibility)
            imax = i;
    }
    CHECK(imax > 0);
    CHECK(imax < curve.size() - 1);
    CHECK(curve[imax].pixel_ratio > 0.7);
    CHECK(curve[imax].pixel_ratio < 1.5);

    // R anchors: R = 1 maps to f0 = 300 mm and sigma = 150 / (2 sqrt(2 ln 2))
    auto at_one = visibility_curve(base, {1.0});
    CHECK(at_one[0].focal_length_mm == doctest::Approx(300.0));
    CHECK(at_one[0].sigma_corr_um == doctest::Approx(150.0 / fwhm_from_sigma(1.0)).epsilon(1e-9));

    // quadratic f0 mapping
    auto at_four = visibility_curve(base, {4.0});
    CHECK(at_four[0].focal_length_mm == doctest::Approx(600.0));
}
