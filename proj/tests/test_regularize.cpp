#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "ncenter/kepler.hpp"
#include "ncenter/minimize.hpp"
#include "ncenter/regularize.hpp"

using namespace ncenter;
using namespace ncenter::regularize;
using std::numbers::pi;

namespace {

const CenterSystem two_centers({1.0, 1.0}, {Vec2(-0.5, 0.0), Vec2(0.5, 0.0)}, 1.0);

// +-t_i with t_i geometric from lo to hi, n per side.
std::vector<double> symmetric_times(double lo, double hi, std::size_t n) {
    std::vector<double> side(n), ts;
    for (std::size_t i = 0; i < n; ++i)
        side[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    for (std::size_t i = n; i-- > 0;) ts.push_back(-side[i]);
    for (double t : side) ts.push_back(t);
    return ts;
}

// Dense physical arc through a collision with center k: integrated both ways
// in s from z = 0 and mapped back (the collision sample itself is dropped).
OpenArc bounce_arc(const CenterSystem& sys, std::size_t k, double theta, double h, double s_half, std::size_t n) {
    const LCState c = lc_collision_state(sys, k, theta, h, 0.0);
    auto back = integrate_lc(c, sys, -s_half, n);
    auto fwd = integrate_lc(c, sys, s_half, n);
    std::reverse(back.begin(), back.end());
    back.insert(back.end(), fwd.begin() + 1, fwd.end());
    return lc_inverse(back, sys);
}

OpenArc time_reversed(const OpenArc& a) {
    OpenArc r;
    for (std::size_t i = a.size(); i-- > 0;) {
        r.times.push_back(-a.times[i]);
        r.points.push_back(a.points[i]);
        r.velocities.push_back(-a.velocities[i]);
    }
    return r;
}

}  // namespace

TEST_CASE("forward and inverse maps round trip") {
    std::vector<double> ts;
    for (int i = 0; i <= 400; ++i) ts.push_back(0.005 * i);
    const OpenArc arc = integrate_orbit(two_centers, Vec2(0.0, 0.7), Vec2(0.9, 0.1), ts);
    for (std::size_t k : {0u, 1u}) {
        const auto st = lc_forward(arc, two_centers, k);
        REQUIRE(st.size() == arc.size());
        for (std::size_t i = 1; i < st.size(); ++i) CHECK(st[i].s > st[i - 1].s);
        const OpenArc back = lc_inverse(st, two_centers);
        double err = 0.0;
        for (std::size_t i = 0; i < arc.size(); ++i)
            err = std::max({err, std::abs(back.points[i] - arc.points[i]), std::abs(back.velocities[i] - arc.velocities[i])});
        CHECK(err < 1e-9);

        // The fictitious time from the Hermite steps agrees with the integrator.
        const auto re = integrate_lc(st.front(), two_centers, st.back().s, 50);
        CHECK(re.back().t == doctest::Approx(arc.times.back()).epsilon(1e-6));
        CHECK(std::abs(re.back().z - st.back().z) < 1e-6);
    }
}

TEST_CASE("branch continues through a radial bounce") {
    const kepler::ParabolicEjection pe(1.0, 1.0, 0.0, 0.0);
    const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, 1.0);
    const OpenArc arc = kepler::parabolic_arc(pe, symmetric_times(1e-6, 1.0, 60));
    const auto st = lc_forward(arc, one, 0);
    for (const auto& s : st) {
        CHECK(std::abs(s.z.imag()) < 1e-12);
        CHECK(std::abs(s.zprime - Vec2(-pe.mu() / 3.0, 0.0)) < 1e-9);
        CHECK(std::abs(s.s) < 1e3);
    }
    // z changes sign with t: the continued root, not the principal one.
    CHECK(st.front().z.real() > 0.0);
    CHECK(st.back().z.real() < 0.0);
    // |z'| at the collision is sqrt(m / 2).
    CHECK(std::abs(st.front().zprime) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("exact collision sample") {
    const kepler::ParabolicEjection pe(1.0, 1.0, 0.0, 0.0);
    const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, 1.0);
    OpenArc arc = kepler::parabolic_arc(pe, symmetric_times(1e-4, 1.0, 20));
    const auto mid = arc.times.begin() + 20;
    arc.times.insert(mid, 0.0);
    arc.points.insert(arc.points.begin() + 20, Vec2(0.0, 0.0));
    arc.velocities.insert(arc.velocities.begin() + 20, Vec2(std::nan(""), 0.0));
    const auto st = lc_forward(arc, one, 0);
    CHECK(st[20].z == Vec2(0.0, 0.0));
    CHECK(std::abs(st[20].zprime - st[19].zprime) < 1e-15);
    CHECK(st[21].z.real() < 0.0);
    CHECK(lc_inverse(st, one).size() == arc.size() - 1);

    OpenArc starts_there = arc;
    starts_there.times.erase(starts_there.times.begin(), starts_there.times.begin() + 20);
    starts_there.points.erase(starts_there.points.begin(), starts_there.points.begin() + 20);
    starts_there.velocities.erase(starts_there.velocities.begin(), starts_there.velocities.begin() + 20);
    CHECK_THROWS_AS(lc_forward(starts_there, one, 0), NumericError);
}

TEST_CASE("argument validation") {
    const CenterSystem soft({1.0}, {Vec2(0.0, 0.0)}, 1.5);
    const OpenArc arc({0.0, 1.0}, {Vec2(1.0, 0.0), Vec2(1.0, 1.0)}, {Vec2(0.0, 1.0), Vec2(0.0, 1.0)});
    CHECK_THROWS_AS(lc_forward(arc, soft, 0), std::invalid_argument);
    CHECK_THROWS_AS(lc_forward(OpenArc({0.0, 1.0}, {Vec2(1.0, 0.0), Vec2(1.0, 1.0)}), two_centers, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(lc_state(Vec2(-0.5, 0.0), Vec2(1.0, 0.0), 0.0, two_centers, 0), NumericError);
    CHECK_THROWS_AS(lc_collision_state(soft, 0, 0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("regularized right-hand side") {
    const CenterSystem one({2.0}, {Vec2(0.3, -0.1)}, 1.0);
    LCState st = lc_state(Vec2(1.0, 0.4), Vec2(-0.2, 0.5), 0.0, one, 0);
    CHECK(std::abs(lc_rhs(st, one) - 0.5 * st.h * st.z) < 1e-15);

    LCState c = lc_collision_state(two_centers, 1, 0.7, -0.3, 0.0);
    CHECK(lc_rhs(c, two_centers) == Vec2(0.0, 0.0));
    CHECK(std::abs(c.zprime) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    // Second differences of an integrated solution against the rhs.
    st = lc_state(Vec2(0.2, 0.3), Vec2(-0.4, 0.6), 0.0, two_centers, 1);
    double prev = 0.0;
    for (double ds : {1e-2, 5e-3}) {
        const auto path = integrate_lc(st, two_centers, st.s + 2.0 * ds, 3);
        const Vec2 fd = (path[2].z - 2.0 * path[1].z + path[0].z) / (ds * ds);
        const double err = std::abs(fd - lc_rhs(path[1], two_centers));
        if (prev > 0.0) CHECK(prev / err > 3.5);
        prev = err;
    }
}

TEST_CASE("regularized flow conserves energy") {
    const LCState st = lc_state(Vec2(-0.2, 0.2), Vec2(-0.3, 0.5), 0.0, two_centers, 0);
    const auto path = integrate_lc(st, two_centers, 3.0, 300);
    double closest = 1.0;
    for (const auto& s : path) closest = std::min(closest, norm2(s.z));
    CHECK(closest < 1e-2);
    const OpenArc arc = lc_inverse(path, two_centers);
    double drift = 0.0;
    for (std::size_t i = 0; i < arc.size(); ++i)
        drift = std::max(drift, std::abs(0.5 * norm2(arc.velocities[i]) - potential(arc.points[i], two_centers) - st.h));
    CHECK(drift < 1e-8);
}

TEST_CASE("integrate from a collision reproduces the parabolic radius") {
    const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, 1.0);
    const double mu = 3.0 * std::sqrt(0.5);
    const LCState c = lc_collision_state(one, 0, 0.4, 0.0, 0.0);
    double err = 0.0, t_min = 0.0, t_max = 0.0;
    for (double s_end : {-2.0, 2.0}) {
        for (const auto& s : integrate_lc(c, one, s_end, 200)) {
            err = std::max(err, std::abs(norm2(s.z) - std::cbrt(mu * mu * s.t * s.t)));
            if (s.z != Vec2(0.0, 0.0)) CHECK(std::abs(std::arg(s.z * s.z) - 0.4) < 1e-12);
            t_min = std::min(t_min, s.t);
            t_max = std::max(t_max, s.t);
        }
    }
    CHECK(t_min < -1.0);
    CHECK(t_max > 1.0);
    CHECK(err < 1e-6);
}

TEST_CASE("reflection at a two-center collision") {
    const OpenArc arc = bounce_arc(two_centers, 0, 2.0, -0.2, 1.0, 400);
    const ReflectionReport r = reflection_test(arc, two_centers, 1e-6);
    CHECK(r.verdict == Verdict::Reflection);
    CHECK(r.center == 0);
    CHECK(std::abs(r.collision_time) < 1e-10);
    CHECK(r.antisymmetry_residual < 1e-8);
    CHECK(std::abs(r.angle_gap) < 1e-6);
    CHECK(r.symmetry_residual < 1e-8);
    CHECK(r.window > 0.0);
    // Outgoing direction: L+^2 points along the ejection angle.
    CHECK(std::abs(std::arg(r.limit_plus * r.limit_plus) - 2.0) < 1e-6);

    const ReflectionReport rev = reflection_test(time_reversed(arc), two_centers, 1e-6);
    CHECK(rev.verdict == Verdict::Reflection);
    CHECK(rev.antisymmetry_residual < 1e-8);
}

TEST_CASE("straight passage through a center is transversal") {
    const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, 1.0);
    const kepler::ParabolicEjection pe(1.0, 1.0, 0.0, pi);
    const OpenArc arc = kepler::parabolic_arc(pe, symmetric_times(1e-6, 1.0, 60));
    const ReflectionReport r = reflection_test(arc, one, 1e-6);
    CHECK(r.verdict == Verdict::Transversal);
    CHECK(std::abs(std::abs(r.angle_gap) - pi) < 1e-9);
    CHECK(r.antisymmetry_residual == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(r.symmetry_residual > 1.0);
    CHECK(reflection_test(time_reversed(arc), one, 1e-6).verdict == Verdict::Transversal);

    // A bend of pi/2.
    const OpenArc bent = kepler::parabolic_arc(kepler::ParabolicEjection(1.0, 1.0, 0.0, pi / 2), symmetric_times(1e-6, 1.0, 60));
    CHECK(std::abs(reflection_test(bent, one, 1e-6).angle_gap - pi / 2) < 1e-9);
}

TEST_CASE("reflection test rejects arcs without a collision") {
    std::vector<double> ts;
    for (int i = 0; i <= 100; ++i) ts.push_back(0.01 * i);
    const OpenArc arc = integrate_orbit(two_centers, Vec2(0.0, 0.7), Vec2(0.9, 0.1), ts);
    CHECK_THROWS_AS(reflection_test(arc, two_centers, 1e-6), NumericError);

    const OpenArc one_sided = kepler::parabolic_arc(kepler::ParabolicEjection(1.0, 1.0, 0.0, 0.0),
                                                    {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3, 0.6, 1.0});
    CHECK_THROWS_AS(reflection_test(one_sided, CenterSystem({1.0}, {Vec2(0.0, 0.0)}, 1.0), 1e-6), NumericError);
}

TEST_CASE("Lagrange-Jacobi identity on a circular orbit") {
    // I is constant, so I'' = 0 = (4 - 2 alpha)(h + V) + 2 alpha h.
    for (double a : {1.0, 1.5}) {
        const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, a);
        std::vector<double> ts;
        for (int i = 0; i <= 200; ++i) ts.push_back(0.01 * i);
        const OpenArc arc = integrate_orbit(one, Vec2(1.0, 0.0), Vec2(0.0, 1.0), ts);
        const auto rep = lagrange_jacobi_check(arc, one, 0);
        CHECK(rep.h == doctest::Approx(0.5 - 1.0 / a).epsilon(1e-10));
        for (std::size_t i = 0; i < rep.times.size(); ++i) {
            CHECK(std::abs(rep.identity[i]) < 1e-10);
            CHECK(std::abs(rep.iddot[i]) < 1e-8);
        }
        CHECK(rep.b1.front() == doctest::Approx(2.0 * a * rep.h).epsilon(1e-10));
    }
}

TEST_CASE("Lagrange-Jacobi identity near a collision") {
    const double a = 1.5;
    const kepler::ParabolicEjection pe(1.0, a, 0.2, 1.9);
    const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, a);
    const auto rep = lagrange_jacobi_check(kepler::parabolic_arc(pe, symmetric_times(1e-6, 1.0, 400)), one, 0);
    // Away from the kink at t = 0 the geometric grid is smooth in log t.
    for (std::size_t i = 0; i < rep.times.size(); ++i)
        if (std::abs(rep.times[i]) > 1e-5) CHECK(std::abs(rep.iddot[i] - rep.identity[i]) / std::abs(rep.identity[i]) < 1e-3);
    CHECK(rep.max_abs_b1 < 1e-9);

    // Two centers, uniform grid: second-order convergence and bounded B1.
    const CenterSystem sys({1.0, 1.0}, {Vec2(-0.5, 0.0), Vec2(0.5, 0.0)}, a);
    double prev = 0.0;
    for (double dt : {2e-3, 1e-3}) {
        std::vector<double> uts;
        for (double t = 0.0; t <= 0.3 + 1e-12; t += dt) uts.push_back(t);
        const OpenArc u = integrate_orbit(sys, Vec2(0.0, 0.6), Vec2(0.8, 0.0), uts);
        const auto r = lagrange_jacobi_check(u, sys, 0);
        if (prev > 0.0) CHECK(prev / r.max_relative_residual > 3.5);
        prev = r.max_relative_residual;
    }
    CHECK(prev < 1e-4);

    const OpenArc near = kepler::collision_ejection_arc(sys, 0, 2.5, 1.0, 0.05, 200);
    const auto rn = lagrange_jacobi_check(near, sys, 0);
    CHECK(std::isfinite(rn.max_abs_b1));
    CHECK(rn.max_abs_b1 < 20.0);
    CHECK(rn.max_b1_rate_ratio < 20.0);
    CHECK(rn.max_abs_iddot > 100.0 * rn.max_abs_b1);
}

TEST_CASE("collision asymptotics of the parabolic ejection") {
    for (double a : {1.0, 1.25, 1.5, 1.75}) {
        const kepler::ParabolicEjection pe(1.3, a, 0.5, 2.0);
        const CenterSystem one({1.3}, {Vec2(0.0, 0.0)}, a);
        const OpenArc arc = kepler::parabolic_arc(pe, symmetric_times(1e-7, 1e-1, 80));
        const auto fits = asymptotic_fit(arc, one, 0, 0.0, 1e-6, 1e-2);
        REQUIRE(fits.size() == 5);
        for (const auto& f : fits) {
            INFO(f.quantity << " alpha " << a);
            CHECK(std::abs(f.fitted_exponent - f.expected_exponent) < 0.01 * std::abs(f.expected_exponent));
            CHECK(f.amplitude == doctest::Approx(f.expected_amplitude).epsilon(1e-6));
            CHECK(f.r_squared > 0.999999);
        }
    }
}

TEST_CASE("collision asymptotics with a second center") {
    for (double a : {1.0, 1.5}) {
        const CenterSystem sys({1.0, 1.0}, {Vec2(-0.5, 0.0), Vec2(0.5, 0.0)}, a);
        const OpenArc arc = kepler::collision_ejection_arc(sys, 0, 2.5, 1.0, 0.01, 300);
        const auto fits = asymptotic_fit(arc, sys, 0, 0.0, 1e-5, 1e-3);
        REQUIRE(fits.size() == 7);
        for (const auto& f : fits) {
            INFO(f.quantity << " alpha " << a);
            CHECK(std::abs(f.fitted_exponent - f.expected_exponent) < 0.03 * std::abs(f.expected_exponent));
        }
        CHECK(std::isnan(fits[5].expected_amplitude));
    }
}

TEST_CASE("fit window validation and CSV") {
    const kepler::ParabolicEjection pe(1.0, 1.0, 0.0, 1.0);
    const CenterSystem one({1.0}, {Vec2(0.0, 0.0)}, 1.0);
    const OpenArc arc = kepler::parabolic_arc(pe, symmetric_times(1e-7, 1e-1, 80));
    CHECK_THROWS_AS(asymptotic_fit(arc, one, 0, 0.0, 1e-3, 1e-2), NumericError);
    CHECK_THROWS_AS(asymptotic_fit(kepler::parabolic_arc(pe, symmetric_times(1e-7, 1e-1, 5)), one, 0, 0.0, 1e-6, 1e-2),
                    NumericError);
    std::ostringstream os;
    write_fits_csv(os, asymptotic_fit(arc, one, 0, 0.0, 1e-6, 1e-2));
    CHECK(os.str().rfind("quantity,expected,fitted,r_squared,window_lo,window_hi\nI,", 0) == 0);
}

TEST_CASE("four-center bounce fixture") {
    const auto b = fixtures::four_center_bounce();
    CHECK(b.t_mid > 0.0);
    // The loop is a solution: energy zero at the nodes away from the collisions.
    const double dt = b.loop.dt();
    for (std::size_t k = 0; k < b.loop.size(); ++k) {
        const Vec2 p = b.loop.nodes[k];
        CHECK(std::abs(p.imag()) < 1e-14);
        if (std::abs(std::abs(p.real()) - 0.5) < 0.15) continue;
        const Vec2 v = (b.loop.node(static_cast<std::ptrdiff_t>(k) + 1) - b.loop.node(static_cast<std::ptrdiff_t>(k) - 1)) / (2 * dt);
        CHECK(std::abs(0.5 * norm2(v) - potential(p, b.sys)) < 1e-2 * potential(p, b.sys));
    }
    const auto r = reflection_test(b.arc, b.sys, 1e-4);
    CHECK(r.verdict == Verdict::Reflection);
    CHECK(r.antisymmetry_residual < 1e-8);
    CHECK(r.symmetry_residual < 1e-8);

    const auto cls = classify_outcome(b.loop, b.sys, 1e-3);
    CHECK(cls.status == Status::CollisionReflectionCandidate);
    REQUIRE(cls.reflection.has_value());
    CHECK(std::min(cls.reflection->k1, cls.reflection->k2) == 0);
    CHECK(std::max(cls.reflection->k1, cls.reflection->k2) == 1);
    CHECK(cls.reflection->Tbar == doctest::Approx(2.0 * b.t_mid).epsilon(1e-12));
    CHECK(cls.reflection->off_winding == std::vector<int>{0, 0});
}
