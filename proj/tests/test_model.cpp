#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ncenter/model.hpp"

using namespace ncenter;
using std::numbers::pi;

namespace {

CenterSystem one_center(double m = 1.0, double alpha = 1.0) { return CenterSystem({m}, {Vec2(0, 0)}, alpha); }

PeriodicLoop circle(double radius, double T, std::size_t n, int turns = 1, Vec2 center = 0.0) {
    std::vector<Vec2> nodes(n);
    for (std::size_t k = 0; k < n; ++k)
        nodes[k] = center + std::polar(radius, turns * 2.0 * pi * static_cast<double>(k) / static_cast<double>(n));
    return PeriodicLoop(T, nodes);
}

double rel_err(Vec2 a, Vec2 b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("potential values") {
    CHECK(potential({1, 0}, one_center()) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(potential({2, 0}, one_center()) == doctest::Approx(0.5).epsilon(1e-15));
    const CenterSystem two({1, 1}, {Vec2(0, 0), Vec2(0, 1)}, 1.5);
    // mpmath, 30 digits: 1/1.5 + 1/(1.5 * sqrt(2)^1.5)
    CHECK(potential({1, 0}, two) == doctest::Approx(1.06306903833424035557).epsilon(1e-14));
    CHECK_THROWS_AS(potential({0, 0}, one_center()), SingularityError);
}

TEST_CASE("gradient values and finite differences") {
    CHECK(rel_err(grad_potential({1, 0}, one_center()), Vec2(-1, 0)) < 1e-15);
    CHECK(rel_err(grad_potential({0, 2}, one_center()), Vec2(0, -0.25)) < 1e-15);

    const CenterSystem sys({1.0, 0.7, 2.0}, {Vec2(0, 0), Vec2(1.3, 0.2), Vec2(-0.4, 1.1)}, 1.3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    int checked = 0;
    while (checked < 100) {
        const Vec2 p(U(rng), U(rng));
        bool near = false;
        for (const Vec2& c : sys.positions()) near |= std::abs(p - c) < 0.05;
        if (near) continue;
        const double h = 1e-6;
        const Vec2 fd((potential(p + Vec2(h, 0), sys) - potential(p - Vec2(h, 0), sys)) / (2 * h),
                      (potential(p + Vec2(0, h), sys) - potential(p - Vec2(0, h), sys)) / (2 * h));
        CHECK(rel_err(grad_potential(p, sys), fd) < 1e-6);
        ++checked;
    }
}

TEST_CASE("lagrangian") {
    CHECK(lagrangian({1, 0}, {0, 0}, one_center()) == doctest::Approx(1.0));
    CHECK(lagrangian({1, 0}, {2, 0}, one_center()) == doctest::Approx(3.0));
}

TEST_CASE("center system validation") {
    CHECK_THROWS_AS(CenterSystem({1.0, -1.0}, {Vec2(0, 0), Vec2(1, 0)}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(CenterSystem({1.0, 1.0}, {Vec2(0, 0), Vec2(0, 0)}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(CenterSystem({1.0}, {Vec2(0, 0)}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(CenterSystem({1.0}, {Vec2(0, 0)}, 0.5), std::invalid_argument);
}

TEST_CASE("circle action converges to the constant-speed closed form at second order") {
    // Unit circle, speed 1, V = 1 on the circle: 2 pi (1/2 + 1) = 3 pi.
    const auto sys = one_center();
    double prev_err = 0.0;
    for (std::size_t n : {64u, 128u, 256u, 512u}) {
        const double err = std::abs(action(circle(1.0, 2 * pi, n), sys) - 3 * pi);
        if (prev_err > 0.0) CHECK(prev_err / err == doctest::Approx(4.0).epsilon(0.02));
        prev_err = err;
    }
    CHECK(prev_err < 1e-4);
    // Traversed twice: speed 2, kinetic 2, potential 1.
    CHECK(action(circle(1.0, 2 * pi, 4096, 2), sys) == doctest::Approx(6 * pi).epsilon(1e-5));
}

TEST_CASE("action symmetries") {
    const CenterSystem sys({1.0, 2.0}, {Vec2(-0.5, 0), Vec2(0.5, 0.1)}, 1.5);
    auto loop = circle(1.3, 5.0, 97);
    for (auto& p : loop.nodes) p += Vec2(0.1 * std::sin(7.0 * std::arg(p)), 0.0);
    const double a0 = action(loop, sys);

    auto shifted = loop;
    std::rotate(shifted.nodes.begin(), shifted.nodes.begin() + 31, shifted.nodes.end());
    CHECK(std::abs(action(shifted, sys) - a0) <= 1e-12 * a0);

    auto reversed = loop;
    std::reverse(reversed.nodes.begin(), reversed.nodes.end());
    CHECK(std::abs(action(reversed, sys) - a0) <= 1e-12 * a0);

    const Vec2 shift(3.7, -1.2);
    const CenterSystem moved({1.0, 2.0}, {Vec2(-0.5, 0) + shift, Vec2(0.5, 0.1) + shift}, 1.5);
    auto translated = loop;
    for (auto& p : translated.nodes) p += shift;
    CHECK(std::abs(action(translated, moved) - a0) <= 1e-12 * a0);
}

TEST_CASE("kinetic term under period scaling") {
    const auto sys = one_center();
    const auto loop = circle(1.0, 2 * pi, 200);
    auto kinetic = [&](const PeriodicLoop& l) {
        double pot = 0.0;
        for (std::size_t k = 0; k < l.size(); ++k) pot += potential(0.5 * (l.nodes[k] + l.node(k + 1)), sys);
        return action(l, sys) - l.dt() * pot;
    };
    const double s = 3.0;
    const PeriodicLoop fast(loop.period / s, loop.nodes);
    // Velocities scale by s; kinetic energy by s^2; its time integral by s.
    CHECK(kinetic(fast) / fast.period == doctest::Approx(s * s * kinetic(loop) / loop.period).epsilon(1e-12));
}

TEST_CASE("collision in quadrature reports the segment") {
    const CenterSystem sys({1.0}, {Vec2(0, 0)}, 1.0);
    const PeriodicLoop loop(1.0, {Vec2(-1, 0), Vec2(1, 0), Vec2(0, 1)});
    try {
        action(loop, sys);
        FAIL("expected collision");
    } catch (const CollisionError& e) {
        CHECK(e.index == 0);
        CHECK(e.center == 0);
    }
}

TEST_CASE("action gradient matches central differences") {
    const CenterSystem sys({1.0, 0.7, 2.0}, {Vec2(0, 0), Vec2(1.3, 0.2), Vec2(-0.4, 1.1)}, 1.3);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-0.2, 0.2);
    auto loop = circle(2.5, 4.0, 64, 1, Vec2(0.3, 0.4));
    for (auto& p : loop.nodes) p += Vec2(U(rng), U(rng));
    const auto g = action_gradient(loop, sys);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        Vec2 fd;
        for (int c = 0; c < 2; ++c) {
            const Vec2 e = c == 0 ? Vec2(h, 0) : Vec2(0, h);
            auto lp = loop, lm = loop;
            lp.nodes[k] += e;
            lm.nodes[k] -= e;
            const double d = (action(lp, sys) - action(lm, sys)) / (2 * h);
            fd += c == 0 ? Vec2(d, 0) : Vec2(0, d);
        }
        worst = std::max(worst, rel_err(g[k], fd));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("gradient on a non-critical circle is radial") {
    const auto g = action_gradient(circle(0.7, 2 * pi, 128), one_center());
    const auto loop = circle(0.7, 2 * pi, 128);
    for (std::size_t k = 0; k < loop.size(); ++k)
        CHECK(std::abs(cross(g[k], loop.nodes[k])) <= 1e-12 * std::abs(g[k]) * std::abs(loop.nodes[k]));
}

TEST_CASE("gradient vanishes at a refined periodic solution") {
    // Circular Kepler orbit of period 2 pi, alpha = 1, m = 1: radius 1.
    double prev = 1e300;
    for (std::size_t n : {64u, 256u, 1024u}) {
        const auto g = action_gradient(circle(1.0, 2 * pi, n), one_center());
        double worst = 0.0;
        for (const auto& v : g) worst = std::max(worst, std::abs(v));
        CHECK(worst < prev);
        prev = worst;
    }
    CHECK(prev < 1e-7);
}

TEST_CASE("energy records") {
    const double r = 2.0, m = 1.0;
    const double v = std::sqrt(m / r);
    std::vector<double> t;
    std::vector<Vec2> p, vel;
    for (int i = 0; i < 100; ++i) {
        const double s = 0.1 * i;
        const double th = v / r * s;
        t.push_back(s);
        p.push_back(std::polar(r, th));
        vel.push_back(Vec2(0, v) * std::polar(1.0, th));
    }
    const auto rec = energy(OpenArc(t, p, vel), one_center(m));
    CHECK(rec.h == doctest::Approx(-m / (2 * r)).epsilon(1e-14));
    CHECK(rec.max_drift < 1e-14);
    CHECK_THROWS_AS(energy(OpenArc(t, p), one_center(m)), std::invalid_argument);
}

TEST_CASE("integrator conserves energy over ten time units") {
    const CenterSystem sys({1.0, 1.0}, {Vec2(-0.5, 0), Vec2(0.5, 0)}, 1.5);
    std::vector<double> times;
    for (int i = 0; i <= 1000; ++i) times.push_back(0.01 * i);
    const auto arc = integrate_orbit(sys, Vec2(0, 1.5), Vec2(0.7, 0.0), times);
    CHECK(arc.size() == times.size());
    // Closest approach to a center is about 0.1 along this arc.
    CHECK(energy(arc, sys).max_drift < 1e-8);

    std::vector<double> back(times.rbegin(), times.rend());
    const auto rev = integrate_orbit(sys, arc.points.back(), arc.velocities.back(), back);
    CHECK(std::abs(rev.points.front() - Vec2(0, 1.5)) < 1e-8);
}

TEST_CASE("equation of motion residual") {
    const double dt = 2 * pi / 1e4;
    std::vector<double> t;
    std::vector<Vec2> p;
    for (int i = 0; i < 200; ++i) {
        t.push_back(i * dt);
        p.push_back(std::polar(1.0, i * dt));
    }
    const double res = eom_residual(OpenArc(t, p), one_center());
    CHECK(res < dt * dt);

    std::vector<Vec2> line;
    for (int i = 0; i < 200; ++i) line.push_back(Vec2(1.0, i * dt));
    const double straight = eom_residual(OpenArc(t, line), one_center());
    CHECK(straight == doctest::Approx(std::abs(grad_potential(Vec2(1.0, dt), one_center()))).epsilon(1e-9));
    CHECK_THROWS(eom_residual(OpenArc({0.0, 1.0}, {Vec2(1, 0), Vec2(2, 0)}), one_center()));
}
