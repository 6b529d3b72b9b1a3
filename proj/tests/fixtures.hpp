#pragma once

// Shared test fixtures: independent geometric oracles and random loop generators.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "ncenter/regularize.hpp"
#include "ncenter/topology.hpp"

namespace fixtures {

using ncenter::Vec2;

// Plain parametric solve for every non-adjacent segment pair; O(n^2).
inline std::set<std::pair<std::size_t, std::size_t>> brute_force_crossings(const std::vector<Vec2>& poly) {
    std::set<std::pair<std::size_t, std::size_t>> out;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 2; l < n; ++l) {
            if (k == 0 && l == n - 1) continue;
            const Vec2 a = poly[k], b = poly[(k + 1) % n], c = poly[l], d = poly[(l + 1) % n];
            const double m00 = b.real() - a.real(), m01 = c.real() - d.real();
            const double m10 = b.imag() - a.imag(), m11 = c.imag() - d.imag();
            const double det = m00 * m11 - m01 * m10;
            if (det == 0.0) continue;
            const double rx = c.real() - a.real(), ry = c.imag() - a.imag();
            const double s = (rx * m11 - m01 * ry) / det;
            const double u = (m00 * ry - rx * m10) / det;
            if (s > 0.0 && s < 1.0 && u > 0.0 && u < 1.0) out.emplace(k, l);
        }
    return out;
}

inline ncenter::PeriodicLoop fourier_loop(std::mt19937_64& rng, std::size_t n, double scale, int modes = 3) {
    std::normal_distribution<double> G(0.0, 1.0);
    std::vector<std::pair<int, Vec2>> coef;
    for (int k = -modes; k <= modes; ++k)
        if (k != 0) coef.emplace_back(k, scale * Vec2(G(rng), G(rng)) / (1.0 + std::abs(k)));
    const Vec2 shift = 0.3 * scale * Vec2(G(rng), G(rng));
    std::vector<Vec2> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        Vec2 p = shift;
        for (const auto& [k, c] : coef) p += c * std::polar(1.0, k * t);
        nodes[i] = p;
    }
    return ncenter::PeriodicLoop(2.0 * std::numbers::pi, std::move(nodes));
}

// Random class-preserving deformation: localized bumps (some twisted so they
// curl) are accepted only when the word is unchanged, the loop stays generic
// and the loop keeps some clearance from the centers. The word is a complete
// class invariant, so any accepted bump stays in the class whatever it swept.
inline ncenter::PeriodicLoop wiggle(const ncenter::PeriodicLoop& loop, const ncenter::CenterSystem& sys,
                                    std::mt19937_64& rng, int bumps) {
    namespace topo = ncenter::topology;
    const auto word = topo::homotopy_word(loop, sys);
    const double scale = sys.size() >= 2 ? sys.diameter() : 1.0;
    const double min_clear = 0.05 * sys.length_scale();
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto cur = loop;
    const std::size_t n = cur.size();
    int accepted = 0;
    for (int attempt = 0; accepted < bumps && attempt < 50 * bumps; ++attempt) {
        const auto k = static_cast<double>(static_cast<std::size_t>(U(rng) * static_cast<double>(n)) % n);
        const double width = 2.0 + 6.0 * U(rng);
        const Vec2 D = std::polar(scale * (0.2 + 1.3 * U(rng)), 2.0 * std::numbers::pi * U(rng));
        const double twist = U(rng) < 0.3 ? (U(rng) < 0.5 ? -1.0 : 1.0) * 2.5 / width : 0.0;
        auto next = cur;
        for (std::size_t i = 0; i < n; ++i) {
            double d = static_cast<double>(i) - k;
            d -= static_cast<double>(n) * std::round(d / static_cast<double>(n));
            next.nodes[i] += D * std::exp(-(d / width) * (d / width)) * std::polar(1.0, twist * d);
        }
        try {
            if (ncenter::loop_clearance(next, sys).distance < min_clear) continue;
            if (!(topo::homotopy_word(next, sys) == word)) continue;
            topo::self_intersections(next);
        } catch (const ncenter::Error&) {
            continue;
        }
        cur = std::move(next);
        ++accepted;
    }
    return cur;
}

// Newtonian four-center layout with a genuine bounce: along the x-axis the
// pulls of (0, +-1.5) cancel, so the zero-energy ejection from c1 towards
// c2 collides with c2 and the motion runs back and forth on [c1, c2].
struct Bounce {
    ncenter::CenterSystem sys;
    double t_mid;                 // c1 -> midpoint; c1 -> c2 takes 2 t_mid
    ncenter::PeriodicLoop loop;   // period 4 t_mid, at c1 when t = 0
    ncenter::OpenArc arc;         // dense arc through the collision with c1 at t = 0
};

inline Bounce four_center_bounce(std::size_t n = 256, std::size_t arc_samples = 400) {
    namespace reg = ncenter::regularize;
    const ncenter::CenterSystem sys({1, 1, 1, 1}, {Vec2(-0.5, 0), Vec2(0.5, 0), Vec2(0, 1.5), Vec2(0, -1.5)}, 1.0);
    const reg::LCState c = reg::lc_collision_state(sys, 0, 0.0, 0.0, 0.0);
    auto at = [&](double s) { return reg::integrate_lc(c, sys, s, 2).back(); };
    // |z|^2 = |y - c1| = 1/2 at the midpoint.
    auto reach = [&](double s) { return ncenter::norm2(at(s).z) - 0.5; };
    double lo = 0.0, hi = 0.1;
    while (reach(hi) < 0.0) lo = hi, hi += 0.1;
    for (int i = 0; i < 100; ++i) (reach(0.5 * (lo + hi)) < 0.0 ? lo : hi) = 0.5 * (lo + hi);
    const double s_mid = 0.5 * (lo + hi);
    const double t_mid = at(s_mid).t;

    // y(tau) for 0 <= tau <= t_mid by Newton on t(s), dt/ds = |z|^2.
    double s = 0.0;
    auto y_of = [&](double tau) {
        if (tau == 0.0) return sys.position(0);
        if (s == 0.0) s = std::cbrt(3.0 * tau / 0.5);  // t ~ |z'|^2 s^3 / 3 near the collision
        for (int i = 0; i < 60; ++i) {
            const reg::LCState st = at(s);
            const double step = (tau - st.t) / ncenter::norm2(st.z);
            s += step;
            if (std::abs(step) < 1e-15 * s) break;
        }
        const reg::LCState st = at(s);
        return st.z * st.z + sys.position(0);
    };
    const double T = 4.0 * t_mid;
    std::vector<Vec2> nodes(n);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        // Times 0 .. T/2 forward; the rest mirrors in time about t = 0.
        const double tau = T * static_cast<double>(k) / static_cast<double>(n);
        const Vec2 y = tau <= t_mid ? y_of(tau) : Vec2(0.0, 0.0);
        nodes[(k + n / 2) % n] = y;
    }
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double tau = T * static_cast<double>(k) / static_cast<double>(n);
        // Beyond the midpoint the motion is the mirror image x -> -x run backwards.
        if (tau > t_mid) {
            const std::size_t back = n / 2 - k;
            nodes[(k + n / 2) % n] = -nodes[(back + n / 2) % n];
        }
    }
    for (std::size_t k = 1; k < n / 2; ++k) nodes[(n / 2 - k) % n] = nodes[(n / 2 + k) % n];

    auto back = reg::integrate_lc(c, sys, -0.9 * s_mid, arc_samples);
    auto fwd = reg::integrate_lc(c, sys, 0.9 * s_mid, arc_samples);
    std::reverse(back.begin(), back.end());
    back.insert(back.end(), fwd.begin() + 1, fwd.end());
    return {sys, t_mid, ncenter::PeriodicLoop(T, std::move(nodes)), reg::lc_inverse(back, sys)};
}

}  // namespace fixtures
