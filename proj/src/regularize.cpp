#include "ncenter/regularize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "controlled_sampling.hpp"

namespace ncenter::regularize {

using std::numbers::pi;

namespace {

void require_newtonian(const CenterSystem& sys, const char* who) {
    if (sys.alpha() != 1.0)
        throw std::invalid_argument(std::string(who) + ": Levi-Civita regularization needs alpha = 1");
}

void require_center(const CenterSystem& sys, std::size_t k, const char* who) {
    if (k >= sys.size()) throw std::out_of_range(std::string(who) + ": no such center");
}

// Potential and force of every center except k.
double other_potential(Vec2 y, const CenterSystem& sys, std::size_t k) {
    return sys.size() > 1 ? partial_potential(y, sys, sys.others(k)) : 0.0;
}
Vec2 other_force(Vec2 y, const CenterSystem& sys, std::size_t k) {
    return sys.size() > 1 ? partial_grad_potential(y, sys, sys.others(k)) : Vec2(0.0, 0.0);
}

// Median energy over the samples off every center.
double median_energy(const OpenArc& arc, const CenterSystem& sys) {
    std::vector<double> e;
    for (std::size_t i = 0; i < arc.size(); ++i) {
        if (!std::isfinite(arc.velocities[i].real()) || !std::isfinite(arc.velocities[i].imag())) continue;
        bool on_center = false;
        for (std::size_t j = 0; j < sys.size(); ++j) on_center |= arc.points[i] == sys.position(j);
        if (!on_center) e.push_back(0.5 * norm2(arc.velocities[i]) - potential(arc.points[i], sys));
    }
    if (e.empty()) throw NumericError("no sample with a finite energy");
    std::nth_element(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(e.size() / 2), e.end());
    return e[e.size() / 2];
}

// Cubic Hermite interpolant of z on one step of length ds in s, u in [0, 1].
struct Hermite {
    Vec2 z0, d0, z1, d1;  // d = ds * z'
    Vec2 operator()(double u) const {
        const double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * z0 + (u3 - 2 * u2 + u) * d0 + (-2 * u3 + 3 * u2) * z1 + (u3 - u2) * d1;
    }
};

// Four-point Gauss-Legendre on [0, v]; exact for the degree-6 |z|^2.
template <class F>
double gauss4(F f, double v) {
    static const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
    static const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
    static const double wa = (18.0 + std::sqrt(30.0)) / 36.0, wb = (18.0 - std::sqrt(30.0)) / 36.0;
    const double c = 0.5 * v;
    return c * (wa * (f(c * (1 - a)) + f(c * (1 + a))) + wb * (f(c * (1 - b)) + f(c * (1 + b))));
}

// Smallest positive root of an increasing-from-negative f, bracketed by doubling from guess.
template <class F>
double first_root(F f, double guess) {
    double lo = 0.0, hi = guess > 0.0 && std::isfinite(guess) ? guess : 1.0;
    for (int i = 0; f(hi) < 0.0; ++i) {
        if (i > 200) throw NumericError("Levi-Civita step: no fictitious-time increment found");
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Increment in s for a step dt starting at (z, z') along the Taylor line z + z' s.
double taylor_step(Vec2 z, Vec2 zp, double dt) {
    const double c1 = norm2(z), c2 = dot(z, zp), c3 = norm2(zp) / 3.0;
    const double guess = c1 > 0.0 ? dt / c1 : std::cbrt(dt / c3);
    return first_root([&](double s) { return s * (c1 + s * (c2 + s * c3)) - dt; }, guess);
}

// Increment in s such that int |z|^2 ds over the Hermite step equals dt.
double hermite_step(const LCState& a, Vec2 z1, Vec2 zp1, double dt, double guess) {
    return first_root(
        [&](double ds) {
            const Hermite H{a.z, ds * a.zprime, z1, ds * zp1};
            return ds * gauss4([&](double u) { return norm2(H(u)); }, 1.0) - dt;
        },
        guess);
}

// Physical position on the step between two states at time t in [a.t, b.t].
Vec2 position_at(const LCState& a, const LCState& b, double t, Vec2 c) {
    const double ds = b.s - a.s;
    const Hermite H{a.z, ds * a.zprime, b.z, ds * b.zprime};
    auto elapsed = [&](double v) { return ds * gauss4([&](double u) { return norm2(H(u)); }, v); };
    const double target = std::abs(t - a.t);
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::abs(elapsed(mid)) < target ? lo : hi) = mid;
    }
    const Vec2 z = H(0.5 * (lo + hi));
    return z * z + c;
}

struct Extrapolated {
    Vec2 value;
    double error;
};

// Neville's scheme at x; the error estimate compares the last two orders.
Extrapolated neville(const std::vector<double>& xs, const std::vector<Vec2>& ys, double x) {
    std::vector<Vec2> p = ys;
    const std::size_t n = xs.size();
    Vec2 lower = p[n - 1];
    for (std::size_t m = 1; m < n; ++m) {
        for (std::size_t i = 0; i + m < n; ++i)
            p[i] = ((x - xs[i + m]) * p[i] + (xs[i] - x) * p[i + 1]) / (xs[i] - xs[i + m]);
        if (m == n - 2) lower = p[1];
    }
    return {p[0], std::abs(p[0] - lower)};
}

struct LineFit {
    double slope, intercept, r_squared;
};

LineFit fit_line(const std::vector<double>& X, const std::vector<double>& Y) {
    const double n = static_cast<double>(X.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < X.size(); ++i) mx += X[i] / n, my += Y[i] / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    const double slope = sxy / sxx;
    double ss = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double e = Y[i] - my - slope * (X[i] - mx);
        ss += e * e;
    }
    return {slope, my - slope * mx, syy > 0 ? std::clamp(1.0 - ss / syy, 0.0, 1.0) : 1.0};
}

// Second-order derivative estimate at interior sample i of a non-uniform grid.
double central_derivative(const std::vector<double>& t, const std::vector<double>& f, std::size_t i) {
    const double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
    return (h1 * h1 * f[i + 1] - h2 * h2 * f[i - 1] + (h2 * h2 - h1 * h1) * f[i]) / (h1 * h2 * (h1 + h2));
}

}  // namespace

LCState lc_state(Vec2 y, Vec2 v, double t, const CenterSystem& sys, std::size_t k) {
    require_newtonian(sys, "lc_state");
    require_center(sys, k, "lc_state");
    const Vec2 d = y - sys.position(k);
    if (d == Vec2(0.0, 0.0)) throw NumericError("lc_state: point is the regularized center; use lc_collision_state");
    LCState st;
    st.z = std::sqrt(d);
    st.zprime = 0.5 * std::conj(st.z) * v;
    st.t = t;
    st.h = 0.5 * norm2(v) - potential(y, sys);
    st.k = k;
    return st;
}

LCState lc_collision_state(const CenterSystem& sys, std::size_t k, double theta, double h, double t) {
    require_newtonian(sys, "lc_collision_state");
    require_center(sys, k, "lc_collision_state");
    LCState st;
    st.z = Vec2(0.0, 0.0);
    st.zprime = std::sqrt(0.5 * sys.mass(k)) * std::polar(1.0, 0.5 * theta);
    st.t = t;
    st.h = h;
    st.k = k;
    return st;
}

std::vector<LCState> lc_forward(const OpenArc& arc, const CenterSystem& sys, std::size_t k) {
    require_newtonian(sys, "lc_forward");
    require_center(sys, k, "lc_forward");
    arc.validate();
    if (arc.size() == 0) throw std::invalid_argument("lc_forward: empty arc");
    if (!arc.has_velocities()) throw std::invalid_argument("lc_forward: arc needs velocities");
    const Vec2 c = sys.position(k);
    const double h = median_energy(arc, sys);

    std::vector<LCState> out;
    out.reserve(arc.size());
    for (std::size_t i = 0; i < arc.size(); ++i) {
        const Vec2 d = arc.points[i] - c;
        LCState st;
        st.t = arc.times[i];
        st.h = h;
        st.k = k;
        if (i == 0) {
            if (d == Vec2(0.0, 0.0)) throw NumericError("lc_forward: first sample is at the center, branch undetermined");
            st.z = std::sqrt(d);
            st.zprime = 0.5 * std::conj(st.z) * arc.velocities[i];
            out.push_back(st);
            continue;
        }
        const LCState& prev = out.back();
        const double dt = arc.times[i] - prev.t;
        const double guess = taylor_step(prev.z, prev.zprime, dt);
        if (d == Vec2(0.0, 0.0)) {
            // One-sided continuation: z' carries over from the previous sample.
            st.z = Vec2(0.0, 0.0);
            st.zprime = prev.zprime;
        } else {
            const Vec2 w = std::sqrt(d);
            const Vec2 predicted = prev.z + prev.zprime * guess;
            st.z = std::abs(w - predicted) <= std::abs(w + predicted) ? w : -w;
            st.zprime = 0.5 * std::conj(st.z) * arc.velocities[i];
        }
        st.s = prev.s + hermite_step(prev, st.z, st.zprime, dt, guess);
        out.push_back(st);
    }
    return out;
}

OpenArc lc_inverse(const std::vector<LCState>& states, const CenterSystem& sys) {
    OpenArc arc;
    for (const LCState& st : states) {
        require_center(sys, st.k, "lc_inverse");
        if (st.z == Vec2(0.0, 0.0)) continue;
        arc.times.push_back(st.t);
        arc.points.push_back(st.z * st.z + sys.position(st.k));
        arc.velocities.push_back(2.0 * st.zprime / std::conj(st.z));
    }
    if (arc.size() > 1 && arc.times[1] < arc.times[0]) {
        std::reverse(arc.times.begin(), arc.times.end());
        std::reverse(arc.points.begin(), arc.points.end());
        std::reverse(arc.velocities.begin(), arc.velocities.end());
    }
    arc.validate();
    return arc;
}

Vec2 lc_rhs(const LCState& st, const CenterSystem& sys) {
    require_newtonian(sys, "lc_rhs");
    require_center(sys, st.k, "lc_rhs");
    const Vec2 y = st.z * st.z + sys.position(st.k);
    const double Vk = other_potential(y, sys, st.k);
    const Vec2 F = other_force(y, sys, st.k);
    return 0.5 * (st.h * st.z + st.z * Vk + norm2(st.z) * std::conj(st.z) * F);
}

std::vector<LCState> integrate_lc(const LCState& initial, const CenterSystem& sys, double s_end, std::size_t samples,
                                  const LCIntegratorOptions& opts) {
    using State = std::array<double, 5>;
    require_newtonian(sys, "integrate_lc");
    require_center(sys, initial.k, "integrate_lc");
    if (samples < 2) throw std::invalid_argument("integrate_lc: need at least two samples");
    if (s_end == initial.s) throw std::invalid_argument("integrate_lc: empty fictitious-time span");

    const double eps = sys.collision_tolerance();
    const Vec2 c = sys.position(initial.k);
    auto near_other = [&](Vec2 z) {
        const Vec2 y = z * z + c;
        for (std::size_t j = 0; j < sys.size(); ++j)
            if (j != initial.k && std::abs(y - sys.position(j)) < eps) return j;
        return sys.size();
    };
    auto rhs = [&](const State& x, State& dx, double) {
        LCState st = initial;
        st.z = Vec2(x[0], x[1]);
        // A trial stage on another center is rejected through a huge derivative.
        const Vec2 a = near_other(st.z) < sys.size() ? Vec2(1e300, 1e300) : lc_rhs(st, sys);
        dx = {x[2], x[3], a.real(), a.imag(), norm2(st.z)};
    };
    auto accepted = [&](const State& x) {
        if (const std::size_t j = near_other(Vec2(x[0], x[1])); j < sys.size())
            throw CollisionError(0, j, "integrate_lc: motion reached another center");
    };

    std::vector<double> grid(samples);
    for (std::size_t i = 0; i < samples; ++i)
        grid[i] = initial.s + (s_end - initial.s) * static_cast<double>(i) / static_cast<double>(samples - 1);
    grid.back() = s_end;

    std::vector<LCState> out;
    auto observe = [&](const State& x, double s) {
        LCState st = initial;
        st.z = Vec2(x[0], x[1]);
        st.zprime = Vec2(x[2], x[3]);
        st.t = x[4];
        st.s = s;
        out.push_back(st);
    };
    const State x{initial.z.real(), initial.z.imag(), initial.zprime.real(), initial.zprime.imag(), initial.t};
    detail::controlled_sampling(rhs, x, grid, (grid[1] - grid[0]) * 1e-2, opts.abs_tol, opts.rel_tol, accepted, observe);
    return out;
}

ReflectionReport reflection_test(const OpenArc& y, const CenterSystem& sys, double tol) {
    require_newtonian(sys, "reflection_test");
    y.validate();
    if (!y.has_velocities()) throw std::invalid_argument("reflection_test: arc needs velocities");
    if (y.size() < 10) throw NumericError("reflection_test: insufficient samples");

    std::size_t im = 0, k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < sys.size(); ++j)
            if (const double d = std::abs(y.points[i] - sys.position(j)); d < best) best = d, im = i, k = j;
    const Vec2 c = sys.position(k);
    double extent = 0.0;
    for (const Vec2& p : y.points) extent = std::max(extent, std::abs(p - c));
    if (!(best < 1e-3 * extent)) throw NumericError("reflection_test: no collision detected");

    const std::vector<LCState> st = lc_forward(y, sys, k);
    const LCState& m = st[im];
    const double s_star = m.z == Vec2(0.0, 0.0) ? m.s : m.s - dot(m.zprime, m.z) / norm2(m.zprime);

    std::vector<std::size_t> minus, plus;
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (st[i].z == Vec2(0.0, 0.0)) continue;
        if (st[i].s < s_star) minus.push_back(i);
        if (st[i].s > s_star && plus.size() < 5) plus.push_back(i);
    }
    if (minus.size() < 5 || plus.size() < 5) throw NumericError("reflection_test: insufficient samples near the collision");
    minus.erase(minus.begin(), minus.end() - 5);

    auto limit = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> xs;
        std::vector<Vec2> ys;
        // Nearest sample first so the error estimate drops the farthest one.
        for (auto it = idx.begin(); it != idx.end(); ++it) {
            xs.push_back(st[*it].s);
            ys.push_back(st[*it].zprime);
        }
        if (st[idx.front()].s < s_star) {
            std::reverse(xs.begin(), xs.end());
            std::reverse(ys.begin(), ys.end());
        }
        const Extrapolated e = neville(xs, ys, s_star);
        if (!(e.error <= 1e-3 * std::abs(e.value)))
            throw NumericError("reflection_test: one-sided limits of z' do not settle");
        return e.value;
    };

    ReflectionReport rep{};
    rep.center = k;
    rep.limit_plus = limit(plus);
    rep.limit_minus = -limit(minus);
    const Vec2 Lp = rep.limit_plus, Lm = rep.limit_minus;
    rep.antisymmetry_residual = std::min(std::abs(Lp + Lm), std::abs(Lp - Lm)) / std::abs(Lp);
    rep.angle_gap = std::arg((Lp * Lp) / (Lm * Lm));
    if (rep.angle_gap <= -pi) rep.angle_gap = pi;
    rep.verdict = rep.antisymmetry_residual < tol ? Verdict::Reflection : Verdict::Transversal;

    // Collision time on the step containing s_star.
    const LCState& a = st[minus.back()];
    const LCState& b = st[plus.front()];
    {
        const double ds = b.s - a.s;
        const Hermite H{a.z, ds * a.zprime, b.z, ds * b.zprime};
        rep.collision_time = a.t + ds * gauss4([&](double u) { return norm2(H(u)); }, (s_star - a.s) / ds);
    }
    const double t0 = rep.collision_time;

    // Time symmetry about t0 over the 5-sample window on the shorter side.
    rep.window = std::min(st[plus.back()].t - t0, t0 - st[minus.front()].t);
    auto locate = [&](double t) {
        for (std::size_t i = 0; i + 1 < st.size(); ++i)
            if (st[i].t <= t && t <= st[i + 1].t) return position_at(st[i], st[i + 1], t, c);
        throw NumericError("reflection_test: mirror time outside the arc");
    };
    double gap = 0.0, amp = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double tau = y.times[i] - t0;
        if (std::abs(tau) > rep.window || st[i].z == Vec2(0.0, 0.0)) continue;
        gap = std::max(gap, std::abs(y.points[i] - locate(t0 - tau)));
        amp = std::max(amp, std::abs(y.points[i] - c));
    }
    rep.symmetry_residual = amp > 0.0 ? gap / amp : 0.0;
    return rep;
}

LagrangeJacobiReport lagrange_jacobi_check(const OpenArc& y, const CenterSystem& sys, std::size_t k) {
    require_center(sys, k, "lagrange_jacobi_check");
    y.validate();
    if (!y.has_velocities()) throw std::invalid_argument("lagrange_jacobi_check: arc needs velocities");
    if (y.size() < 5) throw std::invalid_argument("lagrange_jacobi_check: insufficient samples");
    const double a = sys.alpha();
    const Vec2 c = sys.position(k);

    LagrangeJacobiReport rep{};
    rep.h = median_energy(y, sys);
    const std::size_t n = y.size();
    std::vector<double> idot(n), b1(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = y.points[i] - c;
        idot[i] = 2.0 * dot(d, y.velocities[i]);
        b1[i] = 2.0 * a * (rep.h + other_potential(y.points[i], sys, k)) + 2.0 * dot(other_force(y.points[i], sys, k), d);
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double dd = central_derivative(y.times, idot, i);
        const double id = (4.0 - 2.0 * a) * (rep.h + potential(y.points[i], sys)) + b1[i];
        rep.times.push_back(y.times[i]);
        rep.iddot.push_back(dd);
        rep.identity.push_back(id);
        rep.b1.push_back(b1[i]);
        rep.max_relative_residual = std::max(rep.max_relative_residual, std::abs(dd - id));
        rep.max_abs_b1 = std::max(rep.max_abs_b1, std::abs(b1[i]));
        rep.max_abs_iddot = std::max(rep.max_abs_iddot, std::abs(dd));
        const double speed = std::abs(y.velocities[i]);
        if (speed > 0.0)
            rep.max_b1_rate_ratio = std::max(rep.max_b1_rate_ratio, std::abs(central_derivative(y.times, b1, i)) / speed);
    }
    double scale = 0.0;
    for (double id : rep.identity) scale = std::max(scale, std::abs(id));
    if (scale > 0.0) rep.max_relative_residual /= scale;
    return rep;
}

std::vector<AsymptoticFit> asymptotic_fit(const OpenArc& y, const CenterSystem& sys, std::size_t k, double t0,
                                          double t_lo, double t_hi) {
    require_center(sys, k, "asymptotic_fit");
    y.validate();
    if (!y.has_velocities()) throw std::invalid_argument("asymptotic_fit: arc needs velocities");
    if (!(t_lo > 0.0 && t_hi >= 100.0 * t_lo))
        throw NumericError("asymptotic_fit: window must span at least two decades of |t - t0|");
    const double a = sys.alpha(), m = sys.mass(k);
    const double mu = (a + 2.0) * std::sqrt(m / (2.0 * a));
    const double eI = 4.0 / (2.0 + a), eV = -2.0 * a / (2.0 + a);
    const double ampI = std::pow(mu, eI);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Vec2 c = sys.position(k);

    struct Spec {
        const char* name;
        double exponent, amplitude;
    };
    std::vector<Spec> specs = {
        {"I", eI, ampI},
        {"I'", (2.0 - a) / (2.0 + a), eI * ampI},
        {"I''", eV, 4.0 * (2.0 - a) / ((2.0 + a) * (2.0 + a)) * ampI},
        {"V", eV, m / a * std::pow(mu, eV)},
        {"kinetic", eV, m / a * std::pow(mu, eV)},
    };
    if (sys.size() > 1) {
        specs.push_back({"J", (4.0 + a) / (2.0 + a), nan});
        specs.push_back({"theta'", a / (2.0 + a), nan});
    }
    std::vector<std::vector<double>> X(specs.size()), Y(specs.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double tau = std::abs(y.times[i] - t0);
        if (tau < t_lo || tau > t_hi) continue;
        const Vec2 d = y.points[i] - c, v = y.velocities[i];
        const double I = norm2(d), J = cross(d, v);
        const double q[] = {I,
                            2.0 * dot(d, v),
                            2.0 * norm2(v) + 2.0 * dot(d, grad_potential(y.points[i], sys)),
                            potential(y.points[i], sys),
                            0.5 * norm2(v),
                            J,
                            J / I};
        for (std::size_t s = 0; s < specs.size(); ++s)
            if (q[s] != 0.0) {
                X[s].push_back(std::log(tau));
                Y[s].push_back(std::log(std::abs(q[s])));
            }
    }
    std::vector<AsymptoticFit> fits;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        if (X[s].size() < 8) throw NumericError("asymptotic_fit: fewer than 8 samples in the window");
        const LineFit f = fit_line(X[s], Y[s]);
        fits.push_back({specs[s].name, f.slope, specs[s].exponent, std::exp(f.intercept), specs[s].amplitude, t_lo, t_hi,
                        f.r_squared, X[s].size()});
    }
    return fits;
}

void write_fits_csv(std::ostream& os, const std::vector<AsymptoticFit>& fits) {
    os << "quantity,expected,fitted,r_squared,window_lo,window_hi\n" << std::setprecision(17);
    for (const auto& f : fits)
        os << f.quantity << ',' << f.expected_exponent << ',' << f.fitted_exponent << ',' << f.r_squared << ','
           << f.t_lo << ',' << f.t_hi << '\n';
}

}  // namespace ncenter::regularize
