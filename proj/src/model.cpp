#include "ncenter/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "controlled_sampling.hpp"

namespace ncenter {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 e = b - a;
    const double len2 = norm2(e);
    if (len2 == 0.0) return std::abs(p - a);
    const double u = std::clamp(dot(p - a, e) / len2, 0.0, 1.0);
    return std::abs(p - (a + u * e));
}

CenterSystem::CenterSystem(std::vector<double> masses, std::vector<Vec2> positions, double alpha)
    : masses_(std::move(masses)), positions_(std::move(positions)), alpha_(alpha) {
    if (masses_.empty()) throw std::invalid_argument("center system needs at least one center");
    if (masses_.size() != positions_.size())
        throw std::invalid_argument("masses and positions differ in length");
    for (double m : masses_)
        if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("masses must be positive");
    if (!(alpha_ >= 1.0 && alpha_ < 2.0)) throw std::invalid_argument("alpha must lie in [1, 2)");
    min_spacing_ = std::numeric_limits<double>::infinity();
    diameter_ = 0.0;
    for (std::size_t i = 0; i < positions_.size(); ++i)
        for (std::size_t j = i + 1; j < positions_.size(); ++j) {
            const double d = std::abs(positions_[i] - positions_[j]);
            min_spacing_ = std::min(min_spacing_, d);
            diameter_ = std::max(diameter_, d);
        }
    if (!(min_spacing_ > 0.0)) throw std::invalid_argument("center positions must be distinct");
}

double CenterSystem::length_scale() const { return size() >= 2 ? min_spacing_ : 1.0; }

double CenterSystem::collision_tolerance() const {
    return 1e-9 * (size() >= 2 ? diameter_ : 1.0);
}

CenterSystem CenterSystem::with_scaled_masses(double factor) const {
    std::vector<double> m = masses_;
    for (double& x : m) x *= factor;
    return CenterSystem(std::move(m), positions_, alpha_);
}

std::vector<std::size_t> CenterSystem::others(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < size(); ++j)
        if (j != k) out.push_back(j);
    return out;
}

PeriodicLoop::PeriodicLoop(double T, std::vector<Vec2> pts) : period(T), nodes(std::move(pts)) {
    if (!(period > 0.0)) throw std::invalid_argument("loop period must be positive");
    if (nodes.size() < 3) throw std::invalid_argument("loop needs at least 3 nodes");
}

const Vec2& PeriodicLoop::node(std::ptrdiff_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(nodes.size());
    return nodes[static_cast<std::size_t>(((k % n) + n) % n)];
}

double PeriodicLoop::length() const {
    double L = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) L += std::abs(node(k + 1) - nodes[k]);
    return L;
}

OpenArc::OpenArc(std::vector<double> t, std::vector<Vec2> p, std::vector<Vec2> v)
    : times(std::move(t)), points(std::move(p)), velocities(std::move(v)) {
    validate();
}

void OpenArc::validate() const {
    if (points.size() != times.size()) throw std::invalid_argument("arc: points and times differ in length");
    if (!velocities.empty() && velocities.size() != points.size())
        throw std::invalid_argument("arc: velocities and points differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("arc: times must increase strictly");
}

namespace {

[[noreturn]] void throw_singular(std::size_t j) {
    std::ostringstream os;
    os << "evaluation at singularity: point coincides with center " << j;
    throw SingularityError(j, os.str());
}

inline double term_potential(Vec2 d, double m, double alpha, std::size_t j) {
    const double r2 = norm2(d);
    if (r2 == 0.0) throw_singular(j);
    return m / (alpha * std::pow(r2, 0.5 * alpha));
}

inline Vec2 term_grad(Vec2 d, double m, double alpha, std::size_t j) {
    const double r2 = norm2(d);
    if (r2 == 0.0) throw_singular(j);
    return -m * d / std::pow(r2, 0.5 * alpha + 1.0);
}

}  // namespace

double potential(Vec2 p, const CenterSystem& sys) {
    double v = 0.0;
    for (std::size_t j = 0; j < sys.size(); ++j)
        v += term_potential(p - sys.position(j), sys.mass(j), sys.alpha(), j);
    return v;
}

Vec2 grad_potential(Vec2 p, const CenterSystem& sys) {
    Vec2 g = 0.0;
    for (std::size_t j = 0; j < sys.size(); ++j)
        g += term_grad(p - sys.position(j), sys.mass(j), sys.alpha(), j);
    return g;
}

double partial_potential(Vec2 p, const CenterSystem& sys, const std::vector<std::size_t>& which) {
    double v = 0.0;
    for (std::size_t j : which) v += term_potential(p - sys.position(j), sys.mass(j), sys.alpha(), j);
    return v;
}

Vec2 partial_grad_potential(Vec2 p, const CenterSystem& sys, const std::vector<std::size_t>& which) {
    Vec2 g = 0.0;
    for (std::size_t j : which) g += term_grad(p - sys.position(j), sys.mass(j), sys.alpha(), j);
    return g;
}

double lagrangian(Vec2 p, Vec2 v, const CenterSystem& sys) { return 0.5 * norm2(v) + potential(p, sys); }

Clearance loop_clearance(const PeriodicLoop& loop, const CenterSystem& sys) {
    Clearance c{std::numeric_limits<double>::infinity(), 0, 0};
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const Vec2 a = loop.nodes[k], b = loop.node(k + 1);
        for (std::size_t j = 0; j < sys.size(); ++j) {
            const double d = point_segment_distance(sys.position(j), a, b);
            if (d < c.distance) c = {d, j, k};
        }
    }
    return c;
}

namespace {

void check_segments(const PeriodicLoop& loop, const CenterSystem& sys) {
    const double eps = sys.collision_tolerance();
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const Vec2 a = loop.nodes[k], b = loop.node(k + 1);
        for (std::size_t j = 0; j < sys.size(); ++j) {
            if (point_segment_distance(sys.position(j), a, b) < eps) {
                std::ostringstream os;
                os << "collision in quadrature: segment " << k << " hits center " << j;
                throw CollisionError(k, j, os.str());
            }
        }
    }
}

}  // namespace

double action(const PeriodicLoop& loop, const CenterSystem& sys) {
    check_segments(loop, sys);
    const double dt = loop.dt();
    double kin = 0.0, pot = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const Vec2 a = loop.nodes[k], b = loop.node(k + 1);
        kin += norm2(b - a);
        pot += potential(0.5 * (a + b), sys);
    }
    return kin / (2.0 * dt) + dt * pot;
}

std::vector<Vec2> action_gradient(const PeriodicLoop& loop, const CenterSystem& sys) {
    check_segments(loop, sys);
    const std::size_t n = loop.size();
    const double dt = loop.dt();
    std::vector<Vec2> g(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k1 = (k + 1) % n;
        const Vec2 a = loop.nodes[k], b = loop.nodes[k1];
        const Vec2 dk = (b - a) / dt;
        const Vec2 gv = 0.5 * dt * grad_potential(0.5 * (a + b), sys);
        g[k] += -dk + gv;
        g[k1] += dk + gv;
    }
    return g;
}

double arc_action(const OpenArc& arc, const CenterSystem& sys) {
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < arc.size(); ++i) {
        const double dt = arc.times[i + 1] - arc.times[i];
        const Vec2 p = arc.points[i], q = arc.points[i + 1];
        a += norm2(q - p) / (2.0 * dt) + dt * potential(0.5 * (p + q), sys);
    }
    return a;
}

EnergyRecord energy(const OpenArc& arc, const CenterSystem& sys) {
    if (!arc.has_velocities()) throw std::invalid_argument("energy: arc has no velocities");
    if (arc.size() == 0) throw std::invalid_argument("energy: empty arc");
    std::vector<double> e(arc.size());
    for (std::size_t i = 0; i < arc.size(); ++i)
        e[i] = 0.5 * norm2(arc.velocities[i]) - potential(arc.points[i], sys);
    std::vector<double> sorted = e;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    EnergyRecord rec;
    rec.h = sorted[sorted.size() / 2];
    for (double x : e) rec.max_drift = std::max(rec.max_drift, std::abs(x - rec.h));
    return rec;
}

double eom_residual(const OpenArc& arc, const CenterSystem& sys) {
    if (arc.size() < 3) throw std::invalid_argument("eom_residual: need at least 3 samples");
    double res = 0.0;
    for (std::size_t i = 1; i + 1 < arc.size(); ++i) {
        const double h1 = arc.times[i] - arc.times[i - 1];
        const double h2 = arc.times[i + 1] - arc.times[i];
        const Vec2 acc = 2.0 * ((arc.points[i + 1] - arc.points[i]) / h2 -
                                (arc.points[i] - arc.points[i - 1]) / h1) / (h1 + h2);
        res = std::max(res, std::abs(acc - grad_potential(arc.points[i], sys)));
    }
    return res;
}

namespace {

// Fourth-order central difference; the loop's own O(dt^2) error is far
// smaller than that of the two-point estimate.
Vec2 node_velocity(const PeriodicLoop& loop, std::ptrdiff_t i) {
    return (loop.node(i - 2) - 8.0 * loop.node(i - 1) + 8.0 * loop.node(i + 1) - loop.node(i + 2)) / (12.0 * loop.dt());
}

}  // namespace

EnergyRecord loop_energy(const PeriodicLoop& loop, const CenterSystem& sys) {
    std::vector<double> e(loop.size());
    for (std::size_t k = 0; k < loop.size(); ++k)
        e[k] = 0.5 * norm2(node_velocity(loop, static_cast<std::ptrdiff_t>(k))) - potential(loop.nodes[k], sys);
    std::vector<double> sorted = e;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    EnergyRecord rec{sorted[sorted.size() / 2], 0.0};
    for (double x : e) rec.max_drift = std::max(rec.max_drift, std::abs(x - rec.h));
    return rec;
}

double loop_eom_residual(const PeriodicLoop& loop, const CenterSystem& sys) {
    const double dt = loop.dt();
    double res = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        const Vec2 acc = (loop.node(i + 1) - 2.0 * loop.node(i) + loop.node(i - 1)) / (dt * dt);
        res = std::max(res, std::abs(acc - grad_potential(loop.nodes[k], sys)));
    }
    return res;
}

OpenArc loop_to_arc(const PeriodicLoop& loop) {
    const std::size_t n = loop.size();
    OpenArc arc;
    arc.times.resize(n + 1);
    arc.points.resize(n + 1);
    arc.velocities.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        arc.times[k] = loop.time(k);
        arc.points[k] = loop.node(i);
        arc.velocities[k] = node_velocity(loop, i);
    }
    return arc;
}

OpenArc integrate_orbit(const CenterSystem& sys, Vec2 x0, Vec2 v0,
                        const std::vector<double>& sample_times, const IntegratorOptions& opts) {
    using State = std::array<double, 4>;
    if (sample_times.size() < 2) throw std::invalid_argument("integrate_orbit: need at least two sample times");
    const bool forward = sample_times[1] > sample_times[0];
    for (std::size_t i = 1; i < sample_times.size(); ++i)
        if ((sample_times[i] > sample_times[i - 1]) != forward || sample_times[i] == sample_times[i - 1])
            throw std::invalid_argument("integrate_orbit: sample times must be strictly monotone");

    const double eps = sys.collision_tolerance();
    auto rhs = [&](const State& s, State& ds, double) {
        const Vec2 p(s[0], s[1]);
        // A trial stage on a center gets a huge force so the step is rejected.
        for (std::size_t j = 0; j < sys.size(); ++j)
            if (std::abs(p - sys.position(j)) < eps) {
                ds = {s[2], s[3], 1e300, 1e300};
                return;
            }
        const Vec2 a = grad_potential(p, sys);
        ds = {s[2], s[3], a.real(), a.imag()};
    };
    auto accepted = [&](const State& s) {
        const Vec2 p(s[0], s[1]);
        for (std::size_t j = 0; j < sys.size(); ++j)
            if (std::abs(p - sys.position(j)) < eps)
                throw CollisionError(0, j, "integrate_orbit: trajectory reached a center");
    };

    std::vector<double> t_out;
    std::vector<Vec2> p_out, v_out;
    auto observe = [&](const State& s, double t) {
        t_out.push_back(t);
        p_out.emplace_back(s[0], s[1]);
        v_out.emplace_back(s[2], s[3]);
    };
    State s{x0.real(), x0.imag(), v0.real(), v0.imag()};
    const double dt0 = (sample_times[1] - sample_times[0]) * 1e-3;
    // Controlled stepping lands on every sample time exactly; dense-output
    // interpolation would cap the accuracy of the samples well above the tolerance.
    detail::controlled_sampling(rhs, s, sample_times, dt0, opts.abs_tol, opts.rel_tol, accepted, observe);

    if (!forward) {
        std::reverse(t_out.begin(), t_out.end());
        std::reverse(p_out.begin(), p_out.end());
        std::reverse(v_out.begin(), v_out.end());
    }
    return OpenArc(std::move(t_out), std::move(p_out), std::move(v_out));
}

}  // namespace ncenter
