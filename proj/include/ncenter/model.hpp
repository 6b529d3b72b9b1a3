#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "ncenter/errors.hpp"

namespace ncenter {

// Planar points and vectors are complex numbers: x + iy.
using Vec2 = std::complex<double>;

inline double dot(Vec2 a, Vec2 b) { return a.real() * b.real() + a.imag() * b.imag(); }
inline double cross(Vec2 a, Vec2 b) { return a.real() * b.imag() - a.imag() * b.real(); }
inline double norm2(Vec2 a) { return dot(a, a); }

/// Distance from p to the closed segment [a, b].
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

class CenterSystem {
public:
    CenterSystem(std::vector<double> masses, std::vector<Vec2> positions, double alpha);

    std::size_t size() const { return masses_.size(); }
    double mass(std::size_t j) const { return masses_[j]; }
    Vec2 position(std::size_t j) const { return positions_[j]; }
    const std::vector<double>& masses() const { return masses_; }
    const std::vector<Vec2>& positions() const { return positions_; }
    double alpha() const { return alpha_; }

    /// Smallest pairwise center distance; +inf for a single center.
    double min_spacing() const { return min_spacing_; }
    /// Largest pairwise center distance; 0 for a single center.
    double diameter() const { return diameter_; }
    /// Reference length: min spacing for N >= 2, otherwise 1 (caller units).
    double length_scale() const;
    /// Distance below which a node or segment is said to hit a center.
    double collision_tolerance() const;

    /// Same centers with masses scaled by `factor`.
    CenterSystem with_scaled_masses(double factor) const;
    /// All centers except `k` (for perturbation potentials). Empty when N = 1.
    std::vector<std::size_t> others(std::size_t k) const;

private:
    std::vector<double> masses_;
    std::vector<Vec2> positions_;
    double alpha_;
    double min_spacing_;
    double diameter_;
};

/// Closed polygon sampled at t_k = -T/2 + k T/n, node n identified with node 0.
struct PeriodicLoop {
    double period = 0.0;
    std::vector<Vec2> nodes;

    PeriodicLoop() = default;
    PeriodicLoop(double period, std::vector<Vec2> nodes);

    std::size_t size() const { return nodes.size(); }
    double dt() const { return period / static_cast<double>(nodes.size()); }
    double time(std::size_t k) const { return -0.5 * period + static_cast<double>(k) * dt(); }
    const Vec2& node(std::ptrdiff_t k) const;  // cyclic index
    double length() const;
};

struct OpenArc {
    std::vector<double> times;
    std::vector<Vec2> points;
    std::vector<Vec2> velocities;  // empty when absent

    OpenArc() = default;
    OpenArc(std::vector<double> times, std::vector<Vec2> points, std::vector<Vec2> velocities = {});

    std::size_t size() const { return times.size(); }
    bool has_velocities() const { return !velocities.empty(); }
    /// Throws std::invalid_argument when the invariants are broken.
    void validate() const;
};

struct EnergyRecord {
    double h = 0.0;
    double max_drift = 0.0;
};

double potential(Vec2 p, const CenterSystem& sys);
/// Gradient of the potential; the equation of motion is x'' = grad_potential(x).
Vec2 grad_potential(Vec2 p, const CenterSystem& sys);
double lagrangian(Vec2 p, Vec2 v, const CenterSystem& sys);

/// Potential restricted to a subset of centers (used for perturbation terms).
double partial_potential(Vec2 p, const CenterSystem& sys, const std::vector<std::size_t>& which);
Vec2 partial_grad_potential(Vec2 p, const CenterSystem& sys, const std::vector<std::size_t>& which);

/// Smallest distance from the polygon (nodes and segments) to any center,
/// and the center attaining it.
struct Clearance {
    double distance;
    std::size_t center;
    std::size_t segment;
};
Clearance loop_clearance(const PeriodicLoop& loop, const CenterSystem& sys);

double action(const PeriodicLoop& loop, const CenterSystem& sys);
std::vector<Vec2> action_gradient(const PeriodicLoop& loop, const CenterSystem& sys);

/// Same quadrature as `action` on an open polyline with its own time steps.
double arc_action(const OpenArc& arc, const CenterSystem& sys);

EnergyRecord energy(const OpenArc& arc, const CenterSystem& sys);
double eom_residual(const OpenArc& arc, const CenterSystem& sys);

/// Energy of a loop at its nodes, with fourth-order central-difference velocities.
EnergyRecord loop_energy(const PeriodicLoop& loop, const CenterSystem& sys);
/// Max over nodes of |second difference / dt^2 - grad V(x_k)|, cyclic.
double loop_eom_residual(const PeriodicLoop& loop, const CenterSystem& sys);
/// One period as an open arc (closing node repeated), velocities as in loop_energy.
OpenArc loop_to_arc(const PeriodicLoop& loop);

struct IntegratorOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
};

/// Integrate x'' = grad V(x) from (x0, v0) at sample_times[0] and record
/// every requested time. Times must be strictly monotone (either direction);
/// the returned arc is always in increasing time order.
OpenArc integrate_orbit(const CenterSystem& sys, Vec2 x0, Vec2 v0,
                        const std::vector<double>& sample_times,
                        const IntegratorOptions& opts = {});

}  // namespace ncenter
