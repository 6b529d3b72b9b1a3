#pragma once

// Levi-Civita regularization of a Newtonian (alpha = 1) collision with one
// center, the reflection criterion at a collision, and power-law checks of
// the collision asymptotics (any alpha in [1, 2)).

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "ncenter/model.hpp"

namespace ncenter::regularize {

// z^2 = y - c_k, dt = |z|^2 ds.
struct LCState {
    Vec2 z;
    Vec2 zprime;        // dz/ds = conj(z) y' / 2
    double s = 0.0;
    double t = 0.0;     // physical time
    double h = 0.0;     // energy of the physical motion
    std::size_t k = 0;  // regularized center
};

/// Maps an arc with velocities into Levi-Civita coordinates about center k.
/// The square-root branch is continued along the arc, through z = 0 by
/// matching the Taylor prediction from the previous state. s starts at 0 and
/// each step solves dt = int |z(s)|^2 ds on the cubic Hermite interpolant.
/// A sample exactly at c_k gets z = 0 and the previous z'. h is the median
/// sample energy. Throws std::invalid_argument for alpha != 1 or a missing
/// velocity, NumericError when the first sample sits on c_k.
std::vector<LCState> lc_forward(const OpenArc& arc, const CenterSystem& sys, std::size_t k);

/// y = z^2 + c_k, y' = 2 z' / conj(z), t from the states. States with z = 0
/// (infinite physical speed) are dropped; the result runs forward in time.
OpenArc lc_inverse(const std::vector<LCState>& states, const CenterSystem& sys);

/// Regularized state from a physical point and velocity off c_k.
LCState lc_state(Vec2 y, Vec2 v, double t, const CenterSystem& sys, std::size_t k);
/// Regularized state at a collision with c_k at time t: z = 0 and
/// z' = sqrt(m_k / 2) e^(i theta / 2), so y leaves c_k along angle theta.
LCState lc_collision_state(const CenterSystem& sys, std::size_t k, double theta, double h, double t);

/// z'' = (h z + z V_k(y) + |z|^2 conj(z) grad V_k(y)) / 2 with y = z^2 + c_k
/// and V_k the potential of the other centers. Throws SingularityError on
/// another center.
Vec2 lc_rhs(const LCState& st, const CenterSystem& sys);

struct LCIntegratorOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
};

/// Integrates (z, z', t) with t' = |z|^2 from initial.s to s_end (either
/// direction) and returns `samples` states equally spaced in s, the initial
/// state first. Throws CollisionError when the motion reaches another center.
std::vector<LCState> integrate_lc(const LCState& initial, const CenterSystem& sys, double s_end, std::size_t samples,
                                  const LCIntegratorOptions& opts = {});

enum class Verdict { Reflection, Transversal };

struct ReflectionReport {
    Verdict verdict;
    std::size_t center;
    double collision_time;
    // Outward limits of z' on each side of the collision (z' from the
    // right, minus z' from the left), each defined up to sign.
    Vec2 limit_minus;
    Vec2 limit_plus;
    double angle_gap;              // theta_plus - theta_minus, wrapped to (-pi, pi]
    double antisymmetry_residual;  // min(|L+ + L-|, |L+ - L-|) / |L+|
    double symmetry_residual;      // max |y(t0 + t) - y(t0 - t)| / max |y - c_k| over the window
    double window;                 // half-width of that window in t
};

/// Locates the sample closest to a center, regularizes about it, and
/// extrapolates z' to the collision from 5 samples on each side (Neville).
/// Reflection when the antisymmetry residual is below tol: the arc leaves
/// along the ray it came in on. Throws std::invalid_argument for alpha != 1,
/// NumericError when no sample is within 1e-3 of the arc's extent of a
/// center, when either side has fewer than 5 samples, or when the limits do
/// not settle.
ReflectionReport reflection_test(const OpenArc& y, const CenterSystem& sys, double tol);

struct LagrangeJacobiReport {
    double h;                         // median sample energy
    std::vector<double> times;        // interior samples used
    std::vector<double> iddot;        // d/dt of I' = 2 <y - c, y'>, second-order differences
    std::vector<double> identity;     // (4 - 2 alpha)(h + V) + B1
    std::vector<double> b1;           // 2 alpha (h + V*) + 2 <grad V*, y - c>
    double max_relative_residual;     // max |iddot - identity| / max |identity|
    double max_abs_b1;
    double max_abs_iddot;
    double max_b1_rate_ratio;         // max |B1'| / |y'|
};

/// Checks the Lagrange-Jacobi identity along an arc with velocities near a
/// collision with center k (V* is the potential of the other centers).
/// Throws std::invalid_argument with fewer than 5 samples.
LagrangeJacobiReport lagrange_jacobi_check(const OpenArc& y, const CenterSystem& sys, std::size_t k);

struct AsymptoticFit {
    std::string quantity;        // I, I', I'', V, kinetic, J, theta'
    double fitted_exponent;
    double expected_exponent;
    double amplitude;            // exp of the log-log intercept
    double expected_amplitude;   // NaN where no amplitude is predicted
    double t_lo, t_hi;           // window in |t - t0|
    double r_squared;
    std::size_t samples;
};

/// Log-log fits against |t - t0| over samples with t_lo <= |t - t0| <= t_hi,
/// both sides pooled, for a collision with center k at t0:
/// I = |y - c|^2 ~ (mu |t|)^(4/(2+alpha)), |I'|, I'', V and |y'|^2 / 2, and
/// for N >= 2 also |J| and |theta'| (J ~ |t|^((4+alpha)/(2+alpha))).
/// Throws NumericError when fewer than 8 samples fall in the window or the
/// window spans less than two decades.
std::vector<AsymptoticFit> asymptotic_fit(const OpenArc& y, const CenterSystem& sys, std::size_t k, double t0,
                                          double t_lo, double t_hi);

/// quantity,expected,fitted,r_squared,window_lo,window_hi
void write_fits_csv(std::ostream& os, const std::vector<AsymptoticFit>& fits);

}  // namespace ncenter::regularize
