#pragma once

// One-center (Kepler-type) problem with V(x) = m1 / (alpha |x|^alpha) and the
// center at the origin: parabolic collision-ejection solutions, blow-up
// rescaling, the Maupertuis functional, and the obstacle and fixed-end
// minimization problems.

#include <cstddef>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "ncenter/model.hpp"

namespace ncenter::kepler {

struct ParabolicEjection {
    double m1;
    double alpha;
    double phi_minus;  // direction of the incoming ray (t < 0)
    double phi_plus;   // direction of the outgoing ray (t > 0)

    /// Throws std::invalid_argument unless m1 > 0, alpha in [1, 2), |phi_plus - phi_minus| <= 2 pi.
    ParabolicEjection(double m1, double alpha, double phi_minus, double phi_plus);

    /// (alpha + 2) sqrt(m1 / (2 alpha)).
    double mu() const;
    /// 2 / (2 + alpha), the radial growth exponent.
    double beta() const { return 2.0 / (2.0 + alpha); }
};

/// (mu |t|)^beta along the outgoing ray for t >= 0, the incoming ray for t <= 0.
Vec2 parabolic_point(const ParabolicEjection& pe, double t);
/// Derivative of parabolic_point; throws std::invalid_argument at t = 0.
Vec2 parabolic_velocity(const ParabolicEjection& pe, double t);
/// Samples at the given times (none of them 0) with exact velocities.
OpenArc parabolic_arc(const ParabolicEjection& pe, const std::vector<double>& times);

/// Closed-form action of the ejection on [-T, T]:
/// 8 / ((2 + alpha)(2 - alpha)) mu^(4/(2+alpha)) T^((2-alpha)/(2+alpha)).
double ejection_action(const ParabolicEjection& pe, double T);

/// Kinetic and potential integrals of the curve that joins consecutive
/// samples by log-spirals (log-radius and angle linear in t, angle step
/// taken in (-pi, pi]). Both integrals are exact for that curve.
struct ArcIntegrals {
    double kinetic;    // int |x'|^2 / 2
    double potential;  // int m1 / (alpha |x|^alpha)
};
ArcIntegrals arc_integrals(const OpenArc& arc, double m1, double alpha);

/// Blow-up about `center`: t -> t / lambda, x -> lambda^(-beta) (x - c) + c,
/// velocities scaled by lambda^(1 - beta).
OpenArc lambda_rescale(const OpenArc& arc, double lambda, Vec2 center, double alpha);
/// Centers moved to c_k + lambda^(-beta) (c_j - c_k), masses unchanged.
CenterSystem blown_up_system(const CenterSystem& sys, double lambda, std::size_t k);

struct RescalingReport {
    std::vector<double> lambdas;
    std::vector<double> ratios;       // A^lambda(x_lambda) / A(x)
    double fitted_exponent;
    double r_squared;
    double derived_exponent;          // -(2 - alpha) / (2 + alpha)
    double stated_exponent;           // -2 / (2 + alpha)
    bool matches_derived;             // |fitted - derived| < tol
    bool matches_stated;
};
/// Measures how the action of an arc changes under blow-up about center k,
/// using model::arc_action on both sides, and fits a power law in lambda.
RescalingReport measure_rescaling(const OpenArc& arc, const CenterSystem& sys, std::size_t k,
                                  const std::vector<double>& lambdas, double tol = 1e-6);

/// Collision-ejection solution of the full N-center problem through center
/// k: started at radius r0 along each ray with zero energy and integrated
/// outward. Samples at +-t_i, t_i geometric from the parabolic time of r0 up
/// to T, n per side, with velocities. There is no sample at t = 0.
OpenArc collision_ejection_arc(const CenterSystem& sys, std::size_t k, double theta_minus, double theta_plus,
                               double T, std::size_t n, double r0 = 1e-8);

/// Angles of the samples nearest the collision on each side. Throws
/// NumericError when y does not approach `center` near t = 0.
std::pair<double, double> infer_collision_angles(const OpenArc& y, Vec2 center);

struct BlowupRow {
    double lambda;
    double sup_distance;           // over samples with |t / lambda| <= T
    double velocity_sup_distance;  // over samples with T/4 <= |t / lambda| <= T
};
/// Sup distances between the blow-ups of y (collision at t = 0 with `center`)
/// and the parabolic ejection pe. Requires velocities.
std::vector<BlowupRow> blowup_convergence(const OpenArc& y, Vec2 center, const ParabolicEjection& pe,
                                          const std::vector<double>& lambdas, double T);

struct MaupertuisRecord {
    double value;      // kinetic * (potential + h * duration)
    double omega;      // sqrt((potential + h * duration) / kinetic)
    double h;
    double kinetic;
    double potential;  // includes h * duration
};
/// Integrals as in arc_integrals. Throws NumericError when the potential
/// integral (with h) is not positive.
MaupertuisRecord maupertuis(const OpenArc& arc, double h, double m1, double alpha);

/// Relative size of the Maupertuis gradient at the interior samples (angular
/// component everywhere, radial component only off the obstacle radius).
double maupertuis_criticality(const OpenArc& arc, double h, double m1, double alpha, double obstacle = 0.0);

/// x(t) = y(omega t): times divided by omega, velocities multiplied by it.
/// Velocities of the input are taken from its log-spiral segments when absent.
/// Throws NumericError when maupertuis_criticality exceeds tol.
OpenArc maupertuis_to_solution(const OpenArc& arc, const MaupertuisRecord& rec, double m1, double alpha,
                               double tol = 1e-6, double obstacle = 0.0);

/// |x'|^2 / 2 - V(x) - h at the time midpoint of each log-spiral segment.
std::vector<double> midpoint_energies(const OpenArc& x, double h, double m1, double alpha);

/// Node velocities of the log-spiral curve: mean of the two adjacent segment
/// velocities at the node, one-sided at the ends.
std::vector<Vec2> spiral_velocities(const OpenArc& arc);

struct ObstacleSpec {
    double rho = 0.0;                  // obstacle radius, 0 for none
    std::optional<double> rho_bar;     // optional upper radius
    double T = 1.0;                    // half-interval
};

struct SolverReport {
    int iterations = 0;
    double gradient_norm = 0.0;        // max norm in the solver's variables
    bool converged = false;
};

struct ObstacleResult {
    OpenArc arc;                       // nodes on [-T, T]
    MaupertuisRecord record;
    std::optional<std::pair<double, double>> contact;  // [t-, t+] of |x| <= rho (1 + 1e-8)
    bool single_contact_interval = true;
    std::vector<double> angular_momentum;  // per segment, conserved at critical points
    double contact_angular_momentum;       // sqrt(2 m1 / (omega^2 alpha)) rho^((2 - alpha)/2)
    SolverReport solver;
};

/// Minimizes the Maupertuis functional (h = 0) over curves from pe(-T) to
/// pe(T) with endpoint arguments phi_minus, phi_plus and rho <= |x| (<= rho_bar).
/// Throws std::invalid_argument for an infeasible spec.
ObstacleResult obstacle_minimize(const ObstacleSpec& spec, const ParabolicEjection& pe, std::size_t n);

struct FixedEndRun {
    double seed_radius_factor;
    double action;
    SolverReport solver;
};

struct FixedEndResult {
    OpenArc arc;
    double action;                     // exact action of the log-spiral curve
    double ejection_action;
    double margin;                     // ejection_action - action
    double min_radius;
    std::vector<FixedEndRun> runs;     // every start, best first is not implied
    SolverReport solver;               // of the best run
};

/// Minimizes the action on [-T, T] over collision-free curves from pe(-T)
/// to pe(T) with the endpoint arguments of pe, from several seed circles.
FixedEndResult fixed_end_minimize(const ParabolicEjection& pe, double T, std::size_t n);

/// Angle swept by a zero-energy arc from its closest approach rho out to
/// r_star: 2 / (2 - alpha) (pi/2 - asin((rho / r_star)^((2 - alpha)/2))).
double angular_sweep(double rho, double r_star, double alpha);
/// 2 / (2 - alpha) (pi/2 - asin(rho / r_star)): the same expression with the
/// ratio not raised to (2 - alpha)/2. Agrees with angular_sweep only in the
/// limits rho -> 0 and rho = r_star; kept for comparison.
double angular_sweep_unscaled_ratio(double rho, double r_star, double alpha);
/// Quadrature of d theta / dr = (J / r^2) / sqrt(2 m1 / (omega^2 alpha r^alpha) - J^2 / r^2)
/// from rho to r_star, J = sqrt(2 m1 / (omega^2 alpha)) rho^((2 - alpha)/2).
double grazing_arc_sweep_numeric(double rho, double r_star, double alpha, double m1, double omega = 1.0);

struct SweepRow {
    double alpha;
    double rho_over_rstar;
    double sweep_closed;
    double sweep_numeric;
    double abs_err;
};
std::vector<SweepRow> sweep_table(const std::vector<double>& alphas, const std::vector<double>& ratios,
                                  double m1 = 1.0);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace ncenter::kepler
