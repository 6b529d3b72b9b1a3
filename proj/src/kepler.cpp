#include "ncenter/kepler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

namespace ncenter::kepler {

using std::numbers::pi;

ParabolicEjection::ParabolicEjection(double m1_, double alpha_, double phi_minus_, double phi_plus_)
    : m1(m1_), alpha(alpha_), phi_minus(phi_minus_), phi_plus(phi_plus_) {
    if (!(m1 > 0.0)) throw std::invalid_argument("parabolic ejection: mass must be positive");
    if (!(alpha >= 1.0 && alpha < 2.0)) throw std::invalid_argument("parabolic ejection: alpha must lie in [1, 2)");
    if (!(std::abs(phi_plus - phi_minus) <= 2.0 * pi * (1.0 + 1e-15)))
        throw std::invalid_argument("parabolic ejection: |phi_plus - phi_minus| must not exceed 2 pi");
}

double ParabolicEjection::mu() const { return (alpha + 2.0) * std::sqrt(m1 / (2.0 * alpha)); }

Vec2 parabolic_point(const ParabolicEjection& pe, double t) {
    const double r = std::pow(pe.mu() * std::abs(t), pe.beta());
    return std::polar(r, t >= 0.0 ? pe.phi_plus : pe.phi_minus);
}

Vec2 parabolic_velocity(const ParabolicEjection& pe, double t) {
    if (t == 0.0) throw std::invalid_argument("parabolic_velocity: undefined at the collision");
    const double mu = pe.mu(), b = pe.beta();
    const double speed = b * mu * std::pow(mu * std::abs(t), b - 1.0);
    return t > 0.0 ? std::polar(speed, pe.phi_plus) : -std::polar(speed, pe.phi_minus);
}

OpenArc parabolic_arc(const ParabolicEjection& pe, const std::vector<double>& times) {
    std::vector<Vec2> p, v;
    for (double t : times) {
        p.push_back(parabolic_point(pe, t));
        v.push_back(parabolic_velocity(pe, t));
    }
    return OpenArc(times, std::move(p), std::move(v));
}

double ejection_action(const ParabolicEjection& pe, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("ejection_action: T must be positive");
    const double a = pe.alpha;
    // Zero energy makes the Lagrangian 2V = 2 m1 / (alpha (mu t)^(2 alpha/(2+alpha))).
    return 8.0 / ((2.0 + a) * (2.0 - a)) * std::pow(pe.mu(), 4.0 / (2.0 + a)) *
           std::pow(T, (2.0 - a) / (2.0 + a));
}

namespace {

// f(x) = (e^x - 1) / x and its derivative, with series near 0.
double expm1_ratio(double x) {
    if (std::abs(x) < 1e-3) return 1.0 + x * (0.5 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720))));
    return std::expm1(x) / x;
}

double expm1_ratio_d(double x) {
    if (std::abs(x) < 1e-3) return 0.5 + x * (1.0 / 3 + x * (1.0 / 8 + x * (1.0 / 30 + x / 144)));
    return (x * std::exp(x) - std::expm1(x)) / (x * x);
}

// One log-spiral segment from (a, theta) to (b, theta + q) over time dt.
struct Segment {
    double K, dK_da, dK_db, dK_dq;  // int |x'|^2 / 2
    double P, dP_da, dP_db;         // int |x|^-alpha
    double J;                       // dK/dq, the discrete angular momentum
};

Segment segment(double a, double b, double q, double dt, double alpha) {
    Segment s{};
    const double D = b - a;
    const double e2 = std::exp(2.0 * a);
    const double f = expm1_ratio(2.0 * D), fd = expm1_ratio_d(2.0 * D);
    const double E = e2 * f;                       // time average of r^2
    const double dE_da = 2.0 * e2 * (f - fd), dE_db = 2.0 * e2 * fd;
    const double w = D * D + q * q;
    s.K = w * E / (2.0 * dt);
    s.dK_da = (-2.0 * D * E + w * dE_da) / (2.0 * dt);
    s.dK_db = (2.0 * D * E + w * dE_db) / (2.0 * dt);
    s.dK_dq = q * E / dt;
    s.J = s.dK_dq;
    const double ea = std::exp(-alpha * a);
    const double g = expm1_ratio(-alpha * D), gd = expm1_ratio_d(-alpha * D);
    s.P = dt * ea * g;
    s.dP_da = dt * ea * (-alpha * g + alpha * gd);
    s.dP_db = -dt * alpha * ea * gd;
    return s;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * pi); }

struct Polar {
    std::vector<double> u, theta;  // theta continuous
};

Polar to_polar(const OpenArc& arc) {
    Polar p;
    for (std::size_t i = 0; i < arc.size(); ++i) {
        const Vec2 x = arc.points[i];
        if (x == Vec2(0.0, 0.0)) throw NumericError("log-spiral integrals: arc passes through the center");
        p.u.push_back(std::log(std::abs(x)));
        p.theta.push_back(i == 0 ? std::arg(x) : p.theta.back() + wrap_angle(std::arg(x / arc.points[i - 1])));
    }
    return p;
}

// Totals and per-node gradients of K and U (U = m1/alpha * sum P) for a chain.
struct ChainEval {
    double K = 0.0, U = 0.0;
    std::vector<double> dK_du, dK_dth, dU_du, J;
};

ChainEval eval_chain(const std::vector<double>& times, const std::vector<double>& u,
                     const std::vector<double>& theta, double m1, double alpha) {
    const std::size_t n = u.size();
    ChainEval c;
    c.dK_du.assign(n, 0.0);
    c.dK_dth.assign(n, 0.0);
    c.dU_du.assign(n, 0.0);
    c.J.resize(n - 1);
    const double km = m1 / alpha;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Segment s = segment(u[i], u[i + 1], theta[i + 1] - theta[i], times[i + 1] - times[i], alpha);
        c.K += s.K;
        c.U += km * s.P;
        c.dK_du[i] += s.dK_da;
        c.dK_du[i + 1] += s.dK_db;
        c.dK_dth[i] -= s.dK_dq;
        c.dK_dth[i + 1] += s.dK_dq;
        c.dU_du[i] += km * s.dP_da;
        c.dU_du[i + 1] += km * s.dP_db;
        c.J[i] = s.J;
    }
    return c;
}

// Radius constraint through a slack variable: u = lo + v^2, or
// u = lo + (hi - lo) sin^2 v with an upper bound, or u = v without bounds.
struct RadiusMap {
    enum Kind { Free, Lower, Box } kind = Free;
    double lo = 0.0, hi = 0.0;

    double u(double v) const {
        switch (kind) {
            case Lower: return lo + v * v;
            case Box: return lo + (hi - lo) * std::sin(v) * std::sin(v);
            default: return v;
        }
    }
    double du(double v) const {
        switch (kind) {
            case Lower: return 2.0 * v;
            case Box: return (hi - lo) * std::sin(2.0 * v);
            default: return 1.0;
        }
    }
    double inverse(double uu) const {
        switch (kind) {
            case Lower: return std::sqrt(std::max(uu - lo, 0.0));
            case Box: return std::asin(std::sqrt(std::clamp((uu - lo) / (hi - lo), 0.0, 1.0)));
            default: return uu;
        }
    }
};

enum class Objective { Action, Maupertuis };

// Interior nodes 1..n-1 are free; parameters are (v_k, theta_k) pairs.
class ChainProblem final : public ceres::FirstOrderFunction {
public:
    ChainProblem(std::vector<double> times, double u0, double th0, double un, double thn, double m1, double alpha,
                 RadiusMap map, Objective obj)
        : times_(std::move(times)), u0_(u0), th0_(th0), un_(un), thn_(thn), m1_(m1), alpha_(alpha), map_(map),
          obj_(obj) {}

    int NumParameters() const override { return 2 * static_cast<int>(times_.size() - 2); }

    void unpack(const double* p, std::vector<double>& u, std::vector<double>& th) const {
        const std::size_t n = times_.size();
        u.resize(n);
        th.resize(n);
        u[0] = u0_;
        th[0] = th0_;
        u[n - 1] = un_;
        th[n - 1] = thn_;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            u[k] = map_.u(p[2 * (k - 1)]);
            th[k] = p[2 * (k - 1) + 1];
        }
    }

    // K, U and their gradients in the solver's variables.
    struct Terms {
        double K = 0.0, U = 0.0;
        std::vector<double> gK, gU;
    };

    bool terms(const double* p, Terms& t) const {
        std::vector<double> u, th;
        unpack(p, u, th);
        const ChainEval c = eval_chain(times_, u, th, m1_, alpha_);
        if (!std::isfinite(c.K) || !std::isfinite(c.U)) return false;
        const std::size_t m = static_cast<std::size_t>(NumParameters());
        t.K = c.K;
        t.U = c.U;
        t.gK.assign(m, 0.0);
        t.gU.assign(m, 0.0);
        for (std::size_t k = 1; k + 1 < times_.size(); ++k) {
            const double du = map_.du(p[2 * (k - 1)]);
            t.gK[2 * (k - 1)] = c.dK_du[k] * du;
            t.gU[2 * (k - 1)] = c.dU_du[k] * du;
            t.gK[2 * (k - 1) + 1] = c.dK_dth[k];
        }
        return true;
    }

    // Objective weights: cost = K + U, or K U with gradient U dK + K dU.
    std::pair<double, double> weights(const Terms& t) const {
        return obj_ == Objective::Action ? std::make_pair(1.0, 1.0) : std::make_pair(t.U, t.K);
    }
    double cost(const Terms& t) const { return obj_ == Objective::Action ? t.K + t.U : t.K * t.U; }
    bool product() const { return obj_ == Objective::Maupertuis; }
    RadiusMap radius_map() const { return map_; }
    ChainProblem unbounded() const {
        return ChainProblem(times_, u0_, th0_, un_, thn_, m1_, alpha_, RadiusMap{}, obj_);
    }

    bool Evaluate(const double* p, double* cost_out, double* grad) const override {
        Terms t;
        if (!terms(p, t)) return false;
        *cost_out = cost(t);
        if (grad) {
            const auto [wK, wU] = weights(t);
            for (std::size_t j = 0; j < t.gK.size(); ++j) grad[j] = wK * t.gK[j] + wU * t.gU[j];
        }
        return true;
    }

private:
    std::vector<double> times_;
    double u0_, th0_, un_, thn_, m1_, alpha_;
    RadiusMap map_;
    Objective obj_;
};

struct ChainSolution {
    std::vector<double> u, theta;
    SolverReport report;
};

std::vector<double> combined_gradient(const ChainProblem& prob, const ChainProblem::Terms& t) {
    const auto [wK, wU] = prob.weights(t);
    std::vector<double> g(t.gK.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = wK * t.gK[j] + wU * t.gU[j];
    return g;
}

// Projected Newton iterations from a point near the minimum, in (u, theta)
// variables with lo <= u <= hi. Node k only couples to k - 1 and k + 1, so
// the Hessians of K and U are banded and three colors of simultaneous central
// differences recover them; the product objective adds the rank-two term
// gK gU^T + gU gK^T, handled with the Woodbury identity. A u at a bound with
// the gradient pushing outward is held fixed; one pushed back is freed.
void newton_polish(const ChainProblem& prob, std::vector<double>& p, double lo, double hi, int max_iter = 60) {
    using SpMat = Eigen::SparseMatrix<double>;
    const std::size_t m = p.size(), nodes = m / 2;
    auto clamp = [&](std::vector<double>& q) {
        for (std::size_t k = 0; k < nodes; ++k) q[2 * k] = std::clamp(q[2 * k], lo, hi);
    };
    clamp(p);
    ChainProblem::Terms t;
    if (!prob.terms(p.data(), t)) return;
    std::vector<double> g = combined_gradient(prob, t);
    double cost = prob.cost(t);
    const double h = 1e-6;
    const double eps = 1e-12 * std::max(1.0, std::abs(lo));

    // Distance moved by a unit projected-gradient step, zero at a constrained
    // critical point.
    auto projected_norm = [&](const std::vector<double>& q, const std::vector<double>& gq) {
        double r = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double moved = j % 2 == 0 ? std::clamp(q[j] - gq[j], lo, hi) - q[j] : -gq[j];
            r = std::max(r, std::abs(moved));
        }
        return r;
    };
    // Bounds within eps_k of u and pushed against count as active (Bertsekas),
    // so the free-variable Newton step stays a descent direction after projection.
    auto active = [&](const std::vector<double>& q, const std::vector<double>& gq, double pg) {
        const double eps_k = std::max(eps, std::min(1e-3, pg));
        std::vector<char> act(m, 0);
        for (std::size_t k = 0; k < nodes; ++k) {
            const std::size_t j = 2 * k;
            act[j] = (q[j] <= lo + eps_k && gq[j] > 0.0) || (q[j] >= hi - eps_k && gq[j] < 0.0);
        }
        return act;
    };

    for (int it = 0; it < max_iter; ++it) {
        const double pg = projected_norm(p, g);
        const auto act = active(p, g, pg);
        std::vector<Eigen::Triplet<double>> trip;
        const auto [wK, wU] = prob.weights(t);
        for (std::size_t color = 0; color < 3; ++color)
            for (std::size_t c = 0; c < 2; ++c) {
                std::vector<double> pp = p, pm = p;
                for (std::size_t k = color; k < nodes; k += 3) pp[2 * k + c] += h, pm[2 * k + c] -= h;
                ChainProblem::Terms tp, tm;
                if (!prob.terms(pp.data(), tp) || !prob.terms(pm.data(), tm)) return;
                for (std::size_t k = color; k < nodes; k += 3)
                    for (std::size_t kk = k == 0 ? 0 : k - 1; kk <= std::min(k + 1, nodes - 1); ++kk)
                        for (std::size_t cc = 0; cc < 2; ++cc) {
                            const std::size_t i = 2 * kk + cc, j = 2 * k + c;
                            if (act[i] || act[j]) continue;
                            const double hk = (tp.gK[i] - tm.gK[i]) / (2 * h), hu = (tp.gU[i] - tm.gU[i]) / (2 * h);
                            const double v = 0.5 * (wK * hk + wU * hu);
                            trip.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
                            trip.emplace_back(static_cast<int>(j), static_cast<int>(i), v);
                        }
            }
        double diag = 0.0;
        for (const auto& e : trip)
            if (e.row() == e.col()) diag = std::max(diag, std::abs(e.value()));
        for (std::size_t j = 0; j < m; ++j)
            if (act[j]) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);

        Eigen::VectorXd G(static_cast<int>(m));
        Eigen::MatrixXd W(static_cast<int>(m), 2);
        for (std::size_t j = 0; j < m; ++j) {
            const int jj = static_cast<int>(j);
            G[jj] = g[j];  // active rows are identity: a projected gradient step
            W(jj, 0) = act[j] ? 0.0 : t.gK[j];
            W(jj, 1) = act[j] ? 0.0 : t.gU[j];
        }

        bool accepted = false;
        // Levenberg shifts make the step a descent direction when the reduced
        // Hessian is not positive definite.
        for (double shift : {0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2}) {
            SpMat A(static_cast<int>(m), static_cast<int>(m));
            auto tr = trip;
            if (shift > 0.0)
                for (std::size_t j = 0; j < m; ++j) tr.emplace_back(static_cast<int>(j), static_cast<int>(j), shift * diag);
            A.setFromTriplets(tr.begin(), tr.end());
            Eigen::SimplicialLDLT<SpMat> ldlt(A);
            if (ldlt.info() != Eigen::Success) continue;
            Eigen::VectorXd d = ldlt.solve(-G);
            if (prob.product()) {
                const Eigen::MatrixXd Z = ldlt.solve(W);
                Eigen::Matrix2d S;
                S << 0.0, 1.0, 1.0, 0.0;
                S += W.transpose() * Z;
                d -= Z * S.fullPivLu().solve(W.transpose() * d);
            }
            if (!d.allFinite() || !(G.dot(d) < 0.0)) continue;
            for (double step = 1.0; step > 1e-6 && !accepted; step *= 0.5) {
                std::vector<double> q = p;
                for (std::size_t j = 0; j < m; ++j) q[j] += step * d[static_cast<int>(j)];
                clamp(q);
                ChainProblem::Terms tq;
                if (!prob.terms(q.data(), tq)) continue;
                const double cq = prob.cost(tq);
                double lin = 0.0;
                for (std::size_t j = 0; j < m; ++j) lin += g[j] * (q[j] - p[j]);
                const std::vector<double> gq = combined_gradient(prob, tq);
                const bool armijo = cq <= cost + 1e-4 * lin;
                const bool roundoff = cq <= cost + 1e-13 * std::abs(cost) && projected_norm(q, gq) < pg;
                if (armijo || roundoff) {
                    p = std::move(q);
                    t = std::move(tq);
                    g = gq;
                    cost = cq;
                    accepted = true;
                }
            }
            if (accepted) break;
        }
        if (!accepted || projected_norm(p, g) == 0.0) return;
    }
}

struct Bounds {
    double lo, hi;
};

Bounds bounds_of(const RadiusMap& map) {
    return {map.kind == RadiusMap::Free ? -std::numeric_limits<double>::infinity() : map.lo,
            map.kind == RadiusMap::Box ? map.hi : std::numeric_limits<double>::infinity()};
}

// Projected Newton from p (plain u, theta), then the report.
ChainSolution polish_and_report(const ChainProblem& problem, std::vector<double> p, int iterations) {
    const ChainProblem plain = problem.unbounded();
    const auto [lo, hi] = bounds_of(problem.radius_map());
    newton_polish(plain, p, lo, hi, 200);

    ChainSolution sol;
    plain.unpack(p.data(), sol.u, sol.theta);
    ChainProblem::Terms t;
    plain.terms(p.data(), t);
    const std::vector<double> g = combined_gradient(plain, t);
    double gmax = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double moved = j % 2 == 0 ? std::clamp(p[j] - g[j], lo, hi) - p[j] : -g[j];
        gmax = std::max(gmax, std::abs(moved));
    }
    sol.report.iterations = iterations;
    sol.report.gradient_norm = gmax;
    sol.report.converged = gmax < 1e-10 * std::abs(plain.cost(t));
    return sol;
}

// LBFGS in the solver variables (radius bounds built into the map), then the
// projected Newton polish. The seed is in plain (u, theta).
ChainSolution solve_chain(const ChainProblem& problem, std::vector<double> params) {
    const RadiusMap map = problem.radius_map();
    for (std::size_t j = 0; j < params.size(); j += 2) params[j] = map.inverse(params[j]);
    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.max_lbfgs_rank = 30;
    opts.max_num_iterations = 200000;
    opts.function_tolerance = 1e-12;
    opts.parameter_tolerance = 1e-14;
    opts.gradient_tolerance = 1e-12;
    opts.logging_type = ceres::SILENT;
    // GradientProblem takes ownership; hand it a copy.
    ceres::GradientProblem gp(new ChainProblem(problem));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, gp, params.data(), &summary);
    for (std::size_t j = 0; j < params.size(); j += 2) params[j] = map.u(params[j]);
    return polish_and_report(problem, std::move(params), static_cast<int>(summary.iterations.size()));
}

constexpr std::size_t coarsest_mesh = 128;

// Mesh continuation: above coarsest_mesh segments (and for even n) the
// solution on n / 2 segments, interpolated, seeds a Newton-only solve. LBFGS
// from a crude seed stalls well short of the minimum on fine meshes.
ChainSolution solve_levels(const std::function<ChainProblem(std::size_t)>& make, std::size_t n,
                           const std::function<std::vector<double>(std::size_t)>& seed) {
    const ChainProblem problem = make(n);
    if (n <= coarsest_mesh || n % 2 != 0) return solve_chain(problem, seed(n));
    const ChainSolution coarse = solve_levels(make, n / 2, seed);
    std::vector<double> p(2 * (n - 1));
    for (std::size_t k = 1; k < n; ++k) {
        const std::size_t c = k / 2;
        const bool even = k % 2 == 0;
        p[2 * (k - 1)] = even ? coarse.u[c] : 0.5 * (coarse.u[c] + coarse.u[c + 1]);
        p[2 * (k - 1) + 1] = even ? coarse.theta[c] : 0.5 * (coarse.theta[c] + coarse.theta[c + 1]);
    }
    ChainSolution sol = polish_and_report(problem, p, coarse.report.iterations);
    if (!sol.report.converged) {
        ChainSolution retry = solve_chain(problem, std::move(p));
        if (retry.report.gradient_norm < sol.report.gradient_norm) sol = std::move(retry);
    }
    return sol;
}

std::vector<double> uniform_times(double T, std::size_t n) {
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = -T + 2.0 * T * static_cast<double>(k) / static_cast<double>(n);
    t[n] = T;
    return t;
}

OpenArc polar_arc(const std::vector<double>& times, const std::vector<double>& u, const std::vector<double>& th) {
    std::vector<Vec2> p(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) p[k] = std::polar(std::exp(u[k]), th[k]);
    OpenArc arc(times, std::move(p));
    arc.velocities = spiral_velocities(arc);
    return arc;
}

}  // namespace

ArcIntegrals arc_integrals(const OpenArc& arc, double m1, double alpha) {
    arc.validate();
    if (arc.size() < 2) throw std::invalid_argument("arc_integrals: need at least two samples");
    const Polar p = to_polar(arc);
    const ChainEval c = eval_chain(arc.times, p.u, p.theta, m1, alpha);
    return {c.K, c.U};
}

std::vector<Vec2> spiral_velocities(const OpenArc& arc) {
    const Polar p = to_polar(arc);
    const std::size_t n = arc.size();
    std::vector<Vec2> v(n, Vec2(0.0, 0.0));
    std::vector<int> count(n, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec2 rate(p.u[i + 1] - p.u[i], p.theta[i + 1] - p.theta[i]);
        const double dt = arc.times[i + 1] - arc.times[i];
        v[i] += arc.points[i] * rate / dt;
        v[i + 1] += arc.points[i + 1] * rate / dt;
        ++count[i];
        ++count[i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= static_cast<double>(count[i]);
    return v;
}

std::vector<double> midpoint_energies(const OpenArc& x, double h, double m1, double alpha) {
    x.validate();
    if (x.size() < 2) throw std::invalid_argument("midpoint_energies: need at least two samples");
    const Polar pol = to_polar(x);
    std::vector<double> e(x.size() - 1);
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        const double dt = x.times[k + 1] - x.times[k];
        const double D = pol.u[k + 1] - pol.u[k], q = pol.theta[k + 1] - pol.theta[k];
        const double um = 0.5 * (pol.u[k] + pol.u[k + 1]);
        const double speed2 = std::exp(2.0 * um) * (D * D + q * q) / (dt * dt);
        e[k] = 0.5 * speed2 - m1 / (alpha * std::exp(alpha * um)) - h;
    }
    return e;
}

OpenArc lambda_rescale(const OpenArc& arc, double lambda, Vec2 center, double alpha) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda_rescale: lambda must be positive");
    const double b = 2.0 / (2.0 + alpha);
    const double sx = std::pow(lambda, -b), sv = std::pow(lambda, 1.0 - b);
    OpenArc out;
    for (std::size_t i = 0; i < arc.size(); ++i) {
        out.times.push_back(arc.times[i] / lambda);
        out.points.push_back(center + sx * (arc.points[i] - center));
        if (arc.has_velocities()) out.velocities.push_back(sv * arc.velocities[i]);
    }
    return out;
}

CenterSystem blown_up_system(const CenterSystem& sys, double lambda, std::size_t k) {
    if (!(lambda > 0.0)) throw std::invalid_argument("blown_up_system: lambda must be positive");
    if (k >= sys.size()) throw std::out_of_range("blown_up_system: no such center");
    const double s = std::pow(lambda, -2.0 / (2.0 + sys.alpha()));
    std::vector<Vec2> c = sys.positions();
    for (Vec2& p : c) p = sys.position(k) + s * (p - sys.position(k));
    return CenterSystem(sys.masses(), std::move(c), sys.alpha());
}

RescalingReport measure_rescaling(const OpenArc& arc, const CenterSystem& sys, std::size_t k,
                                  const std::vector<double>& lambdas, double tol) {
    if (lambdas.size() < 2) throw std::invalid_argument("measure_rescaling: need at least two lambdas");
    RescalingReport rep{};
    const double a = sys.alpha();
    const double base = arc_action(arc, sys);
    std::vector<double> X, Y;
    for (double l : lambdas) {
        const double r = arc_action(lambda_rescale(arc, l, sys.position(k), a), blown_up_system(sys, l, k)) / base;
        rep.lambdas.push_back(l);
        rep.ratios.push_back(r);
        X.push_back(std::log(l));
        Y.push_back(std::log(r));
    }
    const double n = static_cast<double>(X.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < X.size(); ++i) mx += X[i] / n, my += Y[i] / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("measure_rescaling: lambdas must not all be equal");
    rep.fitted_exponent = sxy / sxx;
    double ss_res = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double e = Y[i] - (my + rep.fitted_exponent * (X[i] - mx));
        ss_res += e * e;
    }
    rep.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    rep.derived_exponent = -(2.0 - a) / (2.0 + a);
    rep.stated_exponent = -2.0 / (2.0 + a);
    rep.matches_derived = std::abs(rep.fitted_exponent - rep.derived_exponent) < tol;
    rep.matches_stated = std::abs(rep.fitted_exponent - rep.stated_exponent) < tol;
    return rep;
}

OpenArc collision_ejection_arc(const CenterSystem& sys, std::size_t k, double theta_minus, double theta_plus,
                               double T, std::size_t n, double r0) {
    if (k >= sys.size()) throw std::out_of_range("collision_ejection_arc: no such center");
    if (n < 2 || !(T > 0.0) || !(r0 > 0.0)) throw std::invalid_argument("collision_ejection_arc: bad sampling");
    const ParabolicEjection pe(sys.mass(k), sys.alpha(), 0.0, 0.0);
    const double t0 = std::pow(r0, 1.0 / pe.beta()) / pe.mu();
    if (!(t0 < T)) throw std::invalid_argument("collision_ejection_arc: r0 too large for T");
    std::vector<double> ts(n);
    for (std::size_t i = 0; i < n; ++i)
        ts[i] = t0 * std::pow(T / t0, static_cast<double>(i) / static_cast<double>(n - 1));
    ts.back() = T;

    IntegratorOptions io;
    io.abs_tol = 1e-13 * r0;
    io.rel_tol = 1e-13;
    // Integrate relative to c_k: the relative tolerance then scales with the
    // distance to the center rather than with |c_k|.
    const Vec2 c = sys.position(k);
    std::vector<Vec2> shifted = sys.positions();
    for (Vec2& p : shifted) p -= c;
    const CenterSystem local(sys.masses(), shifted, sys.alpha());
    auto branch = [&](double theta) {
        const Vec2 x0 = std::polar(r0, theta);
        const Vec2 v0 = std::polar(std::sqrt(2.0 * potential(x0, local)), theta);
        OpenArc a = integrate_orbit(local, x0, v0, ts, io);
        for (Vec2& p : a.points) p += c;
        return a;
    };
    const OpenArc out = branch(theta_plus), in = branch(theta_minus);
    OpenArc arc;
    for (std::size_t i = n; i-- > 0;) {
        arc.times.push_back(-in.times[i]);
        arc.points.push_back(in.points[i]);
        arc.velocities.push_back(-in.velocities[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        arc.times.push_back(out.times[i]);
        arc.points.push_back(out.points[i]);
        arc.velocities.push_back(out.velocities[i]);
    }
    return arc;
}

std::pair<double, double> infer_collision_angles(const OpenArc& y, Vec2 center) {
    std::size_t plus = y.size();
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y.times[i] > 0.0) {
            plus = i;
            break;
        }
    if (plus == 0 || plus == y.size()) throw NumericError("no collision detected: samples do not straddle t = 0");
    std::size_t minus = plus - 1;
    if (y.times[minus] == 0.0) {
        if (minus == 0) throw NumericError("no collision detected: no samples before t = 0");
        --minus;
    }
    double far = 0.0;
    for (const Vec2& p : y.points) far = std::max(far, std::abs(p - center));
    const double dm = std::abs(y.points[minus] - center), dp = std::abs(y.points[plus] - center);
    if (!(dm < 1e-3 * far && dp < 1e-3 * far)) throw NumericError("no collision detected near t = 0");
    return {std::arg(y.points[minus] - center), std::arg(y.points[plus] - center)};
}

std::vector<BlowupRow> blowup_convergence(const OpenArc& y, Vec2 center, const ParabolicEjection& pe,
                                          const std::vector<double>& lambdas, double T) {
    if (!y.has_velocities()) throw std::invalid_argument("blowup_convergence: arc needs velocities");
    infer_collision_angles(y, center);  // validates the collision
    const double b = pe.beta();
    std::vector<BlowupRow> rows;
    for (double l : lambdas) {
        if (!(l > 0.0)) throw std::invalid_argument("blowup_convergence: lambda must be positive");
        BlowupRow row{l, 0.0, 0.0};
        const double sx = std::pow(l, -b), sv = std::pow(l, 1.0 - b);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double t = y.times[i] / l;
            if (std::abs(t) > T || t == 0.0) continue;
            row.sup_distance = std::max(row.sup_distance, std::abs(sx * (y.points[i] - center) - parabolic_point(pe, t)));
            if (std::abs(t) >= 0.25 * T)
                row.velocity_sup_distance =
                    std::max(row.velocity_sup_distance, std::abs(sv * y.velocities[i] - parabolic_velocity(pe, t)));
        }
        rows.push_back(row);
    }
    return rows;
}

MaupertuisRecord maupertuis(const OpenArc& arc, double h, double m1, double alpha) {
    const ArcIntegrals I = arc_integrals(arc, m1, alpha);
    MaupertuisRecord rec{};
    rec.h = h;
    rec.kinetic = I.kinetic;
    rec.potential = I.potential + h * (arc.times.back() - arc.times.front());
    if (!(rec.potential > 0.0)) throw NumericError("maupertuis: potential integral is not positive, omega undefined");
    if (!(rec.kinetic > 0.0)) throw NumericError("maupertuis: arc does not move");
    rec.value = rec.kinetic * rec.potential;
    rec.omega = std::sqrt(rec.potential / rec.kinetic);
    return rec;
}

double maupertuis_criticality(const OpenArc& arc, double h, double m1, double alpha, double obstacle) {
    const Polar p = to_polar(arc);
    const ChainEval c = eval_chain(arc.times, p.u, p.theta, m1, alpha);
    const double U = c.U + h * (arc.times.back() - arc.times.front());
    const double M = c.K * U;
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < arc.size(); ++k) {
        const bool on_contact = obstacle > 0.0 && std::abs(arc.points[k]) <= obstacle * (1.0 + 1e-8);
        const double gu = on_contact ? 0.0 : U * c.dK_du[k] + c.K * c.dU_du[k];
        const double gt = U * c.dK_dth[k];
        worst = std::max(worst, std::hypot(gu, gt));
    }
    // Per-node gradient relative to the functional's share per segment.
    return worst * static_cast<double>(arc.size() - 1) / M;
}

OpenArc maupertuis_to_solution(const OpenArc& arc, const MaupertuisRecord& rec, double m1, double alpha, double tol,
                               double obstacle) {
    const double res = maupertuis_criticality(arc, rec.h, m1, alpha, obstacle);
    if (!(res <= tol)) {
        std::ostringstream os;
        os << "maupertuis_to_solution: arc is not critical (residual " << res << " > " << tol << ")";
        throw NumericError(os.str());
    }
    const std::vector<Vec2> v = arc.has_velocities() ? arc.velocities : spiral_velocities(arc);
    OpenArc out;
    for (std::size_t i = 0; i < arc.size(); ++i) {
        out.times.push_back(arc.times[i] / rec.omega);
        out.points.push_back(arc.points[i]);
        out.velocities.push_back(rec.omega * v[i]);
    }
    return out;
}

ObstacleResult obstacle_minimize(const ObstacleSpec& spec, const ParabolicEjection& pe, std::size_t n) {
    if (n < 4) throw std::invalid_argument("obstacle_minimize: need at least 4 segments");
    if (!(spec.T > 0.0)) throw std::invalid_argument("obstacle_minimize: T must be positive");
    if (!(spec.rho >= 0.0)) throw std::invalid_argument("obstacle_minimize: rho must be non-negative");
    const double dphi = pe.phi_plus - pe.phi_minus;
    if (dphi == 0.0) throw std::invalid_argument("obstacle_minimize: endpoint arguments must differ");
    const double r_star = std::pow(pe.mu() * spec.T, pe.beta());
    if (spec.rho > r_star) throw std::invalid_argument("obstacle_minimize: obstacle radius exceeds the endpoint radius");
    if (spec.rho_bar && !(*spec.rho_bar > spec.rho && *spec.rho_bar >= r_star))
        throw std::invalid_argument("obstacle_minimize: rho_bar must exceed rho and reach the endpoints");

    RadiusMap map;
    if (spec.rho > 0.0) {
        map.lo = std::log(spec.rho);
        map.kind = RadiusMap::Lower;
        if (spec.rho_bar) {
            map.kind = RadiusMap::Box;
            map.hi = std::log(*spec.rho_bar);
        }
    }
    const std::vector<double> times = uniform_times(spec.T, n);
    const double ue = std::log(r_star);
    const auto make = [&](std::size_t segs) {
        return ChainProblem(uniform_times(spec.T, segs), ue, pe.phi_minus, ue, pe.phi_plus, pe.m1, pe.alpha, map,
                            Objective::Maupertuis);
    };
    // Seed: a dip from the endpoint radius halfway (in log) toward the obstacle.
    const double depth = spec.rho > 0.0 ? 0.5 * (ue - map.lo) : 0.5;
    const auto seed = [&](std::size_t segs) {
        std::vector<double> params(2 * (segs - 1));
        for (std::size_t k = 1; k < segs; ++k) {
            const double s = static_cast<double>(k) / static_cast<double>(segs);
            params[2 * (k - 1)] = ue - depth * std::sin(pi * s);
            params[2 * (k - 1) + 1] = pe.phi_minus + dphi * s;
        }
        return params;
    };
    const ChainSolution sol = solve_levels(make, n, seed);

    ObstacleResult res{};
    res.arc = polar_arc(times, sol.u, sol.theta);
    res.record = maupertuis(res.arc, 0.0, pe.m1, pe.alpha);
    res.solver = sol.report;
    res.angular_momentum = eval_chain(times, sol.u, sol.theta, pe.m1, pe.alpha).J;
    res.contact_angular_momentum = std::sqrt(2.0 * pe.m1 / (res.record.omega * res.record.omega * pe.alpha)) *
                                   std::pow(spec.rho, (2.0 - pe.alpha) / 2.0);
    if (spec.rho > 0.0) {
        std::vector<std::size_t> on;
        for (std::size_t k = 0; k <= n; ++k)
            if (std::abs(res.arc.points[k]) <= spec.rho * (1.0 + 1e-8)) on.push_back(k);
        if (!on.empty()) {
            res.contact = std::make_pair(times[on.front()], times[on.back()]);
            res.single_contact_interval = on.back() - on.front() + 1 == on.size();
        }
    }
    return res;
}

FixedEndResult fixed_end_minimize(const ParabolicEjection& pe, double T, std::size_t n) {
    if (!(T > 0.0)) throw std::invalid_argument("fixed_end_minimize: T must be positive");
    if (n < 4) throw std::invalid_argument("fixed_end_minimize: need at least 4 segments");
    const std::vector<double> times = uniform_times(T, n);
    const double ue = std::log(std::pow(pe.mu() * T, pe.beta()));
    const double dphi = pe.phi_plus - pe.phi_minus;
    const auto make = [&](std::size_t segs) {
        return ChainProblem(uniform_times(T, segs), ue, pe.phi_minus, ue, pe.phi_plus, pe.m1, pe.alpha, RadiusMap{},
                            Objective::Action);
    };

    FixedEndResult res{};
    res.ejection_action = ejection_action(pe, T);
    res.action = std::numeric_limits<double>::infinity();
    for (double factor : {0.5, 0.1, 1.0}) {
        const auto seed = [&](std::size_t segs) {
            std::vector<double> params(2 * (segs - 1));
            for (std::size_t k = 1; k < segs; ++k) {
                const double s = static_cast<double>(k) / static_cast<double>(segs);
                params[2 * (k - 1)] = ue + std::log(factor) * std::sin(pi * s);
                params[2 * (k - 1) + 1] = pe.phi_minus + dphi * s;
            }
            return params;
        };
        const ChainSolution sol = solve_levels(make, n, seed);
        const ChainEval c = eval_chain(times, sol.u, sol.theta, pe.m1, pe.alpha);
        const double A = c.K + c.U;
        res.runs.push_back({factor, A, sol.report});
        if (A < res.action) {
            res.action = A;
            res.arc = polar_arc(times, sol.u, sol.theta);
            res.solver = sol.report;
            res.min_radius = std::exp(*std::min_element(sol.u.begin(), sol.u.end()));
        }
    }
    res.margin = res.ejection_action - res.action;
    return res;
}

namespace {
void check_sweep_args(double rho, double r_star, double alpha) {
    if (!(rho > 0.0 && rho <= r_star)) throw std::invalid_argument("angular sweep: need 0 < rho <= r_star");
    if (!(alpha >= 1.0 && alpha < 2.0)) throw std::invalid_argument("angular sweep: alpha must lie in [1, 2)");
}
}  // namespace

double angular_sweep(double rho, double r_star, double alpha) {
    check_sweep_args(rho, r_star, alpha);
    return 2.0 / (2.0 - alpha) * (0.5 * pi - std::asin(std::pow(rho / r_star, (2.0 - alpha) / 2.0)));
}

double angular_sweep_unscaled_ratio(double rho, double r_star, double alpha) {
    check_sweep_args(rho, r_star, alpha);
    return 2.0 / (2.0 - alpha) * (0.5 * pi - std::asin(rho / r_star));
}

double grazing_arc_sweep_numeric(double rho, double r_star, double alpha, double m1, double omega) {
    check_sweep_args(rho, r_star, alpha);
    if (rho == r_star) return 0.0;
    const double c = 2.0 * m1 / (omega * omega * alpha);
    const double J = std::sqrt(c) * std::pow(rho, (2.0 - alpha) / 2.0);
    const double L = std::log(r_star / rho);
    // r = rho exp(v^2) removes the inverse square root at the turning point
    // and spreads the radii evenly in log when rho << r_star; the radicand
    // c r^-alpha - J^2 r^-2 is factored to avoid cancellation there.
    auto integrand = [&](double v) {
        v = std::max(v, 1e-150);
        const double r = rho * std::exp(v * v);
        const double rad = -c * std::pow(r, -alpha) * std::expm1(-(2.0 - alpha) * v * v);
        return J / (r * std::sqrt(rad)) * 2.0 * v;
    };
    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, std::sqrt(L), 25, 1e-14, &err);
    if (!std::isfinite(val) || err > 1e-9 * std::max(1.0, std::abs(val)))
        throw NumericError("grazing_arc_sweep_numeric: quadrature did not converge");
    return val;
}

std::vector<SweepRow> sweep_table(const std::vector<double>& alphas, const std::vector<double>& ratios, double m1) {
    std::vector<SweepRow> rows;
    for (double a : alphas)
        for (double q : ratios) {
            if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("sweep_table: ratios must lie in (0, 1]");
            SweepRow r{a, q, angular_sweep(q, 1.0, a), grazing_arc_sweep_numeric(q, 1.0, a, m1), 0.0};
            r.abs_err = std::abs(r.sweep_closed - r.sweep_numeric);
            rows.push_back(r);
        }
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "alpha,rho_over_rstar,sweep_closed,sweep_numeric,abs_err\n";
    os << std::setprecision(17);
    for (const auto& r : rows)
        os << r.alpha << ',' << r.rho_over_rstar << ',' << r.sweep_closed << ',' << r.sweep_numeric << ',' << r.abs_err
           << '\n';
}

}  // namespace ncenter::kepler
