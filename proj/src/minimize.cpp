#include "ncenter/minimize.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>

namespace ncenter {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double max_norm(const std::vector<Vec2>& g) {
    double m = 0.0;
    for (const Vec2& v : g) m = std::max(m, std::abs(v));
    return m;
}

double loop_diameter(const PeriodicLoop& loop) {
    double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
    for (const Vec2& p : loop.nodes) {
        x0 = std::min(x0, p.real());
        x1 = std::max(x1, p.real());
        y0 = std::min(y0, p.imag());
        y1 = std::max(y1, p.imag());
    }
    return std::hypot(x1 - x0, y1 - y0);
}

PeriodicLoop double_nodes(const PeriodicLoop& loop) {
    std::vector<Vec2> nodes;
    nodes.reserve(2 * loop.size());
    for (std::size_t k = 0; k < loop.size(); ++k) {
        nodes.push_back(loop.nodes[k]);
        nodes.push_back(0.5 * (loop.nodes[k] + loop.node(static_cast<std::ptrdiff_t>(k) + 1)));
    }
    return PeriodicLoop(loop.period, std::move(nodes));
}

// Mean magnitude of the potential's second derivative along the loop; sets
// the shift of the kinetic preconditioner.
double mean_curvature(const PeriodicLoop& loop, const CenterSystem& sys) {
    double s = 0.0;
    for (const Vec2& p : loop.nodes)
        for (std::size_t j = 0; j < sys.size(); ++j)
            s += (sys.alpha() + 1.0) * sys.mass(j) / std::pow(std::abs(p - sys.position(j)), sys.alpha() + 2.0);
    return s / static_cast<double>(loop.size());
}

// Solves (1/dt)(L + sigma I) d = g with L the cyclic second-difference matrix.
std::vector<Vec2> precondition(const PeriodicLoop& loop, const CenterSystem& sys, const std::vector<Vec2>& g) {
    const auto n = static_cast<Eigen::Index>(loop.size());
    const double dt = loop.dt();
    const double sigma = dt * dt * mean_curvature(loop, sys);
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index i = 0; i < n; ++i) {
        trip.emplace_back(i, i, 2.0 + sigma);
        trip.emplace_back(i, (i + 1) % n, -1.0);
        trip.emplace_back((i + 1) % n, i, -1.0);
    }
    Eigen::SparseMatrix<double> M(n, n);
    M.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(M);
    if (solver.info() != Eigen::Success) throw NumericError("preconditioner factorization failed");
    Eigen::MatrixXd rhs(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        rhs(i, 0) = dt * g[static_cast<std::size_t>(i)].real();
        rhs(i, 1) = dt * g[static_cast<std::size_t>(i)].imag();
    }
    const Eigen::MatrixXd x = solver.solve(rhs);
    std::vector<Vec2> d(loop.size());
    for (Eigen::Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = Vec2(x(i, 0), x(i, 1));
    return d;
}

// True when some segment passes over a center while its endpoints move
// linearly from `from` to `to`.
bool sweeps_center(const PeriodicLoop& from, const PeriodicLoop& to, const CenterSystem& sys) {
    const std::size_t n = from.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        const Vec2 a = from.nodes[k], b = from.node(i + 1);
        const Vec2 da = to.nodes[k] - a, db = to.node(i + 1) - b;
        for (const Vec2& c : sys.positions()) {
            const Vec2 A = a - c, B = b - c;
            // cross(A + t dA, B + t dB) = q0 + q1 t + q2 t^2 vanishes when c is on the segment's line.
            const double q0 = cross(A, B), q1 = cross(A, db) + cross(da, B), q2 = cross(da, db);
            std::vector<double> roots;
            if (std::abs(q2) > 1e-300) {
                const double disc = q1 * q1 - 4.0 * q2 * q0;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    const double r1 = (-q1 - std::copysign(sq, q1)) / (2.0 * q2);
                    roots.push_back(r1);
                    if (r1 != 0.0) roots.push_back(q0 / (q2 * r1));
                }
            } else if (std::abs(q1) > 1e-300) {
                roots.push_back(-q0 / q1);
            }
            for (double t : roots) {
                if (!(t >= 0.0 && t <= 1.0)) continue;
                if (dot(A + t * da, B + t * db) <= 0.0) return true;
            }
        }
    }
    return false;
}

double mean_potential(const PeriodicLoop& loop, const CenterSystem& sys) {
    double s = 0.0;
    for (const Vec2& p : loop.nodes) s += potential(p, sys);
    return s / static_cast<double>(loop.size());
}

// Symmetry residual of q about the (half-)node position `center2 / 2`.
double symmetry_residual(const PeriodicLoop& loop, std::ptrdiff_t center2) {
    const auto n = static_cast<std::ptrdiff_t>(loop.size());
    double r = 0.0;
    for (std::ptrdiff_t i = 0; i <= n / 2; ++i) {
        // Pairs (j, center2 - j).
        const std::ptrdiff_t j = (center2 + 1) / 2 + i;
        r = std::max(r, std::abs(loop.node(j) - loop.node(center2 - j)));
    }
    return r;
}

Vec2 point_at_half(const PeriodicLoop& loop, std::ptrdiff_t pos2) {
    if (pos2 % 2 == 0) return loop.node(pos2 / 2);
    const std::ptrdiff_t lo = (pos2 - 1) / 2;
    return 0.5 * (loop.node(lo) + loop.node(lo + 1));
}

std::size_t nearest_center(Vec2 p, const CenterSystem& sys, double* dist = nullptr) {
    std::size_t best = 0;
    double d = inf;
    for (std::size_t j = 0; j < sys.size(); ++j)
        if (std::abs(p - sys.position(j)) < d) {
            d = std::abs(p - sys.position(j));
            best = j;
        }
    if (dist) *dist = d;
    return best;
}

PeriodicLoop perturbed(const PeriodicLoop& seed, const CenterSystem& sys, const MinimizeOptions& opts,
                       std::mt19937_64& rng) {
    const auto word = topology::homotopy_word(seed, sys);
    const double amp = opts.perturbation * sys.length_scale();
    const double guard = 2.0 * opts.collision_radius * sys.length_scale();
    std::normal_distribution<double> G(0.0, 1.0);
    for (int attempt = 0; attempt < 20; ++attempt) {
        std::vector<std::pair<Vec2, Vec2>> modes;
        for (int k = 1; k <= 4; ++k) modes.emplace_back(amp * Vec2(G(rng), G(rng)) / double(k), amp * Vec2(G(rng), G(rng)) / double(k));
        PeriodicLoop out = seed;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(out.size());
            for (int k = 1; k <= 4; ++k)
                out.nodes[i] += modes[k - 1].first * std::cos(k * t) + modes[k - 1].second * std::sin(k * t);
        }
        try {
            if (loop_clearance(out, sys).distance > guard && topology::homotopy_word(out, sys) == word) return out;
        } catch (const Error&) {
        }
    }
    return seed;
}

}  // namespace

std::string to_string(Status s) {
    switch (s) {
        case Status::CollisionFreeSolution: return "CollisionFreeSolution";
        case Status::CollisionReflectionCandidate: return "CollisionReflectionCandidate";
        case Status::Boundary: return "Boundary(NearCollision)";
        case Status::MaxIterations: return "MaxIterations";
    }
    return "unknown";
}

PeriodicLoop seed_loop(const topology::HomotopyWord& w, const CenterSystem& sys, double T, std::size_t n) {
    if (w.empty()) throw TopologyError("trivial class: no seed loop");
    if (!(T > 0.0)) throw std::invalid_argument("seed_loop: period must be positive");
    if (sys.size() > 1) return topology::corridor_loop(w, sys, T, n);

    // Rank-one free group: the word is a power of the single letter.
    const int turns = static_cast<int>(w.size());
    const int sign = w.letters().front().sign;
    if (n == 0) n = 64 * static_cast<std::size_t>(turns);
    const double omega = 2.0 * std::numbers::pi * turns / T;
    const double radius = std::pow(sys.mass(0) / (omega * omega), 1.0 / (sys.alpha() + 2.0));
    std::vector<Vec2> nodes(n);
    for (std::size_t k = 0; k < n; ++k)
        nodes[k] = sys.position(0) + std::polar(radius, 0.5 * std::numbers::pi +
                                                            sign * omega * T * static_cast<double>(k) / static_cast<double>(n));
    return PeriodicLoop(T, std::move(nodes));
}

Classification classify_outcome(const PeriodicLoop& loop, const CenterSystem& sys, double tol,
                                const MinimizeOptions& opts) {
    const auto n = static_cast<std::ptrdiff_t>(loop.size());
    const double diam = loop_diameter(loop);
    const double threshold = opts.collision_radius * sys.length_scale();

    // Near-collision time: the node or half node closest to a center.
    std::ptrdiff_t t0 = 0;
    double best = inf;
    for (std::ptrdiff_t pos2 = 0; pos2 < 2 * n; ++pos2) {
        double d;
        nearest_center(point_at_half(loop, pos2), sys, &d);
        if (d < best) {
            best = d;
            t0 = pos2;
        }
    }
    // Symmetry may sit on the neighbouring half position of the closest sample.
    double sym = inf;
    std::ptrdiff_t s0 = t0;
    for (std::ptrdiff_t c = t0 - 1; c <= t0 + 1; ++c) {
        const double r = symmetry_residual(loop, c);
        if (r < sym) {
            sym = r;
            s0 = c;
        }
    }
    if (sym < tol * diam) {
        int p = 1;
        for (int q = static_cast<int>(n / 2); q >= 2; --q) {
            if (n % q != 0) continue;
            double r = 0.0;
            for (std::ptrdiff_t k = 0; k < n; ++k) r = std::max(r, std::abs(loop.node(k + n / q) - loop.node(k)));
            if (r < tol * diam) {
                p = q;
                break;
            }
        }
        const double Tbar = loop.period / (2.0 * p);
        const std::size_t k1 = nearest_center(point_at_half(loop, s0), sys);
        double d2;
        const std::size_t k2 = nearest_center(point_at_half(loop, s0 + n / p), sys, &d2);
        // The loop may run through k1 and k2 themselves; only the other
        // windings are needed and those stay well defined.
        ReflectionData data{k1, k2, Tbar, {}};
        bool winding_ok = true;
        for (std::size_t j = 0; j < sys.size(); ++j) {
            if (j == k1 || j == k2) continue;
            double gap = inf;
            for (std::ptrdiff_t k = 0; k < n; ++k)
                gap = std::min(gap, point_segment_distance(sys.position(j), loop.node(k), loop.node(k + 1)));
            if (!(gap > sys.collision_tolerance())) {
                winding_ok = false;
                break;
            }
            data.off_winding.push_back(topology::polygon_winding(loop.nodes, sys.position(j)));
            if (data.off_winding.back() != 0) winding_ok = false;
        }
        if (winding_ok && d2 < 0.25 * diam) return {Status::CollisionReflectionCandidate, std::move(data)};
    }

    double clear = 0.0, eom = inf;
    try {
        clear = loop_clearance(loop, sys).distance;
        eom = loop_eom_residual(loop, sys);
    } catch (const Error&) {
    }
    if (clear > threshold && eom < opts.eom_tol) return {Status::CollisionFreeSolution, std::nullopt};
    if (clear <= 2.0 * threshold) return {Status::Boundary, std::nullopt};
    return {Status::MaxIterations, std::nullopt};
}

MinimizeOutcome minimize_action(const PeriodicLoop& seed, const CenterSystem& sys, const MinimizeOptions& opts) {
    if (opts.max_iters <= 0) throw std::invalid_argument("max_iters must be positive");
    if (!(opts.collision_radius > 0.0 && opts.collision_radius < 0.5))
        throw std::invalid_argument("collision_radius must lie in (0, 0.5)");
    const double threshold = opts.collision_radius * sys.length_scale();
    const Clearance c0 = loop_clearance(seed, sys);
    if (c0.distance <= threshold)
        throw CollisionError(c0.segment, c0.center, "seed loop is within the collision radius of a center");
    const auto word = topology::homotopy_word(seed, sys);
    if (word.empty()) throw TopologyError("trivial class: the action has no nontrivial minimizer");

    MinimizeOutcome out;
    PeriodicLoop cur = seed;
    double A = action(cur, sys);
    if (!std::isfinite(A)) throw NumericError("seed action is not finite");
    std::vector<Vec2> g = action_gradient(cur, sys);
    double step = 1.0;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        const double gmax = max_norm(g);
        const double clear = loop_clearance(cur, sys).distance;
        if (opts.keep_log) out.log.push_back({it, A, gmax, clear});
        if (gmax < opts.grad_tol * A / cur.length()) break;
        if (clear < 2.0 * threshold && 2 * cur.size() <= opts.max_nodes) {
            cur = double_nodes(cur);
            A = action(cur, sys);
            g = action_gradient(cur, sys);
            continue;
        }
        const auto p = precondition(cur, sys, g);
        double slope = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) slope -= dot(g[k], p[k]);

        double s = std::min(1.0, 2.0 * step);
        bool accepted = false;
        PeriodicLoop trial = cur;
        double At = A;
        for (int b = 0; b < opts.max_backtracks; ++b, s *= opts.backtrack) {
            for (std::size_t k = 0; k < cur.size(); ++k) trial.nodes[k] = cur.nodes[k] - s * p[k];
            if (sweeps_center(cur, trial, sys) || loop_clearance(trial, sys).distance < threshold) continue;
            try {
                At = action(trial, sys);
            } catch (const CollisionError&) {
                continue;
            }
            if (std::isfinite(At) && At <= A + opts.armijo * s * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        cur = trial;
        A = At;
        g = action_gradient(cur, sys);
        step = s;
        if ((it + 1) % opts.word_check_every == 0 && !(topology::homotopy_word(cur, sys) == word))
            throw TopologyError("descent left the free homotopy class");
    }

    out.class_check = topology::homotopy_word(cur, sys);
    if (!(out.class_check == word)) throw TopologyError("descent left the free homotopy class");
    out.iterations = it;
    out.action_value = A;
    out.min_distance = loop_clearance(cur, sys).distance;
    try {
        out.eom_residual = loop_eom_residual(cur, sys);
        out.energy_drift = loop_energy(cur, sys).max_drift / mean_potential(cur, sys);
    } catch (const Error&) {
        out.eom_residual = inf;
        out.energy_drift = inf;
    }
    const auto cls = classify_outcome(cur, sys, opts.symmetry_tol, opts);
    out.status = cls.status;
    out.reflection = cls.reflection;
    out.loop = std::move(cur);
    return out;
}

MultistartResult multistart(const topology::HomotopyWord& w, const CenterSystem& sys, double T,
                            const MinimizeOptions& opts) {
    if (opts.restarts <= 0) throw std::invalid_argument("restarts must be positive");
    const PeriodicLoop base = seed_loop(w, sys, T, opts.nodes);

    auto run = [&](int r) -> std::pair<RunRecord, std::optional<MinimizeOutcome>> {
        RunRecord rec{r, Status::MaxIterations, inf, inf, 0.0, 0, false, {}};
        try {
            PeriodicLoop start = base;
            if (r > 0) {
                std::seed_seq seq{static_cast<std::uint32_t>(opts.seed & 0xffffffffu),
                                  static_cast<std::uint32_t>(opts.seed >> 32), static_cast<std::uint32_t>(r)};
                std::mt19937_64 rng(seq);
                start = perturbed(base, sys, opts, rng);
            }
            MinimizeOutcome o = minimize_action(start, sys, opts);
            rec.status = o.status;
            rec.action_value = o.action_value;
            rec.eom_residual = o.eom_residual;
            rec.min_distance = o.min_distance;
            rec.iterations = o.iterations;
            return {rec, std::move(o)};
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
            return {rec, std::nullopt};
        }
    };

    std::vector<std::future<std::pair<RunRecord, std::optional<MinimizeOutcome>>>> futures;
    for (int r = 0; r < opts.restarts; ++r) futures.push_back(std::async(std::launch::async, run, r));

    MultistartResult res;
    std::optional<MinimizeOutcome> best;
    auto better = [](const MinimizeOutcome& a, const MinimizeOutcome& b) {
        const bool fa = a.status == Status::CollisionFreeSolution, fb = b.status == Status::CollisionFreeSolution;
        if (fa != fb) return fa;
        return a.action_value < b.action_value;
    };
    for (auto& f : futures) {
        auto [rec, outcome] = f.get();
        res.runs.push_back(rec);
        if (outcome && (!best || better(*outcome, *best))) best = std::move(outcome);
    }
    if (!best) throw NumericError("multistart: every run failed");
    res.best = std::move(*best);
    return res;
}

void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& log) {
    os << "iteration,action,max_gradient,min_distance\n" << std::setprecision(17);
    for (const auto& r : log) os << r.iteration << ',' << r.action << ',' << r.max_gradient << ',' << r.min_distance << '\n';
}

}  // namespace ncenter
