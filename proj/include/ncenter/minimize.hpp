#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ncenter/model.hpp"
#include "ncenter/topology.hpp"

namespace ncenter {

enum class Status { CollisionFreeSolution, CollisionReflectionCandidate, Boundary, MaxIterations };

/// "CollisionFreeSolution", ..., with Boundary printed as "Boundary(NearCollision)".
std::string to_string(Status s);

struct MinimizeOptions {
    std::size_t nodes = 256;        // used by multistart when seeding
    int max_iters = 20000;
    double grad_tol = 1e-7;         // stop when max |dA/dx_k| < grad_tol * action / length
    double armijo = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
    double collision_radius = 0.01; // fraction of the center length scale
    std::size_t max_nodes = 2048;   // cap for refinement near collisions
    int word_check_every = 10;
    double eom_tol = 1e-3;          // acceleration units, for CollisionFreeSolution
    double symmetry_tol = 1e-3;     // fraction of the loop diameter, for reflection detection
    int restarts = 8;
    std::uint64_t seed = 0;
    double perturbation = 0.15;     // restart seed perturbation, fraction of the length scale
    bool keep_log = false;
};

struct ReflectionData {
    std::size_t k1;
    std::size_t k2;
    double Tbar;
    std::vector<int> off_winding;  // winding about every center other than k1, k2 (index order)
};

struct IterationRecord {
    int iteration;
    double action;
    double max_gradient;
    double min_distance;
};

struct MinimizeOutcome {
    Status status = Status::MaxIterations;
    PeriodicLoop loop;
    double action_value = 0.0;
    double eom_residual = 0.0;
    double energy_drift = 0.0;      // max deviation of the segment energies, relative to the mean potential
    double min_distance = 0.0;
    int iterations = 0;
    topology::HomotopyWord class_check;
    std::optional<ReflectionData> reflection;
    std::vector<IterationRecord> log;
};

struct Classification {
    Status status;
    std::optional<ReflectionData> reflection;
};

/// Corridor polygon spelling `w`; for one center, a circle of the Kepler
/// radius for the given period traversed once per letter.
PeriodicLoop seed_loop(const topology::HomotopyWord& w, const CenterSystem& sys, double T, std::size_t n);

/// Preconditioned gradient descent with Armijo backtracking. Steps whose
/// segments would sweep over a center, or end closer than the collision
/// radius, are rejected, so every accepted iterate stays in the seed's class.
MinimizeOutcome minimize_action(const PeriodicLoop& seed, const CenterSystem& sys, const MinimizeOptions& opts = {});

/// Terminal classification. A loop is a reflection candidate when it is
/// time-symmetric about a near-collision time t0 (max |q(t0+t) - q(t0-t)| <
/// tol * loop diameter), runs back and forth with period 2*Tbar dividing T,
/// reaches a center at t0 + Tbar, and winds around no other center.
Classification classify_outcome(const PeriodicLoop& loop, const CenterSystem& sys, double tol,
                                const MinimizeOptions& opts = {});

struct RunRecord {
    int run;
    Status status;
    double action_value;
    double eom_residual;
    double min_distance;
    int iterations;
    bool failed = false;
    std::string error;
};

struct MultistartResult {
    MinimizeOutcome best;
    std::vector<RunRecord> runs;
};

/// Independent restarts from perturbed seeds (run 0 is the unperturbed
/// seed), executed in parallel and merged by run index.
MultistartResult multistart(const topology::HomotopyWord& w, const CenterSystem& sys, double T,
                            const MinimizeOptions& opts = {});

void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& log);

}  // namespace ncenter
