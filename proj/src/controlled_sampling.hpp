#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "ncenter/errors.hpp"

namespace ncenter::detail {

// Runge-Kutta-Fehlberg 7(8) with step control, landing exactly on each
// sample time. `accepted(state)` runs after every accepted step, so a
// trial stage that strays near a singularity only shrinks the step.
template <class State, class Rhs, class Accepted, class Observe>
void controlled_sampling(Rhs rhs, State x, const std::vector<double>& times, double dt, double abs_tol, double rel_tol,
                         Accepted accepted, Observe observe) {
    namespace odeint = boost::numeric::odeint;
    auto stepper = odeint::make_controlled(abs_tol, rel_tol, odeint::runge_kutta_fehlberg78<State>());
    double t = times.front();
    observe(x, t);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double target = times[i];
        int rejected = 0;
        while (t != target) {
            const double remaining = target - t;
            const bool last = std::abs(dt) >= std::abs(remaining);
            double step = last ? remaining : dt;
            if (stepper.try_step(rhs, x, t, step) == odeint::success) {
                rejected = 0;
                // A clipped final step says little about the next one.
                if (!last || std::abs(step) > std::abs(dt)) dt = step;
                if (last) t = target;
                accepted(x);
            } else {
                dt = step;
                if (++rejected > 500 || std::abs(dt) < 1e-300)
                    throw NumericError("integrator step size underflow");
            }
        }
        observe(x, t);
    }
}

}  // namespace ncenter::detail
