#pragma once

#include "phevsim/vd_controller.hpp"

namespace phevsim::testing {

struct CollocationResult {
    double cost = 0.0;
    bool converged = false;
};

/// Independent numerical minimizer of the control-effort objective: direct
/// collocation with piecewise-linear control on an equally spaced node grid,
/// exact segment integration of the double-integrator dynamics, speed and
/// control box constraints at the nodes, and terminal position/speed
/// equalities. Solved as a box-constrained quadratic program by operator
/// splitting with an active-set polish step.
CollocationResult collocation_min_cost(const BoundaryConditions& bc, const Limits& limits,
                                       int nodes = 200);

}  // namespace phevsim::testing
