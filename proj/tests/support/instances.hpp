#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "phevsim/vd_controller.hpp"

namespace phevsim::testing {

/// Random boundary conditions that a double-integrator can meet with modest
/// control effort: mean speed between the endpoint speeds, span long enough
/// to avoid the singular-horizon guard.
inline BoundaryConditions random_bc(std::mt19937_64& rng, bool pin_terminal) {
    std::uniform_real_distribution<double> t0d(0.0, 10.0), span(4.0, 20.0), vd(2.0, 16.0),
        blend(0.3, 0.7);
    BoundaryConditions bc;
    bc.t0 = t0d(rng);
    bc.tf = bc.t0 + span(rng);
    bc.p0 = 0.0;
    bc.v0 = vd(rng);
    const double vf = vd(rng);
    const double w = blend(rng);
    const double mean_v = w * bc.v0 + (1.0 - w) * vf;
    bc.pf = bc.p0 + mean_v * (bc.tf - bc.t0);
    if (pin_terminal) bc.terminal_speed = vf;
    return bc;
}

/// Fixed suite of boundary conditions whose optimal trajectories activate a
/// speed or control bound under the default corridor limits: fast entries
/// over long distances (peak speed would exceed v_max) and slow entries with
/// tight horizons (entry control would exceed u_max).
inline std::vector<BoundaryConditions> constrained_suite() {
    std::vector<BoundaryConditions> suite;
    const auto add = [&](double v0, double vf, double tf, double pf) {
        BoundaryConditions bc;
        bc.t0 = 0.0;
        bc.tf = tf;
        bc.p0 = 0.0;
        bc.pf = pf;
        bc.v0 = v0;
        bc.terminal_speed = vf;
        suite.push_back(bc);
    };
    // Peak-speed cases: unconstrained optimum overshoots v_max = 17.8816.
    add(15.0, 15.0, 10.0, 170.0);
    add(16.0, 14.0, 12.0, 205.0);
    add(14.0, 16.0, 14.0, 240.0);
    add(17.0, 17.0, 15.0, 265.0);
    add(12.0, 15.0, 18.0, 295.0);
    // Entry-control cases: required initial acceleration exceeds u_max = 1.5.
    add(3.0, 12.0, 9.0, 82.0);
    add(2.0, 16.0, 10.0, 93.0);
    add(4.0, 14.0, 7.0, 64.0);
    // Braking cases: entry deceleration just below u_min = -3.
    add(16.0, 4.0, 8.0, 62.0);
    add(15.0, 2.0, 9.0, 55.0);
    return suite;
}

/// Control effort of a quintic position polynomial meeting the same boundary
/// conditions as the cubic optimum: the cubic solution plus a random blend of
/// the two bump shapes whose value and slope vanish at both ends. Integrated
/// with Simpson's rule, exact up to rounding for the degree-6 integrand.
inline double perturbed_quintic_cost(const CubicTrajectory& cubic,
                                     const BoundaryConditions& bc, double mu1, double mu2) {
    const double T = bc.tf - bc.t0;
    const auto u_quintic = [&](double t) {
        const double s = (t - bc.t0) / T;
        // phi1 = s^2 (1-s)^2, phi2 = phi1 * (s - 1/2); second derivatives in s.
        const double d2phi1 = 2.0 - 12.0 * s + 12.0 * s * s;
        const double d2phi2 =
            -1.0 + 12.0 * s - 30.0 * s * s + 20.0 * s * s * s;
        return cubic.evaluate(t).u + (mu1 * d2phi1 + mu2 * d2phi2) / (T * T);
    };
    const int n = 600;  // even
    const double h = T / n;
    double sum = u_quintic(bc.t0) * u_quintic(bc.t0) + u_quintic(bc.tf) * u_quintic(bc.tf);
    for (int i = 1; i < n; ++i) {
        const double u = u_quintic(bc.t0 + i * h);
        sum += (i % 2 == 1 ? 4.0 : 2.0) * u * u;
    }
    return 0.5 * sum * h / 3.0;
}

}  // namespace phevsim::testing
