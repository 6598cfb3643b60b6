#include "phevsim/vd_controller.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "phevsim/errors.hpp"

namespace phevsim {

const char* to_string(ArcKind k) {
    switch (k) {
        case ArcKind::Unconstrained: return "unconstrained";
        case ArcKind::VmaxArc: return "vmax";
        case ArcKind::VminArc: return "vmin";
        case ArcKind::UmaxArc: return "umax";
        case ArcKind::UminArc: return "umin";
    }
    return "?";
}

namespace {

constexpr double kTimeEps = 1e-9;

void validate_bc(const BoundaryConditions& bc) {
    if (!(bc.tf > bc.t0)) throw InvalidInput("boundary conditions: tf <= t0");
    if (!(bc.pf > bc.p0)) throw InvalidInput("boundary conditions: pf <= p0");
}

}  // namespace

CubicTrajectory::CubicTrajectory(std::vector<Arc> arcs) : arcs_(std::move(arcs)) {
    if (arcs_.empty()) throw InvalidInput("trajectory needs at least one arc");
}

TrajectorySample CubicTrajectory::evaluate(double t) const {
    if (t < t_start() - kTimeEps || t > t_end() + kTimeEps)
        throw TimeOutOfRange("trajectory evaluated at t=" + std::to_string(t));
    // Junction times resolve to the later arc.
    const Arc* arc = &arcs_.back();
    for (const auto& a : arcs_) {
        if (t < a.t_end) {
            arc = &a;
            break;
        }
    }
    const double s = std::clamp(t, arc->t_start, arc->t_end) - arc->t_start;
    TrajectorySample out;
    out.u = arc->a * s + arc->b;
    out.v = 0.5 * arc->a * s * s + arc->b * s + arc->c;
    out.p = arc->a * s * s * s / 6.0 + 0.5 * arc->b * s * s + arc->c * s + arc->d;
    return out;
}

double CubicTrajectory::cost() const {
    double total = 0.0;
    for (const auto& arc : arcs_) {
        const double L = arc.t_end - arc.t_start;
        total += 0.5 * (arc.a * arc.a * L * L * L / 3.0 + arc.a * arc.b * L * L + arc.b * arc.b * L);
    }
    return total;
}

TrajectorySample evaluate(const CubicTrajectory& traj, double t) { return traj.evaluate(t); }

CubicTrajectory solve_unconstrained(const BoundaryConditions& bc) {
    validate_bc(bc);
    const double T = bc.tf - bc.t0;
    if (T < 1e-6) throw SingularSystem("time horizon below 1e-6 s");

    // Local time s = t - t0; unknowns (a, b, c, d).
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    Eigen::Vector4d rhs;
    A(0, 3) = 1.0;                                             // p(0) = p0
    rhs(0) = bc.p0;
    A(1, 2) = 1.0;                                             // v(0) = v0
    rhs(1) = bc.v0;
    A(2, 0) = T * T * T / 6.0;                                 // p(T) = pf
    A(2, 1) = T * T / 2.0;
    A(2, 2) = T;
    A(2, 3) = 1.0;
    rhs(2) = bc.pf;
    if (bc.terminal_speed) {                                   // v(T) = vf
        A(3, 0) = T * T / 2.0;
        A(3, 1) = T;
        A(3, 2) = 1.0;
        rhs(3) = *bc.terminal_speed;
    } else {                                                   // u(T) = 0
        A(3, 0) = T;
        A(3, 1) = 1.0;
        rhs(3) = 0.0;
    }
    const Eigen::Vector4d x = A.fullPivLu().solve(rhs);
    Arc arc;
    arc.t_start = bc.t0;
    arc.t_end = bc.tf;
    arc.kind = ArcKind::Unconstrained;
    arc.a = x(0);
    arc.b = x(1);
    arc.c = x(2);
    arc.d = x(3);
    return CubicTrajectory({arc});
}

namespace {

// ---------------------------------------------------------------------------
// Saturated-linear control machinery.
//
// Off speed-constrained intervals the optimal control is a clamped linear
// function of time, u(s) = clamp(alpha*s + beta, u_min, u_max). The helpers
// below integrate that profile analytically and decompose it into arcs.
// ---------------------------------------------------------------------------

struct SatProfile {
    double alpha = 0.0;
    double beta = 0.0;  // u(s) = clamp(alpha*s + beta)
    double s_begin = 0.0;
    double s_end = 0.0;
};

struct SatState {
    double p = 0.0;
    double v = 0.0;
    double cost = 0.0;
};

std::vector<double> sat_breakpoints(const SatProfile& pr, const Limits& lim) {
    std::vector<double> bs = {pr.s_begin, pr.s_end};
    if (std::abs(pr.alpha) > 1e-15) {
        for (double bound : {lim.u_max, lim.u_min}) {
            const double s = (bound - pr.beta) / pr.alpha;
            if (s > pr.s_begin + 1e-12 && s < pr.s_end - 1e-12) bs.push_back(s);
        }
    }
    std::sort(bs.begin(), bs.end());
    return bs;
}

SatState integrate_sat(const SatProfile& pr, const Limits& lim, double p0, double v0) {
    SatState st{p0, v0, 0.0};
    const auto bs = sat_breakpoints(pr, lim);
    for (std::size_t i = 0; i + 1 < bs.size(); ++i) {
        const double s1 = bs[i], s2 = bs[i + 1], dt = s2 - s1;
        if (dt <= 0.0) continue;
        const double mid = pr.alpha * 0.5 * (s1 + s2) + pr.beta;
        double a, b;
        if (mid >= lim.u_max) {
            a = 0.0;
            b = lim.u_max;
        } else if (mid <= lim.u_min) {
            a = 0.0;
            b = lim.u_min;
        } else {
            a = pr.alpha;
            b = pr.alpha * s1 + pr.beta;
        }
        st.p += st.v * dt + 0.5 * b * dt * dt + a * dt * dt * dt / 6.0;
        st.v += b * dt + 0.5 * a * dt * dt;
        st.cost += 0.5 * (a * a * dt * dt * dt / 3.0 + a * b * dt * dt + b * b * dt);
    }
    return st;
}

// Appends the arcs of a saturated-linear profile, keeping p, v continuous.
void append_sat_arcs(std::vector<Arc>& arcs, const SatProfile& pr, const Limits& lim, double t0,
                     double p_at_begin, double v_at_begin) {
    const auto bs = sat_breakpoints(pr, lim);
    double p = p_at_begin, v = v_at_begin;
    for (std::size_t i = 0; i + 1 < bs.size(); ++i) {
        const double s1 = bs[i], s2 = bs[i + 1], dt = s2 - s1;
        if (dt <= 1e-12) continue;
        const double mid = pr.alpha * 0.5 * (s1 + s2) + pr.beta;
        Arc arc;
        arc.t_start = t0 + s1;
        arc.t_end = t0 + s2;
        arc.c = v;
        arc.d = p;
        if (mid >= lim.u_max) {
            arc.kind = ArcKind::UmaxArc;
            arc.a = 0.0;
            arc.b = lim.u_max;
        } else if (mid <= lim.u_min) {
            arc.kind = ArcKind::UminArc;
            arc.a = 0.0;
            arc.b = lim.u_min;
        } else {
            arc.kind = ArcKind::Unconstrained;
            arc.a = pr.alpha;
            arc.b = pr.alpha * s1 + pr.beta;
        }
        p += v * dt + 0.5 * arc.b * dt * dt + arc.a * dt * dt * dt / 6.0;
        v += arc.b * dt + 0.5 * arc.a * dt * dt;
        arcs.push_back(arc);
    }
}

// Safeguarded bisection for a monotone residual. Orientation is detected
// from the bracket endpoints.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * fhi > 0.0) throw NoConvergence("bisection bracket does not straddle a root");
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::abs(fm) == 0.0 || 0.5 * (hi - lo) < tol) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    return 0.5 * (lo + hi);
}

// Scans for a sign change of f over [lo, hi], then bisects. Returns nullopt
// when no sign change exists.
std::optional<double> scan_and_bisect(const std::function<double(double)>& f, double lo, double hi,
                                      double tol, int scan_points = 64) {
    double prev_x = lo, prev_f = f(lo);
    if (prev_f == 0.0) return lo;
    for (int i = 1; i <= scan_points; ++i) {
        const double x = lo + (hi - lo) * i / scan_points;
        const double fx = f(x);
        if (fx == 0.0) return x;
        if (prev_f * fx < 0.0) return bisect(f, prev_x, x, tol);
        prev_x = x;
        prev_f = fx;
    }
    return std::nullopt;
}

// Solves for the clamped-linear control meeting p(T) = pf and the terminal
// speed condition (fixed vf, or slope hitting zero at T when free).
// Returns nullopt when no such profile exists.
struct SatSolution {
    double alpha = 0.0;
    double beta = 0.0;
    double cost = 0.0;
};

std::optional<SatSolution> solve_saturated(const BoundaryConditions& bc, const Limits& lim) {
    const double T = bc.tf - bc.t0;
    const double alpha_span = 64.0 * (lim.u_max - lim.u_min) / T;

    const auto beta_for_alpha = [&](double alpha) -> std::optional<double> {
        if (!bc.terminal_speed) return -alpha * T;  // u reaches 0 exactly at T
        const double target = *bc.terminal_speed;
        const auto fv = [&](double beta) {
            SatProfile pr{alpha, beta, 0.0, T};
            return integrate_sat(pr, lim, bc.p0, bc.v0).v - target;
        };
        const double blo = lim.u_min - std::abs(alpha) * T - 1.0;
        const double bhi = lim.u_max + std::abs(alpha) * T + 1.0;
        if (fv(blo) > 0.0 || fv(bhi) < 0.0) return std::nullopt;  // vf unreachable
        return bisect(fv, blo, bhi, 1e-13 * (bhi - blo));
    };

    const auto fp = [&](double alpha) -> double {
        const auto beta = beta_for_alpha(alpha);
        if (!beta) return std::numeric_limits<double>::quiet_NaN();
        SatProfile pr{alpha, *beta, 0.0, T};
        return integrate_sat(pr, lim, bc.p0, bc.v0).p - bc.pf;
    };

    // p(T) is monotone in alpha once the terminal-speed condition is folded
    // in, but the feasible alpha range may be a sub-interval; scan for the
    // sign change.
    double prev_x = -alpha_span;
    double prev_f = fp(prev_x);
    std::optional<double> root;
    const int n = 256;
    for (int i = 1; i <= n && !root; ++i) {
        const double x = -alpha_span + 2.0 * alpha_span * i / n;
        const double fx = fp(x);
        if (!std::isnan(fx) && !std::isnan(prev_f)) {
            if (fx == 0.0) root = x;
            else if (prev_f * fx < 0.0)
                root = bisect([&](double a) { return fp(a); }, prev_x, x, 1e-13 * alpha_span);
        }
        prev_x = x;
        prev_f = fx;
    }
    if (!root) return std::nullopt;
    const auto beta = beta_for_alpha(*root);
    if (!beta) return std::nullopt;
    SatProfile pr{*root, *beta, 0.0, T};
    const auto st = integrate_sat(pr, lim, bc.p0, bc.v0);
    return SatSolution{*root, *beta, st.cost};
}

// ---------------------------------------------------------------------------
// Speed-constrained (tangential) arc construction.
// ---------------------------------------------------------------------------

// Approach arc from (0, p0, v0) to v = v_bound with u = 0 at s = tau1.
// Control: u(s) = clamp(alpha * (s - tau1)). Returns nullopt when v_bound is
// unreachable by tau1 under the control limits.
struct ApproachArc {
    double alpha = 0.0;
    double p_end = 0.0;
    double cost = 0.0;
};

std::optional<ApproachArc> solve_approach(double p0, double v0, double v_bound, double tau1,
                                          const Limits& lim) {
    if (tau1 <= 1e-9) {
        if (std::abs(v0 - v_bound) < 1e-9) return ApproachArc{0.0, p0, 0.0};
        return std::nullopt;
    }
    const auto fv = [&](double alpha) {
        SatProfile pr{alpha, -alpha * tau1, 0.0, tau1};
        return integrate_sat(pr, lim, p0, v0).v - v_bound;
    };
    const double big = 1e4 * (lim.u_max - lim.u_min) / tau1;
    // v(tau1) is monotone decreasing in alpha (alpha < 0 accelerates).
    if (fv(-big) < 0.0 || fv(big) > 0.0) return std::nullopt;
    const double alpha = bisect(fv, -big, big, 1e-13 * big);
    SatProfile pr{alpha, -alpha * tau1, 0.0, tau1};
    const auto st = integrate_sat(pr, lim, p0, v0);
    return ApproachArc{alpha, st.p, st.cost};
}

// Departure arc leaving the v = v_bound boundary at s = tau2 with u = 0 and
// meeting the terminal speed at s = T. Control: u(s) = clamp(alpha*(s - tau2)).
struct DepartureArc {
    double alpha = 0.0;
    double dp = 0.0;  // distance covered on [tau2, T]
    double cost = 0.0;
};

std::optional<DepartureArc> solve_departure(double v_bound, double tau2, double T,
                                            const std::optional<double>& vf, const Limits& lim) {
    const double span = T - tau2;
    if (!vf) return DepartureArc{0.0, v_bound * span, 0.0};  // free: stay on the boundary
    if (span <= 1e-9) {
        if (std::abs(*vf - v_bound) < 1e-9) return DepartureArc{0.0, 0.0, 0.0};
        return std::nullopt;
    }
    const auto fv = [&](double alpha) {
        SatProfile pr{alpha, -alpha * tau2, tau2, T};
        return integrate_sat(pr, lim, 0.0, v_bound).v - *vf;
    };
    const double big = 1e4 * (lim.u_max - lim.u_min) / span;
    if (fv(big) < 0.0 || fv(-big) > 0.0) return std::nullopt;  // v(T) increasing in alpha here
    const double alpha = bisect(fv, -big, big, 1e-13 * big);
    SatProfile pr{alpha, -alpha * tau2, tau2, T};
    const auto st = integrate_sat(pr, lim, 0.0, v_bound);
    return DepartureArc{alpha, st.p, st.cost};
}

struct BoundarySolution {
    double tau1 = 0.0;
    double tau2 = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double cost = std::numeric_limits<double>::infinity();
    bool valid = false;
};

// For a given approach-junction time tau1 (pinned-terminal case with
// vf != v_bound), solves the exit time tau2 from total distance, then
// reports the candidate cost.
BoundarySolution solve_boundary_for_tau1(const BoundaryConditions& bc, const Limits& lim,
                                         double v_bound, double tau1) {
    BoundarySolution out;
    out.tau1 = tau1;
    const double T = bc.tf - bc.t0;
    const auto app = solve_approach(bc.p0, bc.v0, v_bound, tau1, lim);
    if (!app) return out;

    const auto fr = [&](double tau2) -> double {
        const auto dep = solve_departure(v_bound, tau2, T, bc.terminal_speed, lim);
        if (!dep) return std::numeric_limits<double>::quiet_NaN();
        return app->p_end + v_bound * (tau2 - tau1) + dep->dp - bc.pf;
    };
    // The dwell length trades distance monotonically against the departure
    // arc, so the distance residual is monotone in tau2. The departure needs
    // at least |vf - v_bound| / u_cap seconds; beyond that edge the residual
    // is undefined.
    const double vf = *bc.terminal_speed;
    const double dep_min_span =
        vf > v_bound ? (vf - v_bound) / lim.u_max : (v_bound - vf) / (-lim.u_min);
    const double tau2_hi = T - dep_min_span * 1.02 - 1e-9;
    if (tau2_hi < tau1) return out;
    std::optional<double> root;
    const double f_lo = fr(tau1), f_hi = fr(tau2_hi);
    if (!std::isnan(f_lo) && !std::isnan(f_hi)) {
        if (f_lo == 0.0) root = tau1;
        else if (f_hi == 0.0) root = tau2_hi;
        else if (f_lo * f_hi < 0.0)
            root = bisect(fr, tau1, tau2_hi, 1e-10 * T);
    }
    if (!root) root = scan_and_bisect(fr, tau1, tau2_hi, 1e-10 * T);
    if (!root) return out;
    const double tau2 = *root;

    const auto dep = solve_departure(v_bound, tau2, T, bc.terminal_speed, lim);
    if (!dep) return out;
    const double p_total = app->p_end + v_bound * (tau2 - tau1) + dep->dp;
    if (std::abs(p_total - bc.pf) > 1e-5) return out;
    out.tau2 = tau2;
    out.alpha1 = app->alpha;
    out.alpha2 = dep->alpha;
    out.cost = app->cost + dep->cost;
    out.valid = true;
    return out;
}

// Terminal on the boundary (free terminal speed or vf == v_bound): the
// boundary arc extends to T and tau1 alone fixes the distance.
std::optional<BoundarySolution> solve_boundary_terminal_on_bound(const BoundaryConditions& bc,
                                                                 const Limits& lim,
                                                                 double v_bound) {
    const double T = bc.tf - bc.t0;
    const auto g = [&](double tau1) -> double {
        const auto app = solve_approach(bc.p0, bc.v0, v_bound, tau1, lim);
        if (!app) return std::numeric_limits<double>::quiet_NaN();
        return app->p_end + v_bound * (T - tau1) - bc.pf;
    };
    const double tau1_min = bc.v0 > v_bound ? (bc.v0 - v_bound) / (-lim.u_min)
                                            : (v_bound - bc.v0) / lim.u_max;
    std::optional<double> root;
    double prev_x = 0.0, prev_f = g(prev_x);
    const int n = 128;
    for (int i = 1; i <= n && !root; ++i) {
        const double frac = static_cast<double>(i) / n;
        const double x = std::min(T, tau1_min + (T - tau1_min) * frac * frac);
        const double fx = g(x);
        if (!std::isnan(fx) && !std::isnan(prev_f)) {
            if (fx == 0.0) root = x;
            else if (prev_f * fx < 0.0)
                root = bisect(g, prev_x, x, 1e-10 * T);
        }
        prev_x = x;
        prev_f = fx;
    }
    if (!root) return std::nullopt;
    const auto app = solve_approach(bc.p0, bc.v0, v_bound, *root, lim);
    if (!app) return std::nullopt;
    BoundarySolution sol;
    sol.tau1 = *root;
    sol.tau2 = T;
    sol.alpha1 = app->alpha;
    sol.alpha2 = 0.0;
    sol.cost = app->cost;
    sol.valid = true;
    return sol;
}

CubicTrajectory assemble_boundary_solution(const BoundaryConditions& bc, const Limits& lim,
                                           double v_bound, ArcKind boundary_kind,
                                           const BoundarySolution& sol) {
    const double T = bc.tf - bc.t0;
    std::vector<Arc> arcs;
    double p = bc.p0;
    if (sol.tau1 > 1e-9) {
        SatProfile pr{sol.alpha1, -sol.alpha1 * sol.tau1, 0.0, sol.tau1};
        append_sat_arcs(arcs, pr, lim, bc.t0, bc.p0, bc.v0);
        p = integrate_sat(pr, lim, bc.p0, bc.v0).p;
    }
    if (sol.tau2 - sol.tau1 > 1e-9) {
        Arc arc;
        arc.t_start = bc.t0 + sol.tau1;
        arc.t_end = bc.t0 + sol.tau2;
        arc.kind = boundary_kind;
        arc.a = 0.0;
        arc.b = 0.0;
        arc.c = v_bound;
        arc.d = p;
        arcs.push_back(arc);
        p += v_bound * (sol.tau2 - sol.tau1);
    }
    if (T - sol.tau2 > 1e-9) {
        SatProfile pr{sol.alpha2, -sol.alpha2 * sol.tau2, sol.tau2, T};
        append_sat_arcs(arcs, pr, lim, bc.t0, p, v_bound);
    }
    if (arcs.empty()) throw NoConvergence("degenerate boundary solution");
    return CubicTrajectory(std::move(arcs));
}

// Which bound (if any) does the trajectory violate?
struct Violation {
    bool vmax = false, vmin = false, umax = false, umin = false;
    double vmax_excess = 0.0, vmin_excess = 0.0;
    bool any() const { return vmax || vmin || umax || umin; }
    bool speed() const { return vmax || vmin; }
};

Violation check_bounds(const CubicTrajectory& traj, const Limits& lim, double tol = 1e-7) {
    Violation vio;
    for (const auto& arc : traj.arcs()) {
        const double L = arc.t_end - arc.t_start;
        for (double s : {0.0, L}) {
            const double u = arc.a * s + arc.b;
            if (u > lim.u_max + tol) vio.umax = true;
            if (u < lim.u_min - tol) vio.umin = true;
            const double v = 0.5 * arc.a * s * s + arc.b * s + arc.c;
            if (v > lim.v_max + tol) {
                vio.vmax = true;
                vio.vmax_excess = std::max(vio.vmax_excess, v - lim.v_max);
            }
            if (v < lim.v_min - tol) {
                vio.vmin = true;
                vio.vmin_excess = std::max(vio.vmin_excess, lim.v_min - v);
            }
        }
        if (std::abs(arc.a) > 1e-15) {
            const double s_ext = -arc.b / arc.a;  // u = 0, speed extremum
            if (s_ext > 0.0 && s_ext < L) {
                const double v = 0.5 * arc.a * s_ext * s_ext + arc.b * s_ext + arc.c;
                if (v > lim.v_max + tol) {
                    vio.vmax = true;
                    vio.vmax_excess = std::max(vio.vmax_excess, v - lim.v_max);
                }
                if (v < lim.v_min - tol) {
                    vio.vmin = true;
                    vio.vmin_excess = std::max(vio.vmin_excess, lim.v_min - v);
                }
            }
        }
    }
    return vio;
}

void feasibility_precheck(const BoundaryConditions& bc, const Limits& lim) {
    const double T = bc.tf - bc.t0;
    const double dist = bc.pf - bc.p0;
    // Max distance: u_max until v_max, then cruise.
    const double t_up = std::min(T, (lim.v_max - bc.v0) / lim.u_max);
    const double d_max = bc.v0 * t_up + 0.5 * lim.u_max * t_up * t_up + lim.v_max * (T - t_up);
    if (d_max < dist - 1e-9)
        throw Infeasible("assigned entry time unreachable even at full acceleration");
    // Min distance: u_min until v_min, then cruise.
    const double t_dn = std::min(T, (bc.v0 - lim.v_min) / (-lim.u_min));
    const double d_min = bc.v0 * t_dn + 0.5 * lim.u_min * t_dn * t_dn + lim.v_min * (T - t_dn);
    if (d_min > dist + 1e-9)
        throw Infeasible("assigned entry time too late even at full braking");
    if (bc.terminal_speed) {
        const double vf = *bc.terminal_speed;
        if (vf > bc.v0 + lim.u_max * T + 1e-9 || vf < bc.v0 + lim.u_min * T - 1e-9)
            throw Infeasible("terminal speed unreachable within the horizon");
        const double au = lim.u_max, ad = -lim.u_min;
        // Joint distance/terminal-speed reachability. Minimum distance:
        // brake to w (dwelling at v_min if reached), accelerate to vf.
        double w = (au * bc.v0 + ad * vf - T * au * ad) / (au + ad);
        double dwell = 0.0;
        if (w < lim.v_min) {
            w = lim.v_min;
            dwell = T - (bc.v0 - w) / ad - (vf - w) / au;
        }
        if (w <= std::min(bc.v0, vf) + 1e-12 && dwell >= 0.0) {
            const double d_min = (bc.v0 * bc.v0 - w * w) / (2.0 * ad) + w * dwell +
                                 (vf * vf - w * w) / (2.0 * au);
            if (d_min > dist + 1e-9)
                throw Infeasible("pinned terminal speed forces an overshoot of the target");
        }
        // Maximum distance: accelerate to m (cruising at v_max if reached),
        // brake to vf.
        double m = (ad * bc.v0 + au * vf + T * au * ad) / (au + ad);
        double cruise = 0.0;
        if (m > lim.v_max) {
            m = lim.v_max;
            cruise = T - (m - bc.v0) / au - (m - vf) / ad;
        }
        if (m >= std::max(bc.v0, vf) - 1e-12 && cruise >= 0.0) {
            const double d_max = (m * m - bc.v0 * bc.v0) / (2.0 * au) + m * cruise +
                                 (m * m - vf * vf) / (2.0 * ad);
            if (d_max < dist - 1e-9)
                throw Infeasible("target unreachable with the pinned terminal speed");
        }
    }
}

CubicTrajectory solve_with_speed_boundary(const BoundaryConditions& bc, const Limits& lim,
                                          bool at_vmax) {
    const double T = bc.tf - bc.t0;
    const double v_bound = at_vmax ? lim.v_max : lim.v_min;
    const ArcKind kind = at_vmax ? ArcKind::VmaxArc : ArcKind::VminArc;

    if (!bc.terminal_speed || std::abs(*bc.terminal_speed - v_bound) < 1e-9) {
        const auto sol = solve_boundary_terminal_on_bound(bc, lim, v_bound);
        if (!sol) throw NoConvergence("no feasible speed-boundary junction found");
        return assemble_boundary_solution(bc, lim, v_bound, kind, *sol);
    }

    // One-dimensional family in tau1; pick the cheapest member. The feasible
    // tau1 window can be narrow and sits just above the minimum tangential
    // approach time, so concentrate samples near that edge.
    BoundarySolution best;
    const int n_scan = 96;
    const double tau1_min = bc.v0 > v_bound ? (bc.v0 - v_bound) / (-lim.u_min)
                                            : (v_bound - bc.v0) / lim.u_max;
    std::vector<double> taus;
    if (std::abs(bc.v0 - v_bound) < 1e-9) taus.push_back(0.0);
    for (int i = 1; i <= n_scan; ++i) {
        const double frac = static_cast<double>(i) / n_scan;
        const double tau1 = tau1_min + (T - tau1_min) * frac * frac;
        if (tau1 > 1e-9 && tau1 < T - 1e-9) taus.push_back(tau1);
    }
    for (double tau1 : taus) {
        const auto cand = solve_boundary_for_tau1(bc, lim, v_bound, tau1);
        if (cand.valid && cand.cost < best.cost) best = cand;
    }
    if (!best.valid) throw NoConvergence("no feasible speed-boundary junction found");

    // Golden-section refinement of tau1 around the best scan sample.
    const double step = (T - tau1_min) / n_scan;
    double lo = std::max(0.0, best.tau1 - step);
    double hi = std::min(T, best.tau1 + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    auto cost_at = [&](double t) {
        const auto c = solve_boundary_for_tau1(bc, lim, v_bound, t);
        return c.valid ? c.cost : std::numeric_limits<double>::infinity();
    };
    double f1 = cost_at(x1), f2 = cost_at(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-8; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = cost_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = cost_at(x2);
        }
    }
    const double tau_best = 0.5 * (lo + hi);
    auto refined = solve_boundary_for_tau1(bc, lim, v_bound, tau_best);
    if (!refined.valid || refined.cost > best.cost) refined = solve_boundary_for_tau1(bc, lim, v_bound, best.tau1);
    if (!refined.valid) throw NoConvergence("speed-boundary refinement lost feasibility");
    return assemble_boundary_solution(bc, lim, v_bound, kind, refined);
}

}  // namespace

CubicTrajectory piece_arcs(const BoundaryConditions& bc, const Limits& limits) {
    validate_bc(bc);
    feasibility_precheck(bc, limits);

    CubicTrajectory traj = solve_unconstrained(bc);
    Violation vio = check_bounds(traj, limits);
    if (!vio.any()) return traj;

    if (!vio.speed()) {
        const auto sat = solve_saturated(bc, limits);
        if (sat) {
            std::vector<Arc> arcs;
            SatProfile pr{sat->alpha, sat->beta, 0.0, bc.tf - bc.t0};
            append_sat_arcs(arcs, pr, limits, bc.t0, bc.p0, bc.v0);
            traj = CubicTrajectory(std::move(arcs));
            vio = check_bounds(traj, limits);
            if (!vio.any()) return traj;
        }
        if (!vio.speed()) throw NoConvergence("control-saturation solve failed");
    }

    const bool at_vmax = vio.vmax_excess >= vio.vmin_excess;
    traj = solve_with_speed_boundary(bc, limits, at_vmax);
    const Violation post = check_bounds(traj, limits, 1e-5);
    if (post.any()) throw NoConvergence("pieced solution still violates a bound");
    return traj;
}

RearEndReport verify_rear_end(const CubicTrajectory& leader, const CubicTrajectory& follower,
                              const SafetyParams& safety, double dt) {
    const double t_begin = std::max(leader.t_start(), follower.t_start());
    const double t_end = std::min(leader.t_end(), follower.t_end());
    if (t_begin > t_end) throw DisjointTimeSpans("trajectories do not overlap in time");

    RearEndReport report;
    report.min_margin = std::numeric_limits<double>::infinity();
    const int n = std::max(1, static_cast<int>(std::ceil((t_end - t_begin) / dt)));
    for (int i = 0; i <= n; ++i) {
        const double t = std::min(t_begin + i * dt, t_end);
        const auto lead = leader.evaluate(t);
        const auto foll = follower.evaluate(t);
        const double margin = lead.p - foll.p - min_safe_gap(safety, std::max(0.0, foll.v));
        if (margin < report.min_margin) report.min_margin = margin;
        if (margin < 0.0 && !report.first_violation_time) report.first_violation_time = t;
    }
    return report;
}

std::string to_csv(const CubicTrajectory& traj, double step) {
    if (step <= 0.0) throw InvalidInput("csv sample step must be positive");
    std::ostringstream os;
    os.precision(9);
    os << "t,p,v,u\n";
    const double t0 = traj.t_start(), t1 = traj.t_end();
    const int n = static_cast<int>(std::ceil((t1 - t0) / step));
    for (int i = 0; i <= n; ++i) {
        const double t = std::min(t0 + i * step, t1);
        const auto s = traj.evaluate(t);
        os << t << ',' << s.p << ',' << s.v << ',' << s.u << '\n';
        if (t >= t1) break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// ZoneQueue
// ---------------------------------------------------------------------------

int ZoneQueue::register_vehicle(int vehicle_id, double t0z, double v0) {
    if (!entries_.empty() && t0z < entries_.back().t0z)
        throw OutOfOrderArrival("arrival at t=" + std::to_string(t0z) +
                                " precedes last queue arrival");
    entries_.push_back(QueueEntry{vehicle_id, t0z, v0, std::nullopt, 0.0});
    return static_cast<int>(entries_.size()) - 1;
}

QueueEntry* ZoneQueue::find_mutable(int vehicle_id) {
    for (auto& e : entries_)
        if (e.vehicle_id == vehicle_id) return &e;
    return nullptr;
}

const QueueEntry* ZoneQueue::find(int vehicle_id) const {
    for (const auto& e : entries_)
        if (e.vehicle_id == vehicle_id) return &e;
    return nullptr;
}

const QueueEntry* ZoneQueue::predecessor_of(int vehicle_id) const {
    const QueueEntry* prev = nullptr;
    for (const auto& e : entries_) {
        if (e.vehicle_id == vehicle_id) return prev;
        prev = &e;
    }
    return nullptr;
}

double ZoneQueue::assign_entry_time(int vehicle_id, const ConflictZoneSpec& zone,
                                    const SafetyParams& safety, const Limits& limits,
                                    double terminal_speed) {
    QueueEntry* entry = find_mutable(vehicle_id);
    if (!entry) throw ModelError("vehicle not registered in zone queue");
    if (entry->v0 <= 0.0) throw NegativeSpeed("control-zone entry speed must be positive");

    const double L = zone.control_zone_length;
    double tz = std::max(entry->t0z + L / entry->v0, entry->t0z + L / limits.v_max);

    const QueueEntry* pred = predecessor_of(vehicle_id);
    if (pred) {
        if (!pred->tz) throw PredecessorUnassigned("predecessor has no assigned entry time");
        if (pred->v_at_tz <= 0.0)
            throw ZeroPredecessorSpeed("predecessor entry speed is not positive");
        const double headway = *pred->tz + min_safe_gap(safety, entry->v0) / pred->v_at_tz;
        tz = std::max(tz, std::min(headway, entry->t0z + L / limits.v_min));
    }
    entry->tz = tz;
    entry->v_at_tz = terminal_speed;
    return tz;
}

void ZoneQueue::update_assignment(int vehicle_id, double new_tz) {
    QueueEntry* entry = find_mutable(vehicle_id);
    if (!entry || !entry->tz) throw ModelError("update_assignment on unassigned vehicle");
    if (new_tz < *entry->tz) throw ModelError("assigned entry times may only move later");
    entry->tz = new_tz;
}

void ZoneQueue::set_crossing_speed(int vehicle_id, double v_at_tz) {
    QueueEntry* entry = find_mutable(vehicle_id);
    if (!entry || !entry->tz) throw ModelError("set_crossing_speed on unassigned vehicle");
    if (v_at_tz <= 0.0) throw NegativeSpeed("crossing speed must be positive");
    entry->v_at_tz = v_at_tz;
}

void ZoneQueue::remove(int vehicle_id) {
    std::erase_if(entries_, [&](const QueueEntry& e) { return e.vehicle_id == vehicle_id; });
}

}  // namespace phevsim
