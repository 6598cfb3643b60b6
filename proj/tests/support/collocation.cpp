#include "support/collocation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace phevsim::testing {

namespace {

// With control linear on each segment [k, k+1]:
//   dv = h*(u_k + u_{k+1})/2
//   dp = v_k*h + h^2*(2*u_k + u_{k+1})/6
//   effort = h/6 * (u_k^2 + u_k*u_{k+1} + u_{k+1}^2)
// so speed at node k, terminal position, and the objective are all affine /
// quadratic in the node controls u.
struct Discretization {
    Eigen::MatrixXd P;     // objective Hessian, J = 0.5 u'Pu
    Eigen::MatrixXd Lv;    // v_k = v0 + (Lv u)_k
    Eigen::RowVectorXd a;  // p_terminal = p0 + v0*T + a u
    double h = 0.0;
};

Discretization discretize(const BoundaryConditions& bc, int n) {
    Discretization d;
    const double T = bc.tf - bc.t0;
    const int segs = n - 1;
    d.h = T / segs;

    d.P = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < segs; ++k) {
        d.P(k, k) += d.h / 3.0;
        d.P(k + 1, k + 1) += d.h / 3.0;
        d.P(k, k + 1) += d.h / 6.0;
        d.P(k + 1, k) += d.h / 6.0;
    }

    d.Lv = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        d.Lv.row(k) = d.Lv.row(k - 1);
        d.Lv(k, k - 1) += d.h / 2.0;
        d.Lv(k, k) += d.h / 2.0;
    }

    d.a = Eigen::RowVectorXd::Zero(n);
    for (int k = 0; k < segs; ++k) {
        d.a += d.h * d.Lv.row(k);
        d.a(k) += 2.0 * d.h * d.h / 6.0;
        d.a(k + 1) += d.h * d.h / 6.0;
    }
    return d;
}

}  // namespace

CollocationResult collocation_min_cost(const BoundaryConditions& bc, const Limits& limits,
                                       int nodes) {
    const int n = nodes;
    const Discretization d = discretize(bc, n);
    const double T = bc.tf - bc.t0;

    // Constraint rows: node speeds (box), terminal position (equality),
    // terminal speed (equality when pinned), node controls (box).
    const bool pin_vf = bc.terminal_speed.has_value();
    const int m = n + 1 + (pin_vf ? 1 : 0) + n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd lo(m), hi(m), rho(m);
    const double rho_box = 10.0, rho_eq = 1e4;
    int row = 0;
    for (int k = 0; k < n; ++k, ++row) {
        A.row(row) = d.Lv.row(k);
        lo(row) = limits.v_min - bc.v0;
        hi(row) = limits.v_max - bc.v0;
        rho(row) = rho_box;
    }
    A.row(row) = d.a;
    lo(row) = hi(row) = bc.pf - bc.p0 - bc.v0 * T;
    rho(row) = rho_eq;
    ++row;
    if (pin_vf) {
        A.row(row) = d.Lv.row(n - 1);
        lo(row) = hi(row) = *bc.terminal_speed - bc.v0;
        rho(row) = rho_eq;
        ++row;
    }
    for (int k = 0; k < n; ++k, ++row) {
        A(row, k) = 1.0;
        lo(row) = limits.u_min;
        hi(row) = limits.u_max;
        rho(row) = rho_box;
    }

    // Operator-splitting iteration on  min 0.5 u'Pu  s.t. lo <= Au <= hi.
    const double sigma = 1e-6;
    const Eigen::MatrixXd K =
        d.P + sigma * Eigen::MatrixXd::Identity(n, n) + A.transpose() * rho.asDiagonal() * A;
    const Eigen::LDLT<Eigen::MatrixXd> solver(K);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    double prim_res = 1.0;
    for (int it = 0; it < 40000; ++it) {
        const Eigen::VectorXd rhs =
            sigma * x + A.transpose() * (rho.asDiagonal() * z - y);
        x = solver.solve(rhs);
        const Eigen::VectorXd ax = A * x;
        z = (ax + rho.cwiseInverse().asDiagonal() * y).cwiseMax(lo).cwiseMin(hi);
        y += rho.asDiagonal() * (ax - z);
        if (it % 50 == 49) {
            prim_res = (ax - z).lpNorm<Eigen::Infinity>();
            if (prim_res < 1e-8) break;
        }
    }

    CollocationResult result;
    result.converged = prim_res < 1e-5;
    result.cost = 0.5 * x.dot(d.P * x);

    // Polish: treat rows held at a bound as equalities and re-solve the
    // equality-constrained program exactly through its KKT system.
    std::vector<int> active;
    Eigen::VectorXd ax = A * x;
    for (int r = 0; r < m; ++r) {
        const bool eq = hi(r) - lo(r) < 1e-12;
        if (eq || ax(r) <= lo(r) + 1e-6 || ax(r) >= hi(r) - 1e-6) active.push_back(r);
    }
    const int na = static_cast<int>(active.size());
    if (na > 0 && na <= n) {
        Eigen::MatrixXd Aact(na, n);
        Eigen::VectorXd bact(na);
        for (int i = 0; i < na; ++i) {
            const int r = active[static_cast<std::size_t>(i)];
            Aact.row(i) = A.row(r);
            bact(i) = ax(r) <= lo(r) + 1e-6 ? lo(r) : hi(r);
        }
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
        kkt.topLeftCorner(n, n) = d.P;
        kkt.topRightCorner(n, na) = Aact.transpose();
        kkt.bottomLeftCorner(na, n) = Aact;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + na);
        rhs.tail(na) = bact;
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        const Eigen::VectorXd xp = sol.head(n);
        const Eigen::VectorXd axp = A * xp;
        const bool feasible = (axp - lo.cwiseMax(axp.cwiseMin(hi))).lpNorm<Eigen::Infinity>() <
                              1e-6 * std::max(1.0, hi.cwiseAbs().maxCoeff());
        if (feasible) {
            const double cp = 0.5 * xp.dot(d.P * xp);
            if (cp <= result.cost + 1e-9) {
                result.cost = cp;
                result.converged = true;
            }
        }
    }
    return result;
}

}  // namespace phevsim::testing
