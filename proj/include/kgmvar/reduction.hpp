#pragma once

// The reduction map v -> phi_v for both boundary regimes: one linear solve
// of the potential equation for a frozen matter field, plus the checks of
// the pointwise bounds and energy identities the reduced problem obeys.

#include <algorithm>
#include <cmath>
#include <optional>

#include "kgmvar/domain.hpp"
#include "kgmvar/elliptic.hpp"

namespace kgmvar {

enum class PotentialRegime { dirichlet, neumann };

/// Below this value of max (v+U)^2 the Neumann potential operator is
/// treated as singular.
inline constexpr double degenerate_coupling_threshold = 1e-14;

struct XiEta {
    ScalarField xi;
    ScalarField eta;
};

struct ReducedState {
    ScalarField v;
    ScalarField phi;
    PotentialRegime regime = PotentialRegime::dirichlet;
    std::optional<XiEta> split;
    SolveStats stats;
};

/// (v + U)^2 on every node.
inline ScalarField coupling_weight(const ScalarField& v, const ScalarField& U) {
    return transform(v, U, [](double a, double b) { return (a + b) * (a + b); });
}

/// phi_v for Dirichlet data: (-Lap_h + (v+U)^2) phi = -Phi_D (v+U)^2 with
/// phi = 0 on the boundary.
inline ReducedState solve_phi_v_dirichlet(const Domain& d, const ScalarField& v, const ScalarField& U,
                                          const ScalarField& PhiD, double tol = 1e-12,
                                          const ScalarField* guess = nullptr) {
    require_same_domain(d, v.domain(), "solve_phi_v_dirichlet");
    require_same_domain(d, U.domain(), "solve_phi_v_dirichlet");
    require_same_domain(d, PhiD.domain(), "solve_phi_v_dirichlet");
    ScalarField w = coupling_weight(v, U);
    ScalarField rhs = transform(w, PhiD, [](double a, double b) { return -a * b; });
    const EllipticOperator op(d, BoundaryKind::dirichlet, std::move(w));
    CgResult res = cg_solve(op, rhs, tol, 0, guess);
    require_converged(res.stats, "solve_phi_v_dirichlet");
    return {v, std::move(res.solution), PotentialRegime::dirichlet, std::nullopt, res.stats};
}

namespace detail {

inline ScalarField checked_neumann_weight(const ScalarField& v, const ScalarField& U) {
    ScalarField w = coupling_weight(v, U);
    const double peak = *std::max_element(w.values().begin(), w.values().end());
    if (peak < degenerate_coupling_threshold) {
        throw DegenerateOperatorError(
            "Neumann potential problem is degenerate: v + U vanishes identically, the constants solve the "
            "homogeneous problem");
    }
    return w;
}

}  // namespace detail

/// phi_v for Neumann data: (-L_N + (v+U)^2) phi = -Phi_N (v+U)^2 + q kappa
/// with zero normal flux.
inline ReducedState solve_phi_v_neumann(const Domain& d, const ScalarField& v, const ScalarField& U,
                                        const ScalarField& PhiN, double q, double kappa, double tol = 1e-12,
                                        const ScalarField* guess = nullptr) {
    require_same_domain(d, v.domain(), "solve_phi_v_neumann");
    require_same_domain(d, U.domain(), "solve_phi_v_neumann");
    require_same_domain(d, PhiN.domain(), "solve_phi_v_neumann");
    const ScalarField w = detail::checked_neumann_weight(v, U);
    const ScalarField rhs = transform(w, PhiN, [&](double a, double b) { return -a * b + q * kappa; });
    CgResult res = solve_neumann_coupled(w, rhs, tol, guess);
    require_converged(res.stats, "solve_phi_v_neumann");
    return {v, std::move(res.solution), PotentialRegime::neumann, std::nullopt, res.stats};
}

/// phi_v = xi + eta with
///   (-L_N + (v+U)^2) xi  = -(v+U)^2 Phi_N,
///   (-L_N + (v+U)^2) eta = q kappa.
inline XiEta split_xi_eta(const Domain& d, const ScalarField& v, const ScalarField& U, const ScalarField& PhiN,
                          double q, double kappa, double tol = 1e-12) {
    const ScalarField w = detail::checked_neumann_weight(v, U);
    const ScalarField rhs_xi = transform(w, PhiN, [](double a, double b) { return -a * b; });
    const ScalarField rhs_eta(d, q * kappa);
    CgResult xi = solve_neumann_coupled(w, rhs_xi, tol);
    require_converged(xi.stats, "split_xi_eta (xi)");
    CgResult eta = solve_neumann_coupled(w, rhs_eta, tol);
    require_converged(eta.stats, "split_xi_eta (eta)");
    return {std::move(xi.solution), std::move(eta.solution)};
}

struct PhiBoundsReport {
    /// max over nodes of the amount by which -Phi_D^+ <= phi <= Phi_D^- fails
    double minmax_violation = 0.0;
    /// max over nodes of |phi + Phi_D| - ||Phi_D||_inf (clipped at 0)
    double sup_violation = 0.0;
    bool pass = true;
};

inline PhiBoundsReport verify_phi_bounds(const ReducedState& state, const ScalarField& PhiD, double tol = 1e-8) {
    const Domain& d = PhiD.domain();
    PhiBoundsReport r;
    const double sup = PhiD.max_abs();
    for (std::size_t flat : d.interior_nodes()) {
        const double p = state.phi[flat];
        const double plus = std::max(0.0, PhiD[flat]);
        const double minus = std::max(0.0, -PhiD[flat]);
        r.minmax_violation = std::max({r.minmax_violation, -plus - p, p - minus});
        r.sup_violation = std::max(r.sup_violation, std::abs(p + PhiD[flat]) - sup);
    }
    r.minmax_violation = std::max(r.minmax_violation, 0.0);
    r.sup_violation = std::max(r.sup_violation, 0.0);
    r.pass = r.minmax_violation <= tol && r.sup_violation <= tol;
    return r;
}

/// The pair of one-signed solves that bracket phi_v:
///   (-Lap_h + w) tilde = Phi_D^- w,   (-Lap_h + w) hat = Phi_D^+ w,
/// so phi_v = tilde - hat by linearity, 0 <= tilde <= Phi_D^- and
/// 0 <= hat <= Phi_D^+. When Phi_D has one sign, tilde and hat are also the
/// positive and negative parts of phi_v.
struct SubSuperReport {
    ScalarField tilde;
    ScalarField hat;
    double decomposition_error = 0.0;  ///< ||phi_v - (tilde - hat)||_inf
    double range_violation = 0.0;      ///< worst failure of the two range bounds
    double positive_part_error = 0.0;  ///< ||tilde - phi_v^+||_inf
    double negative_part_error = 0.0;  ///< ||hat - phi_v^-||_inf
};

inline SubSuperReport sub_super_solutions(const ReducedState& state, const ScalarField& U, const ScalarField& PhiD,
                                          double tol = 1e-12) {
    const Domain& d = PhiD.domain();
    ScalarField w = coupling_weight(state.v, U);
    const ScalarField rhs_tilde = transform(w, PhiD, [](double a, double b) { return a * std::max(0.0, -b); });
    const ScalarField rhs_hat = transform(w, PhiD, [](double a, double b) { return a * std::max(0.0, b); });
    const EllipticOperator op(d, BoundaryKind::dirichlet, std::move(w));
    CgResult tilde = cg_solve(op, rhs_tilde, tol);
    require_converged(tilde.stats, "sub_super_solutions");
    CgResult hat = cg_solve(op, rhs_hat, tol);
    require_converged(hat.stats, "sub_super_solutions");
    SubSuperReport r{std::move(tilde.solution), std::move(hat.solution)};
    for (std::size_t flat : d.interior_nodes()) {
        const double p = state.phi[flat];
        const double t = r.tilde[flat];
        const double h = r.hat[flat];
        r.decomposition_error = std::max(r.decomposition_error, std::abs(p - (t - h)));
        r.range_violation =
            std::max({r.range_violation, -t, t - std::max(0.0, -PhiD[flat]), -h, h - std::max(0.0, PhiD[flat])});
        r.positive_part_error = std::max(r.positive_part_error, std::abs(t - std::max(0.0, p)));
        r.negative_part_error = std::max(r.negative_part_error, std::abs(h - std::max(0.0, -p)));
    }
    r.range_violation = std::max(r.range_violation, 0.0);
    return r;
}

/// Relative residual of
///   ||grad phi||^2 + int phi^2 (v+U)^2 = -int phi Phi_D (v+U)^2,
/// i.e. |LHS - RHS| / (1 + |LHS|).
inline double verify_energy_identity(const ReducedState& state, const ScalarField& U, const ScalarField& PhiD) {
    const ScalarField w = coupling_weight(state.v, U);
    const ScalarField phi2w = transform(state.phi, w, [](double p, double x) { return p * p * x; });
    const ScalarField phiw = transform(state.phi, w, [](double p, double x) { return p * x; });
    const double lhs = dirichlet_form(state.phi, state.phi) + integrate_volume(phi2w);
    const double rhs = -inner_product(phiw, PhiD);
    return std::abs(lhs - rhs) / (1.0 + std::abs(lhs));
}

struct NeumannEstimates {
    double xi_energy = 0.0;          ///< int xi Phi_N (v+U)^2, expected <= 0
    double xi_range_violation = 0.0;  ///< failure of -max Phi_N <= xi <= -min Phi_N
    double eta_sign_violation = 0.0;  ///< failure of q kappa eta >= 0
    double eta_gradient_ratio = 0.0;  ///< ||grad eta|| / (|mean eta| ||v+U||_4^2), informational
    bool pass = true;
};

inline NeumannEstimates verify_neumann_estimates(const ScalarField& xi, const ScalarField& eta, const ScalarField& v,
                                                 const ScalarField& U, const ScalarField& PhiN, double q,
                                                 double kappa, double tol = 1e-8) {
    const Domain& d = xi.domain();
    const ScalarField w = coupling_weight(v, U);
    NeumannEstimates e;
    e.xi_energy = inner_product_closed(transform(xi, w, [](double a, double b) { return a * b; }), PhiN);
    const auto [lo, hi] = std::minmax_element(PhiN.values().begin(), PhiN.values().end());
    const double sign = q * kappa > 0.0 ? 1.0 : (q * kappa < 0.0 ? -1.0 : 0.0);
    for (std::size_t flat = 0; flat < d.node_count(); ++flat) {
        e.xi_range_violation = std::max({e.xi_range_violation, -*hi - xi[flat], xi[flat] + *lo});
        if (sign != 0.0) {
            e.eta_sign_violation = std::max(e.eta_sign_violation, -sign * eta[flat]);
        }
    }
    e.xi_range_violation = std::max(0.0, e.xi_range_violation);
    e.eta_sign_violation = std::max(0.0, e.eta_sign_violation);
    const double eta_mean = integrate_volume_closed(eta) / d.volume();
    const ScalarField w2 = transform(w, [](double a) { return a * a; });
    const double l4_squared = std::sqrt(integrate_volume_closed(w2));
    const double grad_eta = std::sqrt(std::max(0.0, neumann_form(eta, eta)));
    const double denom = std::abs(eta_mean) * l4_squared;
    e.eta_gradient_ratio = denom > 0.0 ? grad_eta / denom : 0.0;
    e.pass = e.xi_energy <= tol && e.xi_range_violation <= tol && e.eta_sign_violation <= tol;
    return e;
}

/// int (phi + Phi_N)(v+U)^2 under the closed quadrature; equals
/// q * integrate_boundary(theta) for an exact potential solve.
inline double neumann_flux_integral(const ReducedState& state, const ScalarField& U, const ScalarField& PhiN) {
    const ScalarField w = coupling_weight(state.v, U);
    return inner_product_closed(state.phi + PhiN, w);
}

}  // namespace kgmvar
