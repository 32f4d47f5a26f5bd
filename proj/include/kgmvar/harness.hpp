#pragma once

// Scenario runners: each one turns an existence, nonexistence, continuity or
// identity statement about the system into a pass/fail verdict with the
// measured quantities attached.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "kgmvar/domain.hpp"
#include "kgmvar/elliptic.hpp"
#include "kgmvar/errors.hpp"
#include "kgmvar/functional.hpp"
#include "kgmvar/optimize.hpp"
#include "kgmvar/reduction.hpp"
#include "kgmvar/spectrum.hpp"

namespace kgmvar {

/// ||u||_2 above this (with a certified residual) counts as nontrivial.
inline constexpr double nontrivial_threshold = 1e-3;
/// ||u||_2 at or below this counts as trivial.
inline constexpr double trivial_threshold = 1e-6;
/// Residual bound for a certified solution.
inline constexpr double certificate_tol = 1e-6;

struct Verdict {
    std::string name;
    std::string statement;
    bool pass = false;
    bool informational = false;  ///< reported only, never fails a suite
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> notes;

    void metric(const std::string& key, double value) { metrics.emplace_back(key, value); }

    [[nodiscard]] std::optional<double> get(const std::string& key) const {
        for (const auto& [k, v] : metrics) {
            if (k == key) {
                return v;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] bool counts_as_pass() const { return pass || informational; }
};

/// Residuals, boundary errors and potential bounds for one solution.
struct Certificate {
    SystemResidual residual;
    double bc_matter = 0.0;     ///< max |u - sqrt(4 pi) q h| on the boundary
    double bc_potential = 0.0;  ///< max |phi_q - (q zeta - omega)| (Dirichlet potential only)
    double phi_sup = 0.0;       ///< ||phi_v||_inf
    double lift_sup = 0.0;      ///< ||Phi||_inf
    double bound_violation = 0.0;
    double energy_identity = 0.0;  ///< relative residual (Dirichlet potential only)
    double flux_balance_error = 0.0;  ///< relative (absolute when the flux vanishes), mixed only
    bool certified = false;
};

inline Certificate certify(const FunctionalContext& ctx, const CriticalPoint& cp, double tol = certificate_tol) {
    const Domain& d = ctx.domain();
    Certificate c;
    c.residual = cp.residual ? *cp.residual : system_residual(ctx, cp.v, cp.phi);
    const ScalarField u = cp.v + ctx.U();
    const double scale = sqrt_4pi * ctx.params().q;
    if (ctx.h()) {
        for (std::size_t i = 0; i < d.boundary_count(); ++i) {
            const std::size_t flat = d.boundary_nodes()[i];
            c.bc_matter = std::max(c.bc_matter, std::abs(u[flat] - scale * (*ctx.h())[i]));
        }
    }
    c.phi_sup = cp.phi.max_abs();
    c.lift_sup = ctx.lift().max_abs();
    const ReducedState state{cp.v, cp.phi, ctx.neumann_potential() ? PotentialRegime::neumann
                                                                   : PotentialRegime::dirichlet,
                             std::nullopt, {}};
    if (ctx.neumann_potential()) {
        const double rhs = ctx.params().q * integrate_boundary(*ctx.theta(), d);
        const double lhs = neumann_flux_integral(state, ctx.U(), ctx.lift());
        c.flux_balance_error = std::abs(lhs - rhs) / (rhs != 0.0 ? std::abs(rhs) : 1.0);
        try {
            const XiEta split = split_xi_eta(d, cp.v, ctx.U(), ctx.lift(), ctx.params().q, ctx.kappa());
            const NeumannEstimates est = verify_neumann_estimates(split.xi, split.eta, cp.v, ctx.U(), ctx.lift(),
                                                                  ctx.params().q, ctx.kappa());
            c.bound_violation = std::max({std::max(0.0, est.xi_energy), est.xi_range_violation,
                                          est.eta_sign_violation});
        } catch (const DegenerateOperatorError&) {
            c.bound_violation = 0.0;
        }
        c.certified = c.residual.total <= tol && c.flux_balance_error <= tol;
    } else {
        for (std::size_t i = 0; i < d.boundary_count(); ++i) {
            const std::size_t flat = d.boundary_nodes()[i];
            const double target = ctx.params().q * (*ctx.zeta())[i] - ctx.params().omega;
            c.bc_potential = std::max(c.bc_potential, std::abs(cp.phi[flat] + ctx.lift()[flat] - target));
        }
        const PhiBoundsReport b = verify_phi_bounds(state, ctx.lift());
        c.bound_violation = std::max(b.minmax_violation, b.sup_violation);
        c.energy_identity = verify_energy_identity(state, ctx.U(), ctx.lift());
        c.certified = c.residual.total <= tol && c.bc_matter <= tol && c.bc_potential <= tol;
    }
    return c;
}

inline void add_certificate(Verdict& v, const Certificate& c, const std::string& prefix = "") {
    v.metric(prefix + "residual_matter", c.residual.matter);
    v.metric(prefix + "residual_potential", c.residual.potential);
    v.metric(prefix + "residual", c.residual.total);
    v.metric(prefix + "bc_matter", c.bc_matter);
    v.metric(prefix + "bc_potential", c.bc_potential);
    v.metric(prefix + "phi_sup", c.phi_sup);
    v.metric(prefix + "lift_sup", c.lift_sup);
    v.metric(prefix + "bound_violation", c.bound_violation);
    v.metric(prefix + "energy_identity", c.energy_identity);
    v.metric(prefix + "flux_balance_error", c.flux_balance_error);
}

/// ||grad v||^2 + int phi^2 v^2 + 2 ||grad phi||^2 + int (m^2 - Phi_D^2) v^2,
/// which vanishes for every solution with zero matter trace.
inline double nonexistence_identity(const FunctionalContext& ctx, const ScalarField& v, const ScalarField& phi) {
    const double m2 = ctx.params().m * ctx.params().m;
    const ScalarField pv = transform(phi, v, [](double p, double x) { return p * p * x * x; });
    const ScalarField mv =
        transform(ctx.lift(), v, [m2](double P, double x) { return (m2 - P * P) * x * x; });
    return dirichlet_form(v, v) + integrate_volume(pv) + 2.0 * dirichlet_form(phi, phi) + integrate_volume(mv);
}

/// Interior values uniform in [-amp, amp], zero trace.
inline ScalarField random_field(const Domain& d, std::mt19937_64& rng, double amp = 1.0) {
    std::uniform_real_distribution<double> unif(-amp, amp);
    ScalarField f(d);
    for (std::size_t flat : d.interior_nodes()) {
        f[flat] = unif(rng);
    }
    return f;
}

inline bool is_zero(const BoundaryData& g) { return g.max_abs() == 0.0; }

/// Shortest round-trip text for a parameter value, used in metric names.
inline std::string short_label(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// Linear Dirichlet dichotomy: a nontrivial certified solution when h != 0;
/// collapse to v = 0 from 5 random starts when h = 0.
inline Verdict run_th1(const Domain& d, const PhysicalParams& params, const BoundaryData& h, const BoundaryData& zeta,
                       unsigned seed = 0, const DescentConfig& cfg = {}) {
    const FunctionalContext ctx = FunctionalContext::dirichlet(d, params, h, zeta);
    const HypCheck hyp = check_hyp(params, zeta, ctx.lambda1());
    if (!hyp.holds) {
        throw HypothesisError("spectral smallness condition fails (margin " + std::to_string(hyp.margin) + ")");
    }
    Verdict v;
    v.metric("lambda1", ctx.lambda1());
    v.metric("hyp_margin", hyp.margin);
    if (!is_zero(h)) {
        v.name = "dirichlet-existence";
        v.statement = "h != 0: the linear Dirichlet system has a nontrivial solution";
        const CriticalPoint cp = solve_linear(ctx, ScalarField(d), cfg);
        const Certificate c = certify(ctx, cp);
        const double u_norm = l2_norm(cp.v + ctx.U());
        v.metric("J", cp.J);
        v.metric("u_norm", u_norm);
        v.metric("grad_norm", cp.grad_norm);
        v.metric("descent_iterations", cp.iterations);
        v.metric("local_min_decrease", local_minimality_probe(ctx, cp.v));
        const CoercivityWitness w = coercivity_witness(ctx, cp.v);
        v.metric("coercivity_gap", w.J - w.lower_bound);
        add_certificate(v, c);
        v.notes.insert(v.notes.end(), cp.warnings.begin(), cp.warnings.end());
        v.pass = c.certified && u_norm > nontrivial_threshold && c.bound_violation <= 1e-8;
        return v;
    }
    v.name = "dirichlet-nonexistence";
    v.statement = "h = 0: the linear Dirichlet system has only the trivial solution";
    std::mt19937_64 rng(seed);
    double worst_norm = 0.0;
    double worst_identity = 0.0;
    double worst_bound = 0.0;
    bool all_converged = true;
    for (int start = 0; start < 5; ++start) {
        const CriticalPoint cp = minimize(ctx, random_field(d, rng), cfg);
        all_converged = all_converged && cp.converged;
        worst_norm = std::max(worst_norm, l2_norm(cp.v));
        worst_identity = std::max(worst_identity, std::abs(nonexistence_identity(ctx, cp.v, cp.phi)));
        worst_bound = std::max(worst_bound, certify(ctx, cp).bound_violation);
    }
    v.metric("starts", 5);
    v.metric("max_v_norm", worst_norm);
    v.metric("max_identity", worst_identity);
    v.metric("bound_violation", worst_bound);
    v.pass = all_converged && worst_norm <= trivial_threshold && worst_identity <= 1e-8 && worst_bound <= 1e-8;
    return v;
}

/// Residuals of the original (untransformed) system at a certified
/// Dirichlet solution mapped back through u = u_q / (sqrt(4 pi) q),
/// phi = (phi_q + omega) / q:
///   -Lap u - (q phi - omega)^2 u + m^2 u = 0,  -Lap phi + 4 pi q (q phi - omega) u^2 = 0.
struct OriginalSystemCheck {
    double residual = 0.0;
    double bc_u = 0.0;
    double bc_phi = 0.0;
    ScalarField u;
    ScalarField phi;
};

inline OriginalSystemCheck original_system_check(const FunctionalContext& ctx, const CriticalPoint& cp) {
    const Domain& d = ctx.domain();
    const double q = ctx.params().q;
    const double omega = ctx.params().omega;
    const double m2 = ctx.params().m * ctx.params().m;
    const ScalarField u = (1.0 / (sqrt_4pi * q)) * (cp.v + ctx.U());
    ScalarField phi = cp.phi + ctx.lift();
    for (double& x : phi.values()) {
        x = (x + omega) / q;
    }
    const EllipticOperator lap(d, BoundaryKind::dirichlet, 0.0);
    const ScalarField lu = apply(lap, u);
    const ScalarField lp = apply(lap, phi);
    double s = 0.0;
    for (std::size_t flat : d.interior_nodes()) {
        const double pq = q * phi[flat] - omega;
        const double r1 = lu[flat] - pq * pq * u[flat] + m2 * u[flat];
        const double r2 = lp[flat] + 4.0 * std::numbers::pi * q * pq * u[flat] * u[flat];
        s += r1 * r1 + r2 * r2;
    }
    OriginalSystemCheck out{std::sqrt(s * d.cell_volume()), 0.0, 0.0, u, phi};
    for (std::size_t i = 0; i < d.boundary_count(); ++i) {
        const std::size_t flat = d.boundary_nodes()[i];
        out.bc_u = std::max(out.bc_u, std::abs(u[flat] - (*ctx.h())[i]));
        out.bc_phi = std::max(out.bc_phi, std::abs(phi[flat] - (*ctx.zeta())[i]));
    }
    return out;
}

/// Solves the transformed Dirichlet problem and checks the mapped-back
/// fields against the original system, plus two data-invariance checks:
/// (2q, h/2, zeta/2) and (omega + delta, zeta + delta/q) give the same
/// transformed fields.
inline Verdict run_change_of_variables(const Domain& d, const PhysicalParams& params, const BoundaryData& h,
                                       const BoundaryData& zeta, const DescentConfig& cfg = {}) {
    if (params.q == 0.0) {
        throw ConfigError("change of variables: q must be nonzero");
    }
    Verdict v;
    v.name = "change-of-variables";
    v.statement = "mapped-back fields solve the original system with the original boundary data";
    const FunctionalContext ctx = FunctionalContext::dirichlet(d, params, h, zeta);
    const CriticalPoint cp = solve_linear(ctx, ScalarField(d), cfg);
    const Certificate c = certify(ctx, cp);
    const OriginalSystemCheck orig = original_system_check(ctx, cp);
    add_certificate(v, c);
    v.metric("original_residual", orig.residual);
    v.metric("original_bc_u", orig.bc_u);
    v.metric("original_bc_phi", orig.bc_phi);

    auto transformed_difference = [&](const PhysicalParams& p2, const BoundaryData& h2, const BoundaryData& z2) {
        const FunctionalContext c2 = FunctionalContext::dirichlet(d, p2, h2, z2);
        const CriticalPoint s2 = solve_linear(c2, ScalarField(d), cfg);
        const ScalarField du = (cp.v + ctx.U()) - (s2.v + c2.U());
        const ScalarField dp = (cp.phi + ctx.lift()) - (s2.phi + c2.lift());
        const double scale = std::max(1.0, (cp.v + ctx.U()).max_abs());
        return std::max(du.max_abs(), dp.max_abs()) / scale;
    };
    const double rescaled = transformed_difference({params.m, params.omega, 2.0 * params.q}, h.affine(0.5, 0.0),
                                                   zeta.affine(0.5, 0.0));
    const double delta = 0.1;
    const double shifted =
        transformed_difference({params.m, params.omega + delta, params.q}, h, zeta.affine(1.0, delta / params.q));
    v.metric("rescaled_q_difference", rescaled);
    v.metric("shifted_omega_difference", shifted);
    v.pass = c.certified && orig.residual <= certificate_tol && orig.bc_u <= 1e-12 && orig.bc_phi <= 1e-10 &&
             rescaled <= 1e-9 && shifted <= 1e-9;
    return v;
}

/// Continuity as q -> 0 with Dirichlet data: ||u_q - u_0||_2 along a
/// decreasing q sequence, u_0 solving -Lap u - (omega^2 - m^2) u = 0, u = h.
inline Verdict run_q_limit_dirichlet(const Domain& d, double m, double omega, const BoundaryData& h,
                                     const BoundaryData& zeta, const std::vector<double>& qs = {0.4, 0.2, 0.1, 0.05},
                                     const DescentConfig& cfg = {}) {
    Verdict v;
    v.name = "q-limit-dirichlet";
    v.statement = "with Dirichlet data the solution depends continuously on q as q -> 0";
    const double shift = m * m - omega * omega;
    const std::vector<EigenPair> low = dirichlet_eigenpairs(d, std::min<int>(6, static_cast<int>(d.interior_count())));
    if (!(omega * omega < m * m + low.front().lambda)) {
        throw HypothesisError("q-limit: omega^2 >= m^2 + lambda1");
    }
    for (const EigenPair& e : low) {
        if (std::abs(-shift - e.lambda) <= 1e-6) {
            throw HypothesisError("q-limit: omega^2 - m^2 is within 1e-6 of a discrete eigenvalue");
        }
    }
    const EllipticOperator op0(d, BoundaryKind::dirichlet, shift);
    CgResult u0 = solve_dirichlet_lift(op0, h);
    require_converged(u0.stats, "q-limit u0");
    const EllipticOperator lap(d, BoundaryKind::dirichlet, 0.0);
    CgResult phi0 = solve_dirichlet_lift(lap, zeta);
    require_converged(phi0.stats, "q-limit phi0");
    v.metric("lambda1", low.front().lambda);
    v.metric("u0_norm", l2_norm(u0.solution));

    std::vector<double> errors;
    double worst_residual = 0.0;
    for (double q : qs) {
        const PhysicalParams p{m, omega, q};
        const FunctionalContext ctx = FunctionalContext::dirichlet(d, p, h, zeta);
        if (!check_hyp(p, zeta, ctx.lambda1()).holds) {
            throw HypothesisError("q-limit: spectral smallness fails at q = " + std::to_string(q));
        }
        const CriticalPoint cp = solve_linear(ctx, ScalarField(d), cfg);
        const OriginalSystemCheck orig = original_system_check(ctx, cp);
        worst_residual = std::max(worst_residual, certify(ctx, cp).residual.total);
        const double err = l2_norm(orig.u - u0.solution);
        errors.push_back(err);
        v.metric("error_q=" + short_label(q), err);
        v.metric("phi_error_q=" + short_label(q), l2_norm(orig.phi - phi0.solution));
    }
    bool monotone = true;
    double worst_ratio = 0.0;
    for (std::size_t i = 1; i < errors.size(); ++i) {
        const double ratio = errors[i] / errors[i - 1];
        worst_ratio = std::max(worst_ratio, ratio);
        monotone = monotone && errors[i] < errors[i - 1];
    }
    v.metric("max_ratio", worst_ratio);
    v.metric("max_residual", worst_residual);
    v.pass = monotone && worst_ratio <= 0.7 && worst_residual <= certificate_tol;
    return v;
}

/// Mixed Dirichlet/Neumann trichotomy. Returns one verdict per applicable
/// sub-case.
inline std::vector<Verdict> run_thmix(const Domain& d, const PhysicalParams& params, const BoundaryData& h,
                                      const BoundaryData& theta, unsigned seed = 0, const DescentConfig& cfg = {}) {
    const FunctionalContext ctx = FunctionalContext::mixed(d, params, h, theta);
    const double flux = integrate_boundary(theta, d);
    const double perimeter = integrate_boundary(theta.affine(0.0, 1.0), d);
    const bool zero_flux = std::abs(flux) <= 1e-12 * std::max(1.0, theta.max_abs() * perimeter);
    std::vector<Verdict> out;
    auto base = [&](Verdict& v) {
        v.metric("phi_margin", ctx.mixed_margin());
        v.metric("boundary_flux", flux);
        v.metric("kappa", ctx.kappa());
    };
    if (!is_zero(h)) {
        Verdict v;
        v.name = "mixed-existence";
        v.statement = "h != 0 and small |q| ||theta||: the mixed system has a nontrivial solution";
        base(v);
        const CriticalPoint cp = solve_linear(ctx, ScalarField(d), cfg);
        const Certificate c = certify(ctx, cp);
        const double u_norm = l2_norm(cp.v + ctx.U());
        v.metric("J", cp.J);
        v.metric("u_norm", u_norm);
        add_certificate(v, c);
        v.notes.insert(v.notes.end(), cp.warnings.begin(), cp.warnings.end());
        v.pass = c.certified && u_norm > nontrivial_threshold && c.flux_balance_error <= certificate_tol;
        out.push_back(std::move(v));
        return out;
    }
    if (zero_flux) {
        Verdict v;
        v.name = "mixed-trivial";
        v.statement = "h = 0 and zero boundary flux: only the trivial matter field";
        base(v);
        // seed v = 0 is the trivial state itself; random starts must collapse
        DescentConfig c2 = cfg;
        c2.trivial_tol = 0.1 * trivial_threshold;
        std::mt19937_64 rng(seed);
        double worst = 0.0;
        bool converged = true;
        for (int start = 0; start < 3; ++start) {
            const CriticalPoint cp = minimize(ctx, random_field(d, rng), c2);
            converged = converged && cp.converged;
            worst = std::max(worst, l2_norm(cp.v + ctx.U()));
        }
        // the trivial family: u = 0 and phi_q = Phi_N solves the flux-only problem
        const ScalarField zero(d);
        const auto [r1, r2] = detail::nodal_residuals(ctx, zero, zero);
        double s = 0.0;
        for (std::size_t flat = 0; flat < d.node_count(); ++flat) {
            s += d.closed_weight(flat) * r2[flat] * r2[flat];
        }
        v.metric("max_u_norm", worst);
        v.metric("trivial_potential_residual", std::sqrt(s));
        v.pass = converged && worst <= trivial_threshold && std::sqrt(s) <= certificate_tol;
        out.push_back(std::move(v));
        return out;
    }
    Verdict v;
    v.name = "mixed-flux-only";
    v.statement = "h = 0 with nonzero boundary flux: solvability reported, not asserted";
    v.informational = true;
    base(v);
    try {
        std::mt19937_64 rng(seed);
        const CriticalPoint cp = solve_linear(ctx, random_field(d, rng), cfg);
        const Certificate c = certify(ctx, cp);
        v.metric("u_norm", l2_norm(cp.v + ctx.U()));
        add_certificate(v, c);
        v.pass = c.certified;
        v.notes.push_back(c.certified ? "certified solution found" : "no certified solution found");
    } catch (const SolverError& e) {
        v.notes.push_back(std::string("solver error: ") + e.what());
    }
    out.push_back(std::move(v));
    return out;
}

/// Discontinuity as q -> 0 with Neumann data: a certified solution for
/// q != 0, while the q = 0 potential problem fails compatibility by the
/// measured boundary flux.
inline Verdict run_q_limit_neumann(const Domain& d, double m, double omega, const BoundaryData& h,
                                   const BoundaryData& theta, double q = 0.05, const DescentConfig& cfg = {}) {
    const double flux = integrate_boundary(theta, d);
    if (std::abs(flux) <= 1e-12) {
        throw HypothesisError("q-limit (Neumann): zero boundary flux, the q = 0 problem is solvable");
    }
    Verdict v;
    v.name = "q-limit-neumann";
    v.statement = "with Neumann data solvability is not continuous as q -> 0";
    const FunctionalContext ctx = FunctionalContext::mixed(d, {m, omega, q}, h, theta);
    const CriticalPoint cp = solve_linear(ctx, ScalarField(d), cfg);
    const Certificate c = certify(ctx, cp);
    add_certificate(v, c);
    // q = 0: -L_N phi = flux(theta) is solvable iff the weighted source sums to 0
    const ScalarField source = neumann_flux_source(d, theta, 1.0);
    const double incompatibility = integrate_volume_closed(source);
    v.metric("q", q);
    v.metric("u_norm", l2_norm(cp.v + ctx.U()));
    v.metric("incompatibility", incompatibility);
    v.metric("boundary_flux", flux);
    v.metric("incompatibility_mismatch", std::abs(incompatibility - flux));
    v.pass = c.certified && std::abs(incompatibility) > 1e-8 &&
             std::abs(incompatibility - flux) <= 1e-12 * std::max(1.0, std::abs(flux));
    return v;
}

/// theta = 0 (Neumann) and Phi_D = 0 (Dirichlet, zeta = omega / q) with the
/// same (m, h) must give the same matter field.
inline Verdict run_cross_regime(const Domain& d, double m, double q, const BoundaryData& h,
                                const DescentConfig& cfg = {}) {
    Verdict v;
    v.name = "cross-regime";
    v.statement = "zero Neumann data and zero Dirichlet potential give the same matter field";
    const FunctionalContext dir = FunctionalContext::dirichlet(d, {m, 0.0, q}, h,
                                                               BoundaryData::constant(d, BoundaryKind::dirichlet, 0.0));
    const FunctionalContext mix =
        FunctionalContext::mixed(d, {m, 0.0, q}, h, BoundaryData::constant(d, BoundaryKind::neumann, 0.0));
    const CriticalPoint a = solve_linear(dir, ScalarField(d), cfg);
    const CriticalPoint b = solve_linear(mix, ScalarField(d), cfg);
    const double diff = l2_norm((a.v + dir.U()) - (b.v + mix.U()));
    v.metric("u_difference", diff);
    v.metric("J_dirichlet", a.J);
    v.metric("J_mixed", b.J);
    v.pass = diff <= 1e-6 && certify(dir, a).certified && certify(mix, b).certified;
    return v;
}

/// Nonlinear problem: one mountain-pass solution, then the two-point
/// multiplicity probe. Returns two verdicts.
inline std::vector<Verdict> run_thnonlin(const Domain& d, const PhysicalParams& params, const BoundaryData& zeta,
                                         const NonlinearityModel& model, const MountainPassConfig& cfg = {}) {
    const FunctionalContext ctx = FunctionalContext::nonlinear(d, params, zeta, model);
    const HypCheck hyp = check_hyp(params, zeta, ctx.lambda1());
    if (!hyp.holds) {
        throw HypothesisError("spectral smallness condition fails (margin " + std::to_string(hyp.margin) + ")");
    }
    std::vector<Verdict> out;
    const double S = ctx.lift_sup();
    const double m2 = params.m * params.m;
    const double c1 = 0.5 + (m2 + S * S) / (2.0 * ctx.lambda1());

    Verdict one;
    one.name = "nonlinear-existence";
    one.statement = "the nonlinear system has a nontrivial mountain-pass solution";
    one.metric("hyp_margin", hyp.margin);
    const ArReport ar = verify_AR(model);
    one.metric("ar_violation", std::max({ar.superquadratic_violation, ar.growth_violation,
                                         ar.lower_bound_violation}));
    const ScalarField e1 = box_mode_field(d, box_modes(d, 1).front());
    const ScalarField endpoint = find_negative_endpoint(ctx, e1, cfg);
    CriticalPoint cp = mountain_pass(ctx, endpoint, cfg);
    one.metric("mp_grad_norm", cp.grad_norm);
    one.metric("mp_sweeps", cp.iterations);
    cp = newton_refine(ctx, std::move(cp));
    const Certificate c = certify(ctx, cp);
    const SphereCheck sphere = find_positive_sphere(ctx);
    one.metric("J", cp.J);
    one.metric("v_norm", l2_norm(cp.v));
    one.metric("grad_v", h1_seminorm(cp.v));
    one.metric("sphere_rho", sphere.rho);
    one.metric("sphere_min_J", sphere.min_J);
    one.metric("evenness_error", std::abs(eval_J(ctx, -1.0 * cp.v) - cp.J) / std::max(1.0, std::abs(cp.J)));
    add_certificate(one, c);
    one.notes.insert(one.notes.end(), cp.warnings.begin(), cp.warnings.end());
    one.pass = cp.converged && c.residual.total <= 1e-8 && cp.J > 0.0 && l2_norm(cp.v) > nontrivial_threshold &&
               sphere.positive && cp.J >= sphere.min_J && ar.pass && c.bound_violation <= 1e-8;
    out.push_back(std::move(one));

    Verdict two;
    two.name = "nonlinear-multiplicity";
    two.statement = "odd nonlinearity: distinct solutions with increasing energy and bounded potentials";
    const MultiplicityResult probe = multiplicity_probe(ctx, cfg);
    two.metric("points", static_cast<double>(probe.points.size()));
    bool ok = probe.points.size() >= 2;
    double worst_phi = 0.0;
    double worst_upper = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < probe.points.size(); ++i) {
        const CriticalPoint& p = probe.points[i];
        const std::string tag = "p" + std::to_string(i + 1) + "_";
        const double grad2 = dirichlet_form(p.v, p.v);
        two.metric(tag + "J", p.J);
        two.metric(tag + "grad_v", std::sqrt(grad2));
        two.metric(tag + "residual", p.residual ? p.residual->total : -1.0);
        two.metric(tag + "phi_sup", p.phi.max_abs());
        worst_phi = std::max(worst_phi, p.phi.max_abs() - S);
        worst_upper = std::max(worst_upper, p.J - c1 * grad2);
        ok = ok && p.certified(1e-8);
    }
    if (probe.points.size() >= 2) {
        const CriticalPoint& a = probe.points[0];
        const CriticalPoint& b = probe.points[1];
        ok = ok && b.J > a.J && h1_seminorm(b.v) > h1_seminorm(a.v);
        two.metric("orbit_distance", orbit_distance(a.v, b.v));
    }
    two.metric("lift_sup", S);
    two.metric("phi_bound_excess", worst_phi);
    two.metric("upper_bound_c1", c1);
    two.metric("upper_bound_excess", worst_upper);
    two.notes = probe.warnings;
    two.pass = ok && worst_phi <= 1e-8 && worst_upper <= 0.0;
    out.push_back(std::move(two));
    return out;
}

struct Scenario {
    std::string name;
    std::string set;  ///< th1 | mix | qlimit | nonlin
    std::function<std::vector<Verdict>()> run;
};

inline std::vector<std::string> scenario_sets() { return {"th1", "mix", "qlimit", "nonlin"}; }

/// The standard scenarios on the unit square with `grid` interior nodes per
/// axis.
inline std::vector<Scenario> default_scenarios(const std::string& set, int grid = 31, unsigned seed = 0) {
    const std::vector<std::string> known = scenario_sets();
    if (set != "all" && std::find(known.begin(), known.end(), set) == known.end()) {
        throw ConfigError("unknown scenario set '" + set + "' (expected th1, mix, nonlin, qlimit or all)");
    }
    const Domain d(2, {1.0, 1.0}, {grid, grid});
    auto dir = [d](double c) { return BoundaryData::constant(d, BoundaryKind::dirichlet, c); };
    auto neu = [d](double c) { return BoundaryData::constant(d, BoundaryKind::neumann, c); };
    const PhysicalParams base{1.0, 0.5, 0.1};
    auto one = [](Verdict v) { return std::vector<Verdict>{std::move(v)}; };
    std::vector<Scenario> all = {
        {"dirichlet-existence", "th1", [=] { return one(run_th1(d, base, dir(1.0), dir(1.0), seed)); }},
        {"dirichlet-nonexistence", "th1", [=] { return one(run_th1(d, base, dir(0.0), dir(1.0), seed)); }},
        {"dirichlet-homogeneous", "th1",
         [=] {
             Verdict v = run_th1(d, {1.0, 0.0, 0.1}, dir(0.0), dir(0.0), seed);
             v.name = "dirichlet-homogeneous";
             return one(std::move(v));
         }},
        {"change-of-variables", "th1", [=] { return one(run_change_of_variables(d, base, dir(1.0), dir(1.0))); }},
        {"cross-regime", "th1", [=] { return one(run_cross_regime(d, 1.0, 0.1, dir(1.0))); }},
        {"mixed-existence", "mix", [=] { return run_thmix(d, {1.0, 0.5, 0.05}, dir(1.0), neu(0.1), seed); }},
        {"mixed-trivial", "mix",
         [=] {
             const BoundaryData odd =
                 BoundaryData::sample(d, BoundaryKind::neumann, [](const Point& x) { return x[0] - 0.5; });
             return run_thmix(d, {1.0, 0.5, 0.05}, dir(0.0), odd, seed);
         }},
        {"mixed-flux-only", "mix", [=] { return run_thmix(d, {1.0, 0.5, 0.05}, dir(0.0), neu(1.0), seed); }},
        {"q-limit-dirichlet", "qlimit", [=] { return one(run_q_limit_dirichlet(d, 1.0, 0.5, dir(1.0), dir(1.0))); }},
        {"q-limit-neumann", "qlimit", [=] { return one(run_q_limit_neumann(d, 1.0, 0.5, dir(1.0), neu(1.0))); }},
        {"nonlinear", "nonlin",
         [=] { return run_thnonlin(d, base, dir(1.0), NonlinearityModel::power(4.0, 1.0)); }},
    };
    if (set == "all") {
        return all;
    }
    std::vector<Scenario> out;
    for (Scenario& s : all) {
        if (s.set == set) {
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Runs scenarios on up to `threads` workers; verdicts keep scenario order.
/// Errors become failing verdicts carrying the message.
inline std::vector<Verdict> run_scenarios(const std::vector<Scenario>& scenarios, int threads = 1) {
    std::vector<std::vector<Verdict>> results(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            try {
                results[i] = scenarios[i].run();
            } catch (const Error& e) {
                Verdict v;
                v.name = scenarios[i].name;
                v.statement = "scenario raised an error";
                v.notes.push_back(e.what());
                results[i] = {std::move(v)};
            }
        }
    };
    const int n = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(1, scenarios.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (std::thread& t : pool) {
        t.join();
    }
    std::vector<Verdict> out;
    for (auto& r : results) {
        for (Verdict& v : r) {
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace kgmvar
