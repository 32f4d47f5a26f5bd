#pragma once

// Reduced functionals J(v) = F(v, phi_v) for the three problems (linear
// Dirichlet, linear mixed Dirichlet/Neumann, nonlinear Dirichlet) and their
// discrete gradients.
//
// Every integral uses the quadrature of the regime: interior nodes for
// Dirichlet potentials, the closed trapezoid rule for Neumann potentials.
// The discrete J is exactly the quadrature-discretized functional, so its
// raw gradient (weights included) matches central finite differences, and
// the phi-dependence drops out of the first variation because phi_v makes
// F stationary in phi.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kgmvar/domain.hpp"
#include "kgmvar/elliptic.hpp"
#include "kgmvar/params.hpp"
#include "kgmvar/reduction.hpp"

namespace kgmvar {

enum class Regime { dirichlet, mixed, nonlinear };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::dirichlet:
            return "dirichlet";
        case Regime::mixed:
            return "mixed";
        case Regime::nonlinear:
            return "nonlinear";
    }
    return "?";
}

/// g(t) = mu |t|^{p-2} t, G(t) = (mu/p) |t|^p. Autonomous power law; s and r
/// are the superquadraticity exponent and threshold it is checked against.
struct NonlinearityModel {
    double p = 4.0;
    double mu = 1.0;
    double s = 4.0;
    double r = 0.0;

    static NonlinearityModel power(double p, double mu) { return {p, mu, p, 0.0}; }

    void validate() const {
        if (!(p > 2.0 && p < 6.0)) {
            throw ConfigError("nonlinearity.p: must lie in (2, 6)");
        }
        if (!(mu > 0.0)) {
            throw ConfigError("nonlinearity.mu: must be > 0");
        }
        if (!(s > 2.0 && s <= p)) {
            throw ConfigError("nonlinearity.s: must lie in (2, p]");
        }
        if (!(r >= 0.0)) {
            throw ConfigError("nonlinearity.r: must be >= 0");
        }
    }

    [[nodiscard]] double g(double t) const { return mu * std::pow(std::abs(t), p - 2.0) * t; }
    [[nodiscard]] double G(double t) const { return mu / p * std::pow(std::abs(t), p); }
    [[nodiscard]] double dg(double t) const { return mu * (p - 1.0) * std::pow(std::abs(t), p - 2.0); }
};

inline double g_eval(const NonlinearityModel& model, double t) { return model.g(t); }
inline double G_eval(const NonlinearityModel& model, double t) { return model.G(t); }

struct ArReport {
    double superquadratic_violation = 0.0;  ///< max of s G - t g over |t| >= r (must be <= 0)
    double equality_error = 0.0;            ///< max |s G - t g| / (1 + |t g|); zero for the power law with s = p
    double growth_violation = 0.0;          ///< max of |g| - mu |t|^{p-1}
    double lower_bound_violation = 0.0;     ///< max of (mu/p)|t|^p - G  (b1 = mu/p, b2 = 0)
    double oddness_error = 0.0;             ///< max |g(-t) + g(t)|
    double small_t_ratio = 0.0;             ///< |g(t)/t| at the smallest sample, must be below its value at 1e-3
    bool pass = true;
};

/// Samples t on a symmetric log grid 1e-6 .. 1e3 and checks the growth,
/// small-origin and superquadraticity conditions for the power model.
inline ArReport verify_AR(const NonlinearityModel& model, int samples = 200) {
    ArReport rep;
    const double lo = std::log(1e-6);
    const double hi = std::log(1e3);
    for (int i = 0; i < samples; ++i) {
        const double mag = std::exp(lo + (hi - lo) * i / std::max(1, samples - 1));
        for (double t : {mag, -mag}) {
            const double g = model.g(t);
            const double G = model.G(t);
            const double scale = 1.0 + std::abs(t * g);
            if (std::abs(t) >= model.r) {
                rep.superquadratic_violation = std::max(rep.superquadratic_violation, (model.s * G - t * g) / scale);
                if (!(G > 0.0)) {
                    rep.superquadratic_violation = std::max(rep.superquadratic_violation, 1.0);
                }
            }
            rep.equality_error = std::max(rep.equality_error, std::abs(model.s * G - t * g) / scale);
            rep.growth_violation =
                std::max(rep.growth_violation, (std::abs(g) - model.mu * std::pow(std::abs(t), model.p - 1.0)) / scale);
            rep.lower_bound_violation = std::max(
                rep.lower_bound_violation, (model.mu / model.p * std::pow(std::abs(t), model.p) - G) / scale);
            rep.oddness_error = std::max(rep.oddness_error, std::abs(model.g(-t) + g));
        }
    }
    rep.small_t_ratio = std::abs(model.g(1e-6) / 1e-6);
    rep.pass = rep.superquadratic_violation <= 1e-12 && rep.growth_violation <= 1e-12 &&
               rep.lower_bound_violation <= 1e-12 && rep.oddness_error == 0.0 && rep.small_t_ratio < std::abs(model.g(1e-3) / 1e-3);
    return rep;
}

/// Everything J depends on besides v: the lifted boundary data, solved once.
class FunctionalContext {
public:
    /// Linear system with Dirichlet data on both fields.
    static FunctionalContext dirichlet(const Domain& d, const PhysicalParams& params, const BoundaryData& h,
                                       const BoundaryData& zeta, double tol = 1e-12) {
        params.validate();
        FunctionalContext ctx(d, params, Regime::dirichlet, tol);
        ctx.U_ = solve_lifting_U(d, params, h, tol);
        ctx.lift_ = solve_phi_D(d, zeta, params, tol);
        ctx.h_ = h;
        ctx.zeta_ = zeta;
        ctx.lambda1_ = smallest_eigenvalue(d).lambda;
        return ctx;
    }

    /// Linear system with Dirichlet matter data and Neumann potential data.
    /// Requires m^2 - Phi_N^2 >= 0 at every node.
    static FunctionalContext mixed(const Domain& d, const PhysicalParams& params, const BoundaryData& h,
                                   const BoundaryData& theta, double tol = 1e-12) {
        params.validate();
        FunctionalContext ctx(d, params, Regime::mixed, tol);
        ctx.U_ = solve_lifting_U(d, params, h, tol);
        NeumannLift lift = solve_phi_N(d, theta, params.q, tol);
        ctx.lift_ = std::move(lift.field);
        ctx.kappa_ = lift.kappa;
        ctx.h_ = h;
        ctx.theta_ = theta;
        const double margin = ctx.mixed_margin();
        if (margin < 0.0) {
            throw ConfigError("mixed regime: m^2 - Phi_N^2 < 0 somewhere (min " + std::to_string(margin) +
                              "); reduce |q| ||theta||");
        }
        return ctx;
    }

    /// Nonlinear system with zero matter trace and Dirichlet potential data.
    static FunctionalContext nonlinear(const Domain& d, const PhysicalParams& params, const BoundaryData& zeta,
                                       const NonlinearityModel& model, double tol = 1e-12) {
        params.validate();
        model.validate();
        FunctionalContext ctx(d, params, Regime::nonlinear, tol);
        ctx.U_ = ScalarField(d);
        ctx.lift_ = solve_phi_D(d, zeta, params, tol);
        ctx.zeta_ = zeta;
        ctx.h_ = BoundaryData::constant(d, BoundaryKind::dirichlet, 0.0);
        ctx.model_ = model;
        ctx.lambda1_ = smallest_eigenvalue(d).lambda;
        return ctx;
    }

    [[nodiscard]] Regime regime() const { return regime_; }
    [[nodiscard]] const Domain& domain() const { return domain_; }
    [[nodiscard]] const PhysicalParams& params() const { return params_; }
    [[nodiscard]] const ScalarField& U() const { return U_; }
    /// Phi_D (Dirichlet and nonlinear regimes) or Phi_N (mixed regime).
    [[nodiscard]] const ScalarField& lift() const { return lift_; }
    [[nodiscard]] double kappa() const { return kappa_; }
    [[nodiscard]] const std::optional<NonlinearityModel>& model() const { return model_; }
    [[nodiscard]] const std::optional<BoundaryData>& h() const { return h_; }
    [[nodiscard]] const std::optional<BoundaryData>& zeta() const { return zeta_; }
    [[nodiscard]] const std::optional<BoundaryData>& theta() const { return theta_; }
    /// Discrete principal Dirichlet eigenvalue (0 in the mixed regime).
    [[nodiscard]] double lambda1() const { return lambda1_; }
    [[nodiscard]] double solve_tol() const { return tol_; }
    [[nodiscard]] bool neumann_potential() const { return regime_ == Regime::mixed; }

    /// ||Phi_D||_inf over all nodes (the maximum of the boundary trace).
    [[nodiscard]] double lift_sup() const { return lift_.max_abs(); }

    /// min over nodes of m^2 - Phi_N^2.
    [[nodiscard]] double mixed_margin() const {
        double margin = std::numeric_limits<double>::infinity();
        for (double v : lift_.values()) {
            margin = std::min(margin, params_.m * params_.m - v * v);
        }
        return margin;
    }

    /// (-Lap_h + m^2) with Dirichlet conditions: the Sobolev metric used to
    /// precondition descent directions.
    [[nodiscard]] const EllipticOperator& metric() const { return metric_; }

private:
    FunctionalContext(const Domain& d, const PhysicalParams& params, Regime regime, double tol)
        : domain_(d), params_(params), regime_(regime), U_(d), lift_(d), tol_(tol),
          metric_(d, BoundaryKind::dirichlet, params.m * params.m) {}

    Domain domain_;
    PhysicalParams params_;
    Regime regime_;
    ScalarField U_;
    ScalarField lift_;
    double kappa_ = 0.0;
    double lambda1_ = 0.0;
    double tol_;
    std::optional<NonlinearityModel> model_;
    std::optional<BoundaryData> h_;
    std::optional<BoundaryData> zeta_;
    std::optional<BoundaryData> theta_;
    EllipticOperator metric_;
};

inline void require_zero_trace(const ScalarField& v, const char* where) {
    for (std::size_t flat : v.domain().boundary_nodes()) {
        if (v[flat] != 0.0) {
            throw ConfigError(std::string(where) + ": v must vanish on the boundary");
        }
    }
}

/// phi_v for the context's regime.
inline ReducedState reduce(const FunctionalContext& ctx, const ScalarField& v, const ScalarField* guess = nullptr) {
    require_same_domain(ctx.domain(), v.domain(), "reduce");
    require_zero_trace(v, "reduce");
    if (ctx.neumann_potential()) {
        return solve_phi_v_neumann(ctx.domain(), v, ctx.U(), ctx.lift(), ctx.params().q, ctx.kappa(),
                                   ctx.solve_tol(), guess);
    }
    return solve_phi_v_dirichlet(ctx.domain(), v, ctx.U(), ctx.lift(), ctx.solve_tol(), guess);
}

struct Evaluation {
    double J = 0.0;
    ScalarField gradient;  ///< raw partial derivatives dJ/dv_i (quadrature weight included)
    ReducedState state;
};

namespace detail {

inline double sum_G(const FunctionalContext& ctx, const ScalarField& v) {
    if (!ctx.model()) {
        return 0.0;
    }
    double s = 0.0;
    for (std::size_t flat : v.domain().interior_nodes()) {
        s += ctx.model()->G(v[flat]);
    }
    return s * v.domain().cell_volume();
}

/// F(v, phi) in the stationary (saddle) form; equal to the reduced formula
/// at phi = phi_v and insensitive to first-order errors in phi.
inline double saddle_value(const FunctionalContext& ctx, const ScalarField& v, const ScalarField& phi) {
    const double m2 = ctx.params().m * ctx.params().m;
    const ScalarField w = coupling_weight(v, ctx.U());
    const ScalarField full = phi + ctx.lift();
    const ScalarField coupling = transform(full, w, [](double f, double x) { return f * f * x; });
    double value = 0.5 * dirichlet_form(v, v) + 0.5 * m2 * inner_product(v, v) - sum_G(ctx, v);
    if (ctx.neumann_potential()) {
        value += -0.5 * integrate_volume_closed(coupling) - 0.5 * neumann_form(phi, phi) +
                 ctx.params().q * ctx.kappa() * integrate_volume_closed(phi);
    } else {
        value += -0.5 * integrate_volume(coupling) - 0.5 * dirichlet_form(phi, phi);
    }
    return value;
}

inline ScalarField raw_gradient(const FunctionalContext& ctx, const ScalarField& v, const ScalarField& phi) {
    const Domain& d = ctx.domain();
    const ScalarField lin = apply(ctx.metric(), v);
    ScalarField grad(d);
    const double wt = d.cell_volume();
    for (std::size_t flat : d.interior_nodes()) {
        const double f = phi[flat] + ctx.lift()[flat];
        double r = lin[flat] - f * f * (v[flat] + ctx.U()[flat]);
        if (ctx.model()) {
            r -= ctx.model()->g(v[flat]);
        }
        grad[flat] = wt * r;
    }
    return grad;
}

}  // namespace detail

inline Evaluation evaluate(const FunctionalContext& ctx, const ScalarField& v, bool with_gradient = true,
                           const ScalarField* phi_guess = nullptr) {
    ReducedState state = reduce(ctx, v, phi_guess);
    Evaluation e{detail::saddle_value(ctx, v, state.phi), ScalarField(ctx.domain()), std::move(state)};
    if (with_gradient) {
        e.gradient = detail::raw_gradient(ctx, v, e.state.phi);
    }
    return e;
}

inline double eval_J(const FunctionalContext& ctx, const ScalarField& v) { return evaluate(ctx, v, false).J; }

inline ScalarField grad_J(const FunctionalContext& ctx, const ScalarField& v) {
    return std::move(evaluate(ctx, v, true).gradient);
}

namespace detail {
inline void require_regime(const FunctionalContext& ctx, Regime r, const char* where) {
    if (ctx.regime() != r) {
        throw ConfigError(std::string(where) + ": context regime is " + to_string(ctx.regime()));
    }
}
}  // namespace detail

inline double eval_J_dirichlet(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::dirichlet, "eval_J_dirichlet");
    return eval_J(ctx, v);
}
inline ScalarField grad_J_dirichlet(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::dirichlet, "grad_J_dirichlet");
    return grad_J(ctx, v);
}
inline double eval_J_mixed(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::mixed, "eval_J_mixed");
    return eval_J(ctx, v);
}
inline ScalarField grad_J_mixed(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::mixed, "grad_J_mixed");
    return grad_J(ctx, v);
}
inline double eval_J_nonlinear(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::nonlinear, "eval_J_nonlinear");
    return eval_J(ctx, v);
}
inline ScalarField grad_J_nonlinear(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::nonlinear, "grad_J_nonlinear");
    return grad_J(ctx, v);
}

/// J written with the potential eliminated through the energy identity:
///   Dirichlet: 1/2|grad v|^2 + m^2/2|v|^2 - 1/2 int Phi (phi+Phi)(v+U)^2 - int G(v)
///   mixed:     1/2|grad v|^2 + m^2/2|v|^2 - 1/2 int Phi^2 (v+U)^2
///              - 1/2 int Phi (v+U)^2 phi + q kappa/2 int phi
/// Agrees with eval_J up to the accuracy of the phi solve.
inline double reduced_formula(const FunctionalContext& ctx, const ReducedState& state) {
    const ScalarField& v = state.v;
    const ScalarField& phi = state.phi;
    const ScalarField& lift = ctx.lift();
    const double m2 = ctx.params().m * ctx.params().m;
    const ScalarField w = coupling_weight(v, ctx.U());
    double value = 0.5 * dirichlet_form(v, v) + 0.5 * m2 * inner_product(v, v);
    if (ctx.neumann_potential()) {
        const ScalarField a = transform(lift, w, [](double f, double x) { return f * f * x; });
        const ScalarField b = transform(lift, w, [](double f, double x) { return f * x; });
        value += -0.5 * integrate_volume_closed(a) - 0.5 * inner_product_closed(b, phi) +
                 0.5 * ctx.params().q * ctx.kappa() * integrate_volume_closed(phi);
    } else {
        const ScalarField a = transform(lift, phi + lift, [](double f, double s) { return f * s; });
        value += -0.5 * inner_product(a, w) - detail::sum_G(ctx, v);
    }
    return value;
}

/// Sobolev gradient: the solution d of (-Lap_h + m^2) d = raw / h^dim with
/// zero trace.
inline ScalarField sobolev_gradient(const FunctionalContext& ctx, const ScalarField& raw) {
    ScalarField rhs = raw;
    rhs *= 1.0 / ctx.domain().cell_volume();
    CgResult res = cg_solve(ctx.metric(), rhs, 1e-12);
    require_converged(res.stats, "sobolev_gradient");
    return std::move(res.solution);
}

/// Dual (H^{-1}) norm of a raw gradient given its Sobolev representer.
inline double dual_norm(const ScalarField& raw, const ScalarField& precond) {
    double s = 0.0;
    for (std::size_t flat : raw.domain().interior_nodes()) {
        s += raw[flat] * precond[flat];
    }
    return std::sqrt(std::max(0.0, s));
}

struct CoercivityWitness {
    double J = 0.0;
    double lower_bound = 0.0;
};

/// Lower bound for the linear Dirichlet J:
///   [(l1 - max{0, S^2 - m^2}) / (2 l1)] |grad v|^2 - (S^2/2)|U|^2 - c |grad v|,
/// with S = ||Phi_D||_inf, l1 the discrete principal eigenvalue and
/// c = S^2 |U| / sqrt(l1).
inline CoercivityWitness coercivity_witness(const FunctionalContext& ctx, const ScalarField& v) {
    detail::require_regime(ctx, Regime::dirichlet, "coercivity_witness");
    const double s2 = ctx.lift_sup() * ctx.lift_sup();
    const double m2 = ctx.params().m * ctx.params().m;
    const double l1 = ctx.lambda1();
    const double grad2 = dirichlet_form(v, v);
    const double u_norm = l2_norm(ctx.U());
    const double c = s2 * u_norm / std::sqrt(l1);
    const double bound = (l1 - std::max(0.0, s2 - m2)) / (2.0 * l1) * grad2 - 0.5 * s2 * u_norm * u_norm -
                         c * std::sqrt(grad2);
    return {eval_J(ctx, v), bound};
}

/// Random zero-trace directions, smoothed by one solve of the Sobolev metric,
/// made L2-orthogonal to the (mutually orthogonal) fields in `exclude` and
/// scaled to |grad f| = 1.
inline std::vector<ScalarField> random_unit_directions(const FunctionalContext& ctx, int count, unsigned seed,
                                                       const std::vector<ScalarField>& exclude = {}) {
    const Domain& d = ctx.domain();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ScalarField> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        ScalarField noise(d);
        for (std::size_t flat : d.interior_nodes()) {
            noise[flat] = normal(rng);
        }
        CgResult res = cg_solve(ctx.metric(), noise, 1e-12);
        require_converged(res.stats, "random_unit_directions");
        ScalarField f = std::move(res.solution);
        for (const ScalarField& e : exclude) {
            f.axpy(-inner_product(f, e) / inner_product(e, e), e);
        }
        f *= 1.0 / h1_seminorm(f);
        out.push_back(std::move(f));
    }
    return out;
}

struct SphereCheck {
    double rho = 0.0;
    double min_J = 0.0;
    int directions = 0;
    bool positive = false;
};

/// min of J over rho * dirs (each dir with unit gradient norm).
inline SphereCheck sphere_positivity(const FunctionalContext& ctx, const std::vector<ScalarField>& dirs, double rho) {
    SphereCheck c{rho, std::numeric_limits<double>::infinity(), static_cast<int>(dirs.size()), false};
    for (const ScalarField& dir : dirs) {
        c.min_J = std::min(c.min_J, eval_J(ctx, rho * dir));
    }
    c.positive = c.min_J > 0.0;
    return c;
}

/// Largest sphere radius (doubling, then bisection) on which J stays
/// positive over the sampled directions. Returns positive = false when no
/// radius down to rho0 * 2^-40 works.
inline SphereCheck find_positive_sphere(const FunctionalContext& ctx, int count = 20, unsigned seed = 1,
                                        const std::vector<ScalarField>& exclude = {}, double rho0 = 1.0) {
    const std::vector<ScalarField> dirs = random_unit_directions(ctx, count, seed, exclude);
    SphereCheck best = sphere_positivity(ctx, dirs, rho0);
    double hi = 0.0;
    if (best.positive) {
        for (int i = 0; i < 20; ++i) {
            SphereCheck next = sphere_positivity(ctx, dirs, 2.0 * best.rho);
            if (!next.positive) {
                hi = next.rho;
                break;
            }
            best = next;
        }
    } else {
        hi = best.rho;
        for (int i = 0; i < 40 && !best.positive; ++i) {
            hi = best.rho;
            best = sphere_positivity(ctx, dirs, 0.5 * best.rho);
        }
        if (!best.positive) {
            return best;
        }
    }
    if (hi > 0.0) {
        for (int i = 0; i < 8; ++i) {
            SphereCheck mid = sphere_positivity(ctx, dirs, 0.5 * (best.rho + hi));
            if (mid.positive) {
                best = mid;
            } else {
                hi = mid.rho;
            }
        }
    }
    return best;
}

/// k = min{j : S^2 - m^2 < lambda_j} (1-based) for ascending eigenvalues,
/// S = ||Phi_D||_inf; 0 when no listed eigenvalue is large enough.
inline int subspace_index(double lift_sup, double m, const std::vector<double>& lambdas) {
    const double shift = lift_sup * lift_sup - m * m;
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        if (shift < lambdas[j]) {
            return static_cast<int>(j) + 1;
        }
    }
    return 0;
}

}  // namespace kgmvar
