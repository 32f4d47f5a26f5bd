#pragma once

// Critical points of the reduced functionals: Sobolev-preconditioned descent
// for the coercive linear problems, a discrete-path mountain pass for the
// nonlinear one, damped Newton refinement of the full coupled system and a
// two-point multiplicity probe for odd nonlinearities.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kgmvar/domain.hpp"
#include "kgmvar/elliptic.hpp"
#include "kgmvar/errors.hpp"
#include "kgmvar/functional.hpp"
#include "kgmvar/sparse.hpp"
#include "kgmvar/spectrum.hpp"

namespace kgmvar {

struct DescentConfig {
    double grad_tol = 1e-9;
    int max_iters = 500;
    double armijo_slope = 1e-4;
    double backtrack_factor = 0.5;
    double initial_step = 1.0;
    /// Stop as soon as ||v||_2 drops to this value (0 disables). Needed when
    /// the iterate approaches a point where the potential sub-problem
    /// degenerates.
    double trivial_tol = 0.0;

    void validate() const {
        if (!(grad_tol > 0.0) || max_iters <= 0 || !(initial_step > 0.0)) {
            throw ConfigError("descent: grad_tol, max_iters and initial_step must be positive");
        }
        if (!(armijo_slope > 0.0 && armijo_slope < 1.0)) {
            throw ConfigError("descent.armijo_slope: must lie in (0, 1)");
        }
        if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
            throw ConfigError("descent.backtrack_factor: must lie in (0, 1)");
        }
        if (!(trivial_tol >= 0.0)) {
            throw ConfigError("descent.trivial_tol: must be >= 0");
        }
    }
};

struct MountainPassConfig {
    int path_points = 21;
    double deform_tol = 1e-5;
    int max_deforms = 600;
    double endpoint_scale_start = 0.1;
    double armijo_slope = 1e-4;
    double backtrack_factor = 0.5;

    void validate() const {
        if (path_points < 3) {
            throw ConfigError("mountain_pass.path_points: must be >= 3");
        }
        if (!(deform_tol > 0.0) || max_deforms <= 0 || !(endpoint_scale_start > 0.0)) {
            throw ConfigError("mountain_pass: deform_tol, max_deforms and endpoint_scale_start must be positive");
        }
        if (!(armijo_slope > 0.0 && armijo_slope < 1.0) || !(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
            throw ConfigError("mountain_pass: armijo_slope and backtrack_factor must lie in (0, 1)");
        }
    }
};

enum class PointKind { minimizer, mountain_pass };

inline const char* to_string(PointKind k) { return k == PointKind::minimizer ? "minimizer" : "mountain-pass"; }

struct SystemResidual {
    double matter = 0.0;     ///< weighted l2 norm of the matter equation
    double potential = 0.0;  ///< weighted l2 norm of the potential equation
    double total = 0.0;
};

struct CriticalPoint {
    explicit CriticalPoint(const Domain& d) : v(d), phi(d) {}

    ScalarField v;
    ScalarField phi;
    double J = 0.0;
    double grad_norm = 0.0;  ///< dual norm sqrt(<raw, P^{-1} raw / w>)
    PointKind kind = PointKind::minimizer;
    int iterations = 0;
    bool converged = false;
    int newton_iterations = 0;
    std::optional<SystemResidual> residual;  ///< set once certified
    std::vector<double> J_history;
    std::vector<std::string> warnings;

    [[nodiscard]] bool certified(double tol = 1e-6) const { return residual && residual->total <= tol; }
};

namespace detail {

struct SystemFields {
    ScalarField u;      ///< v + U
    ScalarField phi_q;  ///< phi + lift
};

inline SystemFields system_fields(const FunctionalContext& ctx, const ScalarField& v, const ScalarField& phi) {
    return {v + ctx.U(), phi + ctx.lift()};
}

/// Nodal residuals of the coupled system:
///   R1 = -Lap u + m^2 u - phi_q^2 u - g(v)   (interior nodes)
///   R2 = -Lap phi_q + u^2 phi_q              (Dirichlet: interior nodes)
///   R2 = -L_N phi_q + u^2 phi_q - q flux(theta)   (Neumann: all nodes)
inline std::pair<ScalarField, ScalarField> nodal_residuals(const FunctionalContext& ctx, const ScalarField& v,
                                                           const ScalarField& phi) {
    const Domain& d = ctx.domain();
    const SystemFields f = system_fields(ctx, v, phi);
    ScalarField r1 = apply(ctx.metric(), f.u);
    for (std::size_t flat : d.interior_nodes()) {
        const double pq = f.phi_q[flat];
        r1[flat] -= pq * pq * f.u[flat];
        if (ctx.model()) {
            r1[flat] -= ctx.model()->g(v[flat]);
        }
    }
    const BoundaryKind bc = ctx.neumann_potential() ? BoundaryKind::neumann : BoundaryKind::dirichlet;
    const EllipticOperator pot(d, bc, coupling_weight(v, ctx.U()));
    ScalarField r2 = apply(pot, f.phi_q);
    if (ctx.neumann_potential()) {
        r2 -= neumann_flux_source(d, *ctx.theta(), ctx.params().q);
    }
    return {std::move(r1), std::move(r2)};
}

}  // namespace detail

/// Weighted l2 residual of both equations at (v, phi), phi being the
/// homogeneous part of the potential.
inline SystemResidual system_residual(const FunctionalContext& ctx, const ScalarField& v, const ScalarField& phi) {
    const Domain& d = ctx.domain();
    const auto [r1, r2] = detail::nodal_residuals(ctx, v, phi);
    SystemResidual r;
    double s1 = 0.0;
    for (std::size_t flat : d.interior_nodes()) {
        s1 += r1[flat] * r1[flat];
    }
    r.matter = std::sqrt(s1 * d.cell_volume());
    double s2 = 0.0;
    if (ctx.neumann_potential()) {
        for (std::size_t flat = 0; flat < d.node_count(); ++flat) {
            s2 += d.closed_weight(flat) * r2[flat] * r2[flat];
        }
    } else {
        for (std::size_t flat : d.interior_nodes()) {
            s2 += r2[flat] * r2[flat];
        }
        s2 *= d.cell_volume();
    }
    r.potential = std::sqrt(s2);
    r.total = std::hypot(r.matter, r.potential);
    return r;
}

/// L2 projection onto the orthogonal complement of mutually orthogonal fields.
inline void project_out(ScalarField& f, const std::vector<ScalarField>& basis) {
    for (const ScalarField& e : basis) {
        f.axpy(-inner_product(f, e) / inner_product(e, e), e);
    }
}

/// Preconditioned gradient descent with Armijo backtracking. Reports the
/// best iterate; converged is false when max_iters runs out or the line
/// search fails.
inline CriticalPoint minimize(const FunctionalContext& ctx, const ScalarField& v0, const DescentConfig& cfg = {}) {
    cfg.validate();
    if (ctx.regime() == Regime::nonlinear) {
        throw ConfigError("minimize: the nonlinear functional is unbounded below; use mountain_pass");
    }
    require_same_domain(ctx.domain(), v0.domain(), "minimize");
    CriticalPoint cp(ctx.domain());
    cp.kind = PointKind::minimizer;
    if (ctx.regime() == Regime::dirichlet && ctx.zeta()) {
        const HypCheck hyp = check_hyp(ctx.params(), *ctx.zeta(), ctx.lambda1());
        if (!hyp.holds) {
            cp.warnings.push_back("spectral smallness condition fails (margin " + std::to_string(hyp.margin) +
                                  "); coercivity is not guaranteed");
        }
    }
    ScalarField v = v0;
    v.zero_trace();
    auto collapsed = [&](const ScalarField& x) { return cfg.trivial_tol > 0.0 && l2_norm(x) <= cfg.trivial_tol; };
    if (collapsed(v)) {
        cp.v = v;
        cp.phi = ScalarField(ctx.domain());
        cp.converged = true;
        cp.warnings.push_back("iterate collapsed to the trivial state");
        return cp;
    }
    Evaluation e = evaluate(ctx, v);
    cp.J_history.push_back(e.J);
    for (int it = 0;; ++it) {
        const ScalarField d = sobolev_gradient(ctx, e.gradient);
        const double gn = dual_norm(e.gradient, d);
        cp.iterations = it;
        cp.grad_norm = gn;
        if (gn <= cfg.grad_tol) {
            cp.converged = true;
            break;
        }
        if (it >= cfg.max_iters) {
            cp.warnings.push_back("descent: max_iters reached");
            break;
        }
        const double slope = gn * gn;
        double step = cfg.initial_step;
        std::optional<Evaluation> accepted;
        bool trivial = false;
        while (step >= 1e-14) {
            ScalarField trial = v;
            trial.axpy(-step, d);
            if (collapsed(trial)) {
                v = std::move(trial);
                trivial = true;
                break;
            }
            Evaluation te = evaluate(ctx, trial, true, &e.state.phi);
            if (te.J <= e.J - cfg.armijo_slope * step * slope) {
                v = std::move(trial);
                accepted = std::move(te);
                break;
            }
            step *= cfg.backtrack_factor;
        }
        if (trivial) {
            cp.iterations = it + 1;
            try {
                Evaluation te = evaluate(ctx, v, true, &e.state.phi);
                cp.J = te.J;
                cp.grad_norm = dual_norm(te.gradient, sobolev_gradient(ctx, te.gradient));
                cp.phi = std::move(te.state.phi);
            } catch (const DegenerateOperatorError&) {
                cp.J = e.J;
                cp.phi = e.state.phi;
            }
            cp.v = v;
            cp.J_history.push_back(cp.J);
            cp.converged = true;
            cp.warnings.push_back("iterate collapsed to the trivial state");
            return cp;
        }
        if (!accepted) {
            cp.warnings.push_back("descent: line search failed below machine step");
            break;
        }
        e = std::move(*accepted);
        cp.J_history.push_back(e.J);
    }
    cp.v = std::move(v);
    cp.phi = std::move(e.state.phi);
    cp.J = e.J;
    return cp;
}

/// Damped Newton iteration on the full coupled system (unknowns v on the
/// interior, phi on the potential unknowns) with the exact sparse Jacobian.
/// Fills residual, phi, J and grad_norm of the returned point.
inline CriticalPoint newton_refine(const FunctionalContext& ctx, CriticalPoint cp, double tol = 1e-10,
                                   int max_iter = 30) {
    const Domain& d = ctx.domain();
    const BoundaryKind bc = ctx.neumann_potential() ? BoundaryKind::neumann : BoundaryKind::dirichlet;
    const UnknownMap vmap(d, BoundaryKind::dirichlet);
    const UnknownMap pmap(d, bc);
    const long nv = static_cast<long>(vmap.size());
    const long np = static_cast<long>(pmap.size());
    const double m2 = ctx.params().m * ctx.params().m;

    ScalarField v = cp.v;
    v.zero_trace();
    ScalarField phi = cp.phi.size() == d.node_count() ? cp.phi : reduce(ctx, v).phi;
    if (!ctx.neumann_potential()) {
        phi.zero_trace();
    }

    auto pack = [&](const ScalarField& r1, const ScalarField& r2) {
        Eigen::VectorXd f(nv + np);
        for (long i = 0; i < nv; ++i) {
            f(i) = r1[vmap.nodes[i]];
        }
        for (long i = 0; i < np; ++i) {
            f(nv + i) = r2[pmap.nodes[i]];
        }
        return f;
    };

    SystemResidual res = system_residual(ctx, v, phi);
    int it = 0;
    for (; it < max_iter && res.total > tol; ++it) {
        const detail::SystemFields f = detail::system_fields(ctx, v, phi);
        Triplets t;
        add_laplacian_triplets(d, vmap, t, 0, 0);
        add_laplacian_triplets(d, pmap, t, nv, nv);
        for (long i = 0; i < nv; ++i) {
            const std::size_t flat = vmap.nodes[i];
            const double pq = f.phi_q[flat];
            const double u = f.u[flat];
            double diag = m2 - pq * pq;
            if (ctx.model()) {
                diag -= ctx.model()->dg(v[flat]);
            }
            const long pc = nv + pmap.row[flat];
            t.emplace_back(i, i, diag);
            t.emplace_back(i, pc, -2.0 * pq * u);
            t.emplace_back(pc, i, 2.0 * pq * u);
        }
        for (long i = 0; i < np; ++i) {
            const std::size_t flat = pmap.nodes[i];
            t.emplace_back(nv + i, nv + i, f.u[flat] * f.u[flat]);
        }
        Eigen::SparseMatrix<double> jac(nv + np, nv + np);
        jac.setFromTriplets(t.begin(), t.end());
        jac.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) {
            cp.warnings.push_back("newton: Jacobian factorization failed");
            break;
        }
        const auto [r1, r2] = detail::nodal_residuals(ctx, v, phi);
        const Eigen::VectorXd delta = lu.solve(-pack(r1, r2));
        if (lu.info() != Eigen::Success || !delta.allFinite()) {
            cp.warnings.push_back("newton: linear solve failed");
            break;
        }
        double step = 1.0;
        bool accepted = false;
        while (step >= 1e-6) {
            ScalarField tv = v;
            ScalarField tp = phi;
            for (long i = 0; i < nv; ++i) {
                tv[vmap.nodes[i]] += step * delta(i);
            }
            for (long i = 0; i < np; ++i) {
                tp[pmap.nodes[i]] += step * delta(nv + i);
            }
            const SystemResidual tr = system_residual(ctx, tv, tp);
            if (tr.total <= (1.0 - 1e-4 * step) * res.total) {
                v = std::move(tv);
                phi = std::move(tp);
                res = tr;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            cp.warnings.push_back("newton: no residual decrease along the Newton direction");
            break;
        }
    }
    cp.newton_iterations = it;
    Evaluation e = evaluate(ctx, v, true, &phi);
    cp.J = e.J;
    cp.grad_norm = dual_norm(e.gradient, sobolev_gradient(ctx, e.gradient));
    cp.v = std::move(v);
    cp.phi = std::move(phi);
    cp.residual = res;
    return cp;
}

/// Minimize, then refine and certify.
inline CriticalPoint solve_linear(const FunctionalContext& ctx, const ScalarField& v0, const DescentConfig& cfg = {},
                                  double newton_tol = 1e-10) {
    CriticalPoint cp = minimize(ctx, v0, cfg);
    bool trivial = false;
    for (const std::string& w : cp.warnings) {
        trivial = trivial || w == "iterate collapsed to the trivial state";
    }
    if (trivial) {
        cp.residual = system_residual(ctx, cp.v, cp.phi);
        return cp;
    }
    return newton_refine(ctx, std::move(cp), newton_tol);
}

/// Smallest t * direction (t doubling from cfg.endpoint_scale_start) with
/// J < 0.
inline ScalarField find_negative_endpoint(const FunctionalContext& ctx, const ScalarField& direction,
                                          const MountainPassConfig& cfg = {}) {
    cfg.validate();
    if (ctx.regime() != Regime::nonlinear) {
        throw ConfigError("find_negative_endpoint: requires the nonlinear regime");
    }
    if (direction.max_abs_interior() == 0.0) {
        throw ConfigError("find_negative_endpoint: zero direction has no growth");
    }
    ScalarField dir = direction;
    dir.zero_trace();
    double t = cfg.endpoint_scale_start;
    for (int i = 0; i <= 60; ++i) {
        ScalarField e = t * dir;
        if (eval_J(ctx, e) < 0.0) {
            return e;
        }
        t *= 2.0;
    }
    throw SolverError("find_negative_endpoint: J stayed nonnegative after 60 doublings; check the nonlinearity");
}

namespace detail {

struct PathNode {
    ScalarField v;
    ScalarField phi;
    double J = 0.0;
};

inline double metric_inner(const FunctionalContext& ctx, const ScalarField& a, const ScalarField& b) {
    const double m2 = ctx.params().m * ctx.params().m;
    return dirichlet_form(a, b) + m2 * inner_product(a, b);
}

/// Armijo step from node along -dir; slope = <raw gradient, dir>. Returns
/// false when no step down to 1e-14 is accepted.
inline bool armijo_move(const FunctionalContext& ctx, PathNode& node, const Evaluation& e, const ScalarField& dir,
                        double slope, const MountainPassConfig& cfg, double first_step = 1.0) {
    for (double step = first_step; step >= 1e-14; step *= cfg.backtrack_factor) {
        ScalarField trial = e.state.v;
        trial.axpy(-step, dir);
        Evaluation te = evaluate(ctx, trial, false, &e.state.phi);
        if (te.J <= e.J - cfg.armijo_slope * step * slope) {
            node = {std::move(trial), std::move(te.state.phi), te.J};
            return true;
        }
    }
    return false;
}

inline double metric_distance(const FunctionalContext& ctx, const ScalarField& a, const ScalarField& b) {
    const ScalarField diff = a - b;
    return std::sqrt(std::max(0.0, metric_inner(ctx, diff, diff)));
}

/// Nodes uniformly spaced in arc length (Sobolev metric) along path[lo..hi],
/// `count` of them including both ends, appended to out (the first one only
/// when include_first).
inline void resample(const FunctionalContext& ctx, const std::vector<PathNode>& path, std::size_t lo, std::size_t hi,
                     std::size_t count, bool include_first, std::vector<PathNode>& out) {
    std::vector<double> arc(hi - lo + 1, 0.0);
    for (std::size_t j = lo + 1; j <= hi; ++j) {
        arc[j - lo] = arc[j - lo - 1] + metric_distance(ctx, path[j].v, path[j - 1].v);
    }
    const double total = arc.back();
    if (include_first) {
        out.push_back(path[lo]);
    }
    std::size_t seg = 0;
    for (std::size_t k = 1; k + 1 < count; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(count - 1);
        while (lo + seg + 2 <= hi && arc[seg + 1] < s) {
            ++seg;
        }
        const double len = arc[seg + 1] - arc[seg];
        const double t = len > 0.0 ? std::clamp((s - arc[seg]) / len, 0.0, 1.0) : 0.0;
        const PathNode& a = path[lo + seg];
        const PathNode& b = path[lo + seg + 1];
        ScalarField z = (1.0 - t) * a.v;
        z.axpy(t, b.v);
        ScalarField guess = (1.0 - t) * a.phi;
        guess.axpy(t, b.phi);
        Evaluation e = evaluate(ctx, z, false, &guess);
        out.push_back({std::move(z), std::move(e.state.phi), e.J});
    }
    out.push_back(path[hi]);
}

/// Re-parameterizes by arc length while keeping node `pivot` (the current
/// maximum) in place; the pivot index is rebalanced to its arc position.
inline void reparameterize(const FunctionalContext& ctx, std::vector<PathNode>& path, std::size_t pivot) {
    const std::size_t n = path.size();
    double left = 0.0;
    double right = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        (j <= pivot ? left : right) += metric_distance(ctx, path[j].v, path[j - 1].v);
    }
    if (!(left + right > 0.0)) {
        return;
    }
    const auto k = static_cast<std::size_t>(
        std::clamp(std::lround(left / (left + right) * static_cast<double>(n - 1)), 1L, static_cast<long>(n) - 2));
    std::vector<PathNode> out;
    out.reserve(n);
    resample(ctx, path, 0, pivot, k + 1, true, out);
    resample(ctx, path, pivot, n - 1, n - k, false, out);
    path = std::move(out);
}

/// Moves the path maximum at index j to the maximizer of J along the
/// adjacent polyline segment (root of the directional derivative, Illinois
/// method). Returns the evaluation at the new node.
inline Evaluation refine_path_max(const FunctionalContext& ctx, std::vector<PathNode>& path, std::size_t j,
                                  double deform_tol) {
    Evaluation ej = evaluate(ctx, path[j].v, true, &path[j].phi);
    auto directional = [](const ScalarField& grad, const ScalarField& a, const ScalarField& b) {
        double s = 0.0;
        for (std::size_t flat : grad.domain().interior_nodes()) {
            s += grad[flat] * (b[flat] - a[flat]);
        }
        return s;
    };
    const ScalarField* other = nullptr;
    double f0 = directional(ej.gradient, path[j].v, path[j + 1].v);
    if (f0 > 0.0) {
        other = &path[j + 1].v;
    } else {
        f0 = directional(ej.gradient, path[j].v, path[j - 1].v);
        if (f0 > 0.0) {
            other = &path[j - 1].v;
        }
    }
    if (other == nullptr) {
        return ej;
    }
    const ScalarField a = path[j].v;
    const ScalarField b = *other;
    const double seg_len = metric_distance(ctx, a, b);
    auto at = [&](double s) {
        ScalarField z = (1.0 - s) * a;
        z.axpy(s, b);
        return z;
    };
    Evaluation e1 = evaluate(ctx, b, true, &path[j].phi);
    double f1 = directional(e1.gradient, a, b);
    if (f1 >= 0.0) {
        // no interior maximum on the segment: keep the better endpoint
        return e1.J > ej.J ? std::move(e1) : std::move(ej);
    }
    double lo = 0.0;
    double hi = 1.0;
    double flo = f0;
    double fhi = f1;
    int side = 0;
    Evaluation best = std::move(ej);
    for (int it = 0; it < 40; ++it) {
        const double s = (lo * fhi - hi * flo) / (fhi - flo);
        Evaluation es = evaluate(ctx, at(s), true, &best.state.phi);
        const double fs = directional(es.gradient, a, b);
        best = std::move(es);
        if (std::abs(fs) <= 0.05 * deform_tol * seg_len || hi - lo <= 1e-12) {
            break;
        }
        if (fs > 0.0) {
            lo = s;
            flo = fs;
            if (side == 1) {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = s;
            fhi = fs;
            if (side == -1) {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    return best;
}

}  // namespace detail

/// Discrete-path deformation: the path from 0 to `endpoint` has its maximum
/// located on the polyline and pushed down along the preconditioned negative
/// gradient (Armijo); the other nodes with J > 0 take Armijo steps along
/// the same gradient with the path tangent removed; then the path is
/// re-parameterized by arc length. Directions are
/// kept L2-orthogonal to `constraint` (the path must already lie in that
/// complement).
inline CriticalPoint mountain_pass(const FunctionalContext& ctx, const ScalarField& endpoint,
                                   const MountainPassConfig& cfg = {},
                                   const std::vector<ScalarField>& constraint = {}) {
    cfg.validate();
    if (ctx.regime() != Regime::nonlinear) {
        throw ConfigError("mountain_pass: requires the nonlinear regime");
    }
    const Domain& d = ctx.domain();
    const std::size_t n = static_cast<std::size_t>(cfg.path_points);
    std::vector<detail::PathNode> path;
    path.reserve(n);
    ScalarField end = endpoint;
    end.zero_trace();
    for (std::size_t j = 0; j < n; ++j) {
        ScalarField z = (static_cast<double>(j) / static_cast<double>(n - 1)) * end;
        Evaluation e = evaluate(ctx, z, false, j > 0 ? &path.back().phi : nullptr);
        path.push_back({std::move(z), std::move(e.state.phi), e.J});
    }
    if (!(path.back().J < 0.0)) {
        throw ConfigError("mountain_pass: J(endpoint) must be negative");
    }
    if (std::abs(path.front().J) > 1e-14) {
        throw ConfigError("mountain_pass: J(0) must vanish");
    }

    CriticalPoint cp(d);
    cp.kind = PointKind::mountain_pass;
    for (int sweep = 0;; ++sweep) {
        std::size_t jmax = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (path[j].J > path[jmax].J) {
                jmax = j;
            }
        }
        if (jmax == 0 || jmax == n - 1) {
            throw SolverError("mountain_pass: path maximum collapsed to an endpoint");
        }
        Evaluation e = detail::refine_path_max(ctx, path, jmax, cfg.deform_tol);
        cp.J_history.push_back(e.J);
        ScalarField dir = sobolev_gradient(ctx, e.gradient);
        project_out(dir, constraint);
        const double gn = dual_norm(e.gradient, dir);
        cp.iterations = sweep;
        cp.grad_norm = gn;
        cp.J = e.J;
        cp.v = e.state.v;
        cp.phi = e.state.phi;
        if (gn <= cfg.deform_tol) {
            cp.converged = true;
            break;
        }
        if (sweep >= cfg.max_deforms) {
            cp.warnings.push_back("mountain_pass: max_deforms reached");
            break;
        }
        if (!detail::armijo_move(ctx, path[jmax], e, dir, gn * gn, cfg)) {
            cp.warnings.push_back("mountain_pass: line search failed below machine step");
            break;
        }
        // the rest of the path above level 0 relaxes transversally so the
        // re-interpolation does not undo the move of the maximum; nodes
        // below 0 stay put since J is unbounded below there
        for (std::size_t j = 1; j + 1 < n; ++j) {
            if (j == jmax || !(path[j].J > 0.0)) {
                continue;
            }
            Evaluation ej = evaluate(ctx, path[j].v, true, &path[j].phi);
            ScalarField dj = sobolev_gradient(ctx, ej.gradient);
            project_out(dj, constraint);
            const ScalarField tangent = path[j + 1].v - path[j - 1].v;
            const double tt = detail::metric_inner(ctx, tangent, tangent);
            if (tt > 0.0) {
                dj.axpy(-detail::metric_inner(ctx, dj, tangent) / tt, tangent);
            }
            const double slope = detail::metric_inner(ctx, dj, dj);
            if (slope > 0.0) {
                // displacement capped at the local node spacing
                const double spacing = 0.5 * std::sqrt(tt);
                detail::armijo_move(ctx, path[j], ej, dj, slope, cfg, std::min(1.0, spacing / std::sqrt(slope)));
            }
        }
        detail::reparameterize(ctx, path, jmax);
    }
    return cp;
}

struct MultiplicityResult {
    std::vector<CriticalPoint> points;  ///< certified, distinct, ascending J
    std::vector<std::string> warnings;
};

/// min(||a - b||, ||a + b||) relative to the larger norm.
inline double orbit_distance(const ScalarField& a, const ScalarField& b) {
    const double scale = std::max({l2_norm(a), l2_norm(b), 1e-300});
    return std::min(l2_norm(a - b), l2_norm(a + b)) / scale;
}

/// Mountain pass in the nested spaces spanned by the first k box modes
/// (k = 1: endpoint along e1; k = 2: endpoint along e2 with the path kept
/// orthogonal to e1), Newton refinement on the full space, deduplication
/// up to sign.
inline MultiplicityResult multiplicity_probe(const FunctionalContext& ctx, const MountainPassConfig& cfg = {},
                                             double newton_tol = 1e-10) {
    if (ctx.regime() != Regime::nonlinear) {
        throw ConfigError("multiplicity_probe: requires the nonlinear regime");
    }
    const Domain& d = ctx.domain();
    const std::vector<BoxMode> modes = box_modes(d, 2);
    std::vector<ScalarField> basis;
    for (const BoxMode& m : modes) {
        basis.push_back(box_mode_field(d, m));
    }
    MultiplicityResult out;
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const std::vector<ScalarField> constraint(basis.begin(), basis.begin() + static_cast<long>(k));
        CriticalPoint cp(d);
        try {
            const ScalarField endpoint = find_negative_endpoint(ctx, basis[k], cfg);
            cp = mountain_pass(ctx, endpoint, cfg, constraint);
            cp = newton_refine(ctx, std::move(cp), newton_tol);
        } catch (const SolverError& e) {
            out.warnings.push_back("subspace " + std::to_string(k + 1) + ": " + e.what());
            continue;
        }
        if (!cp.certified(1e-8)) {
            out.warnings.push_back("subspace " + std::to_string(k + 1) + ": candidate not certified");
            continue;
        }
        const bool duplicate = std::any_of(out.points.begin(), out.points.end(), [&](const CriticalPoint& p) {
            return orbit_distance(p.v, cp.v) <= 1e-3;
        });
        if (duplicate) {
            out.warnings.push_back("subspace " + std::to_string(k + 1) + ": duplicate of an earlier point");
            continue;
        }
        out.points.push_back(std::move(cp));
    }
    std::sort(out.points.begin(), out.points.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.J < b.J; });
    if (out.points.size() < 2) {
        out.warnings.push_back("multiplicity_probe: fewer than 2 distinct critical points");
    }
    return out;
}

/// Worst decrease J(v) - J(v + eps w) over `count` random L2-unit w; a
/// local minimum gives a value <= 0 up to round-off.
inline double local_minimality_probe(const FunctionalContext& ctx, const ScalarField& v, int count = 20,
                                     double eps = 1e-3, unsigned seed = 3) {
    const double base = eval_J(ctx, v);
    double worst = -std::numeric_limits<double>::infinity();
    for (ScalarField w : random_unit_directions(ctx, count, seed)) {
        w *= 1.0 / l2_norm(w);
        ScalarField z = v;
        z.axpy(eps, w);
        worst = std::max(worst, base - eval_J(ctx, z));
    }
    return worst;
}

}  // namespace kgmvar
