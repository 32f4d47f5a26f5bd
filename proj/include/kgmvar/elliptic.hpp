#pragma once

// Discrete elliptic operators -Lap_h + (w + sigma) on box grids, a Jacobi
// preconditioned conjugate gradient solver, the boundary-data lifting
// solves and the principal Dirichlet eigenvalue.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kgmvar/domain.hpp"
#include "kgmvar/params.hpp"

namespace kgmvar {

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = true;
};

inline void require_converged(const SolveStats& s, const std::string& what) {
    if (!s.converged) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3e", s.relative_residual);
        throw SolverError(what + ": CG did not converge after " + std::to_string(s.iterations) +
                          " iterations (relative residual " + buf + ")");
    }
}

/// v -> -Lap_h v + (w + sigma) v.
///
/// Dirichlet: unknowns are the interior nodes; apply() reads the boundary
/// layer of its argument. Neumann: every node is an unknown and the
/// boundary rows use mirror (ghost) reflection, i.e. zero normal flux.
class EllipticOperator {
public:
    EllipticOperator(Domain d, BoundaryKind bc, double shift = 0.0)
        : domain_(std::move(d)), bc_(bc), potential_(domain_), shift_(shift) {}

    EllipticOperator(Domain d, BoundaryKind bc, ScalarField potential, double shift = 0.0)
        : domain_(std::move(d)), bc_(bc), potential_(std::move(potential)), shift_(shift) {
        require_same_domain(domain_, potential_.domain(), "EllipticOperator");
        for (double w : potential_.values()) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ConfigError("EllipticOperator: potential must be finite and >= 0");
            }
        }
    }

    [[nodiscard]] const Domain& domain() const { return domain_; }
    [[nodiscard]] BoundaryKind bc() const { return bc_; }
    [[nodiscard]] const ScalarField& potential() const { return potential_; }
    [[nodiscard]] double shift() const { return shift_; }

    [[nodiscard]] std::vector<std::size_t> unknowns() const {
        if (bc_ == BoundaryKind::dirichlet) {
            const auto in = domain_.interior_nodes();
            return {in.begin(), in.end()};
        }
        std::vector<std::size_t> all(domain_.node_count());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }

    /// Quadrature weight that symmetrizes the operator on its unknowns.
    [[nodiscard]] double weight(std::size_t flat) const {
        return bc_ == BoundaryKind::dirichlet ? domain_.cell_volume() : domain_.closed_weight(flat);
    }

    /// Diagonal entry of the stencil row at `flat`.
    [[nodiscard]] double diagonal(std::size_t flat) const {
        double diag = potential_[flat] + shift_;
        for (int a = 0; a < domain_.dim(); ++a) {
            diag += 2.0 / (domain_.spacing(a) * domain_.spacing(a));
        }
        return diag;
    }

    /// True when the Neumann operator has the constants as kernel.
    [[nodiscard]] bool singular() const {
        if (bc_ == BoundaryKind::dirichlet) {
            return false;
        }
        if (shift_ > 0.0) {
            return false;
        }
        return std::none_of(potential_.values().begin(), potential_.values().end(), [](double w) { return w > 0.0; });
    }

private:
    Domain domain_;
    BoundaryKind bc_;
    ScalarField potential_;
    double shift_;
};

/// Nodal values of -Lap_h f + (w + sigma) f on the operator's unknowns;
/// other entries of the result are zero.
inline ScalarField apply(const EllipticOperator& op, const ScalarField& f) {
    const Domain& d = op.domain();
    require_same_domain(d, f.domain(), "apply");
    ScalarField out(d);
    const ScalarField& w = op.potential();
    const double sigma = op.shift();
    const bool neumann = op.bc() == BoundaryKind::neumann;
    const int dim = d.dim();
    std::array<double, 3> inv_h2{};
    for (int a = 0; a < dim; ++a) {
        inv_h2[a] = 1.0 / (d.spacing(a) * d.spacing(a));
    }
    for (int k = 0; k < d.extent(2); ++k) {
        for (int j = 0; j < d.extent(1); ++j) {
            for (int i = 0; i < d.extent(0); ++i) {
                const NodeIndex c{i, j, k};
                const std::size_t flat = d.index(c);
                if (!neumann && !d.is_interior(flat)) {
                    continue;
                }
                const double fc = f[flat];
                double lap = 0.0;
                for (int a = 0; a < dim; ++a) {
                    const std::size_t st = d.stride(a);
                    const int last = d.extent(a) - 1;
                    // ghost reflection on the Neumann boundary layers
                    const double left = c[a] == 0 ? f[flat + st] : f[flat - st];
                    const double right = c[a] == last ? f[flat - st] : f[flat + st];
                    lap += (left - 2.0 * fc + right) * inv_h2[a];
                }
                out[flat] = -lap + (w[flat] + sigma) * fc;
            }
        }
    }
    return out;
}

/// Discrete Dirichlet form of the zero-flux Neumann stencil under the
/// closed quadrature, sum_i W_i f_i (-L_N g)_i. Symmetric in f and g.
inline double neumann_form(const ScalarField& f, const ScalarField& g) {
    const EllipticOperator op(f.domain(), BoundaryKind::neumann, 0.0);
    return inner_product_closed(f, apply(op, g));
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void remove_mean(std::vector<double>& a) {
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    for (double& v : a) {
        v -= mean;
    }
}

}  // namespace detail

struct CgResult {
    ScalarField solution;
    SolveStats stats;
};

namespace detail {

struct PcgOutcome {
    std::vector<double> x;
    SolveStats stats;
};

/// Jacobi-preconditioned CG for a symmetric positive (semi)definite matrix
/// given by `matvec`. With `singular` the null space is the constants: the
/// right-hand side and every residual are projected to zero Euclidean mean.
/// Converged when the true residual satisfies ||b - A x|| <= 10 tol ||b||;
/// the iteration restarts from the current iterate (up to 3 times) when the
/// recurrence and true residuals drift apart. A starting guess that is worse
/// than zero is discarded.
template <class MatVec>
PcgOutcome pcg(const MatVec& matvec, const std::vector<double>& inv_diag, std::vector<double> b,
               const std::vector<double>* x0, bool singular, double tol, int max_iter) {
    const std::size_t n = b.size();
    if (singular) {
        remove_mean(b);
    }
    PcgOutcome out{std::vector<double>(n, 0.0), {0, 0.0, true}};
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        return out;
    }
    std::vector<double> r(n), z(n), p(n), ap(n);
    auto true_residual = [&](const std::vector<double>& x) {
        matvec(x, ap);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = b[i] - ap[i];
        }
        if (singular) {
            remove_mean(r);
        }
        return norm2(r);
    };
    double rnorm = bnorm;
    r = b;
    if (x0 != nullptr) {
        std::vector<double> guess = *x0;
        if (singular) {
            remove_mean(guess);
        }
        const double guess_norm = true_residual(guess);
        if (guess_norm < bnorm) {
            out.x = std::move(guess);
            rnorm = guess_norm;
        } else {
            r = b;
        }
    }
    int it = 0;
    for (int restart = 0; restart <= 3 && rnorm > tol * bnorm && it < max_iter; ++restart) {
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = inv_diag[i] * r[i];
        }
        if (singular) {
            remove_mean(z);
        }
        p = z;
        double rz = dot(r, z);
        while (it < max_iter) {
            ++it;
            matvec(p, ap);
            const double curvature = dot(p, ap);
            if (!(curvature > 0.0)) {
                throw SolverError("cg_solve: operator is not positive definite (negative curvature)");
            }
            const double alpha = rz / curvature;
            for (std::size_t i = 0; i < n; ++i) {
                out.x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if (singular) {
                remove_mean(r);
            }
            if (norm2(r) <= tol * bnorm) {
                break;
            }
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = inv_diag[i] * r[i];
            }
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = z[i] + beta * p[i];
            }
        }
        rnorm = true_residual(out.x);
    }
    const double rel = rnorm / bnorm;
    out.stats = {it, rel, rel <= 10.0 * tol};
    return out;
}

}  // namespace detail

/// Solves op x = rhs on the operator's unknowns with a zero Dirichlet
/// trace (boundary contributions must already be in rhs).
///
/// The iteration runs on the weight-symmetrized system W A x = W b and
/// stops when ||W(A x - b)|| <= tol ||W b||. Singular Neumann operators are
/// solved in the zero-mean subspace and the result has zero closed mean.
/// Negative curvature raises SolverError; running out of iterations returns
/// converged = false.
inline CgResult cg_solve(const EllipticOperator& op, const ScalarField& rhs, double tol = 1e-10, int max_iter = 0,
                         const ScalarField* initial = nullptr) {
    const Domain& d = op.domain();
    require_same_domain(d, rhs.domain(), "cg_solve");
    if (!(tol > 0.0)) {
        throw ConfigError("cg_solve: tol must be > 0");
    }
    const std::vector<std::size_t> idx = op.unknowns();
    const std::size_t n = idx.size();
    if (max_iter <= 0) {
        max_iter = static_cast<int>(std::max<std::size_t>(100, 10 * n));
    }
    std::vector<double> wt(n), inv_diag(n), b(n);
    for (std::size_t r = 0; r < n; ++r) {
        wt[r] = op.weight(idx[r]);
        inv_diag[r] = 1.0 / (wt[r] * op.diagonal(idx[r]));
        b[r] = wt[r] * rhs[idx[r]];
    }
    ScalarField buf(d);
    auto matvec = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            buf[idx[i]] = in[i];
        }
        const ScalarField ax = apply(op, buf);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = wt[i] * ax[idx[i]];
        }
    };
    std::vector<double> x0;
    if (initial != nullptr) {
        require_same_domain(d, initial->domain(), "cg_solve initial guess");
        x0.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            x0[i] = (*initial)[idx[i]];
        }
    }
    const bool singular = op.singular();
    detail::PcgOutcome res =
        detail::pcg(matvec, inv_diag, std::move(b), initial != nullptr ? &x0 : nullptr, singular, tol, max_iter);
    ScalarField x(d);
    for (std::size_t i = 0; i < n; ++i) {
        x[idx[i]] = res.x[i];
    }
    if (singular) {
        const double mean = integrate_volume_closed(x) / d.volume();
        for (std::size_t flat : idx) {
            x[flat] -= mean;
        }
    }
    return {std::move(x), res.stats};
}

/// Solves (-L_N + w) phi = f (zero-flux Neumann, w >= 0 not identically 0)
/// by splitting off the constant mode: phi = psi + c with
///   T psi = W f - (W w)(1'W f)/(1'W w),  T = W(-L_N + w) - (W w)(W w)'/(1'W w),
///   c = (1'W f - (W w)'psi)/(1'W w).
/// T is singular only on constants and is bounded below by the Neumann
/// Laplacian, so the conditioning does not degrade as w becomes small.
inline CgResult solve_neumann_coupled(const ScalarField& w, const ScalarField& f, double tol = 1e-12,
                                      const ScalarField* initial = nullptr) {
    const Domain& d = w.domain();
    require_same_domain(d, f.domain(), "solve_neumann_coupled");
    const std::size_t n = d.node_count();
    const EllipticOperator op(d, BoundaryKind::neumann, w);
    std::vector<double> W(n), Ww(n), inv_diag(n), b(n);
    double mass_w = 0.0;
    double mass_f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        W[i] = d.closed_weight(i);
        Ww[i] = W[i] * w[i];
        mass_w += Ww[i];
        mass_f += W[i] * f[i];
    }
    if (!(mass_w > 0.0)) {
        throw SolverError("solve_neumann_coupled: w vanishes identically");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double diag = W[i] * op.diagonal(i) - Ww[i] * Ww[i] / mass_w;
        inv_diag[i] = 1.0 / diag;
        b[i] = W[i] * f[i] - Ww[i] * mass_f / mass_w;
    }
    ScalarField buf(d);
    auto matvec = [&](const std::vector<double>& in, std::vector<double>& out) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            buf[i] = in[i];
            proj += Ww[i] * in[i];
        }
        const ScalarField ax = apply(op, buf);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = W[i] * ax[i] - Ww[i] * proj / mass_w;
        }
    };
    std::vector<double> x0;
    if (initial != nullptr) {
        require_same_domain(d, initial->domain(), "solve_neumann_coupled initial guess");
        x0 = initial->data();
    }
    const int max_iter = static_cast<int>(std::max<std::size_t>(100, 10 * n));
    detail::PcgOutcome res =
        detail::pcg(matvec, inv_diag, std::move(b), initial != nullptr ? &x0 : nullptr, true, tol, max_iter);
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        proj += Ww[i] * res.x[i];
    }
    const double c = (mass_f - proj) / mass_w;
    ScalarField x(d);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = res.x[i] + c;
    }
    return {std::move(x), res.stats};
}

/// Solves op u = 0 in the interior with u = trace on the boundary: the trace
/// is moved to the right-hand side row by row and CG runs on the zero-trace
/// space.
inline CgResult solve_dirichlet_lift(const EllipticOperator& op, const BoundaryData& trace, double tol = 1e-12) {
    if (op.bc() != BoundaryKind::dirichlet) {
        throw ConfigError("solve_dirichlet_lift: operator must be Dirichlet");
    }
    trace.check_domain(op.domain(), "solve_dirichlet_lift");
    ScalarField g(op.domain());
    g.set_trace(trace);
    ScalarField rhs = apply(op, g);
    rhs *= -1.0;
    CgResult res = cg_solve(op, rhs, tol);
    res.solution += g;
    return res;
}

/// Lifting of the matter field: -Lap U + m^2 U = 0, U = sqrt(4 pi) q h on
/// the boundary.
inline ScalarField solve_lifting_U(const Domain& d, const PhysicalParams& params, const BoundaryData& h,
                                   double tol = 1e-12, SolveStats* stats = nullptr) {
    params.validate();
    if (h.kind() != BoundaryKind::dirichlet) {
        throw ConfigError("solve_lifting_U: h must be a Dirichlet trace");
    }
    const EllipticOperator op(d, BoundaryKind::dirichlet, params.m * params.m);
    CgResult res = solve_dirichlet_lift(op, h.affine(sqrt_4pi * params.q, 0.0), tol);
    require_converged(res.stats, "solve_lifting_U");
    if (stats != nullptr) {
        *stats = res.stats;
    }
    return std::move(res.solution);
}

/// Dirichlet lifting of the potential: Lap Phi_D = 0, Phi_D = q zeta - omega
/// on the boundary.
inline ScalarField solve_phi_D(const Domain& d, const BoundaryData& zeta, const PhysicalParams& params,
                               double tol = 1e-12, SolveStats* stats = nullptr) {
    if (zeta.kind() != BoundaryKind::dirichlet) {
        throw ConfigError("solve_phi_D: zeta must be a Dirichlet trace");
    }
    const EllipticOperator op(d, BoundaryKind::dirichlet, 0.0);
    CgResult res = solve_dirichlet_lift(op, zeta.affine(params.q, -params.omega), tol);
    require_converged(res.stats, "solve_phi_D");
    if (stats != nullptr) {
        *stats = res.stats;
    }
    return std::move(res.solution);
}

/// Boundary-row source of the ghost-node Neumann stencil for outward flux
/// `scale * theta`: 2 scale theta / h_a on every face a the node lies on.
inline ScalarField neumann_flux_source(const Domain& d, const BoundaryData& theta, double scale = 1.0) {
    theta.check_domain(d, "neumann_flux_source");
    ScalarField s(d);
    const auto nodes = d.boundary_nodes();
    for (const Face& face : d.faces()) {
        const double factor = 2.0 * scale / d.spacing(face.axis);
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            if (d.on_face(nodes[b], face)) {
                s[nodes[b]] += factor * theta[b];
            }
        }
    }
    return s;
}

struct NeumannLift {
    ScalarField field;
    double kappa = 0.0;
    SolveStats stats;
};

/// Lap Phi_N = q kappa, dPhi_N/dn = q theta, zero mean, with
/// kappa = (1/|Omega|) int_{dOmega} theta.
inline NeumannLift solve_phi_N(const Domain& d, const BoundaryData& theta, double q, double tol = 1e-12) {
    if (theta.kind() != BoundaryKind::neumann) {
        throw ConfigError("solve_phi_N: theta must be a Neumann flux");
    }
    const double kappa = integrate_boundary(theta, d) / d.volume();
    // -L_N Phi = q (flux source - kappa)
    ScalarField rhs = neumann_flux_source(d, theta, q);
    for (double& v : rhs.values()) {
        v -= q * kappa;
    }
    double scale = 0.0;
    for (std::size_t flat = 0; flat < rhs.size(); ++flat) {
        scale += d.closed_weight(flat) * std::abs(rhs[flat]);
    }
    const double imbalance = integrate_volume_closed(rhs);
    if (std::abs(imbalance) > 1e-10 * std::max(scale, 1e-300)) {
        throw SolverError("solve_phi_N: discrete compatibility lost (imbalance " + std::to_string(imbalance) + ")");
    }
    const EllipticOperator op(d, BoundaryKind::neumann, 0.0);
    CgResult res = cg_solve(op, rhs, tol);
    require_converged(res.stats, "solve_phi_N");
    return {std::move(res.solution), kappa, res.stats};
}

struct EigenResult {
    double lambda = 0.0;
    ScalarField eigenfield;
    int iterations = 0;
};

/// Principal eigenvalue of the Dirichlet -Lap_h by inverse power iteration
/// with CG inner solves. Stops when the Rayleigh quotient changes by less
/// than tol (relative). The eigenfield has l2_norm 1 and is nonnegative.
inline EigenResult smallest_eigenvalue(const Domain& d, double tol = 1e-12, int max_iter = 500) {
    const EllipticOperator op(d, BoundaryKind::dirichlet, 0.0);
    ScalarField x(d);
    for (std::size_t flat : d.interior_nodes()) {
        x[flat] = 1.0;
    }
    x *= 1.0 / l2_norm(x);
    double lambda = dirichlet_form(x, x);
    for (int it = 1; it <= max_iter; ++it) {
        const ScalarField guess = (1.0 / lambda) * x;
        CgResult res = cg_solve(op, x, 1e-13, 0, &guess);
        require_converged(res.stats, "smallest_eigenvalue");
        x = std::move(res.solution);
        x *= 1.0 / l2_norm(x);
        const double next = dirichlet_form(x, x);
        const bool done = std::abs(next - lambda) <= tol * std::abs(next);
        lambda = next;
        if (done) {
            double s = 0.0;
            for (std::size_t flat : d.interior_nodes()) {
                s += x[flat];
            }
            if (s < 0.0) {
                x *= -1.0;
            }
            for (std::size_t flat : d.interior_nodes()) {
                x[flat] = std::max(x[flat], 0.0);
            }
            x *= 1.0 / l2_norm(x);
            return {lambda, std::move(x), it};
        }
    }
    throw SolverError("smallest_eigenvalue: inverse iteration did not converge");
}

struct HypCheck {
    bool holds = false;
    double margin = 0.0;
};

/// margin = m^2 + lambda1 - max_boundary (q zeta - omega)^2; holds iff > 0.
inline HypCheck check_hyp(const PhysicalParams& params, const BoundaryData& zeta, double lambda1) {
    double sup = 0.0;
    for (double z : zeta.values()) {
        const double v = params.q * z - params.omega;
        sup = std::max(sup, v * v);
    }
    const double margin = params.m * params.m + lambda1 - sup;
    return {margin > 0.0, margin};
}

}  // namespace kgmvar
