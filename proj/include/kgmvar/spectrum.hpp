#pragma once

// Several low Dirichlet eigenpairs of -Lap_h (block inverse iteration with a
// sparse Cholesky factor) and the closed-form box spectra used as
// references.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "kgmvar/domain.hpp"
#include "kgmvar/errors.hpp"
#include "kgmvar/sparse.hpp"

namespace kgmvar {

struct EigenPair {
    double lambda = 0.0;
    ScalarField field;
};

/// Lowest k eigenpairs of the Dirichlet -Lap_h (k <= 10), eigenfields
/// orthonormal in the interior quadrature. Inverse iteration on a block of
/// k + 4 vectors with Rayleigh-Ritz after every step; converged when every
/// requested pair has ||A x - lambda x|| <= tol * lambda.
inline std::vector<EigenPair> dirichlet_eigenpairs(const Domain& d, int k, double tol = 1e-8, int max_iter = 1000,
                                                   unsigned seed = 7) {
    if (k < 1 || k > 10) {
        throw ConfigError("dirichlet_eigenpairs: k must be in [1, 10]");
    }
    const UnknownMap map(d, BoundaryKind::dirichlet);
    const long n = static_cast<long>(map.size());
    const long block = std::min<long>(k + 4, n);
    if (k > n) {
        throw ConfigError("dirichlet_eigenpairs: k exceeds the number of interior nodes");
    }
    const Eigen::SparseMatrix<double> a = assemble_operator(d, BoundaryKind::dirichlet, nullptr, 0.0);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(a);
    if (chol.info() != Eigen::Success) {
        throw SolverError("dirichlet_eigenpairs: factorization failed");
    }

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd x(n, block);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < block; ++j) {
            x(i, j) = unif(rng);
        }
    }
    Eigen::VectorXd theta;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::MatrixXd y = chol.solve(x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        y = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
        const Eigen::MatrixXd t = y.transpose() * (a * y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (t + t.transpose()));
        theta = es.eigenvalues();
        x = y * es.eigenvectors();
        bool done = true;
        for (int j = 0; j < k && done; ++j) {
            const Eigen::VectorXd r = a * x.col(j) - theta(j) * x.col(j);
            done = r.norm() <= tol * theta(j);
        }
        if (done) {
            std::vector<EigenPair> out;
            for (int j = 0; j < k; ++j) {
                ScalarField f(d);
                double sum = 0.0;
                double peak = 0.0;
                for (long i = 0; i < n; ++i) {
                    f[map.nodes[i]] = x(i, j);
                    sum += x(i, j);
                    if (std::abs(x(i, j)) > std::abs(peak)) {
                        peak = x(i, j);
                    }
                }
                // deterministic sign: positive mass, or positive peak for
                // fields with (numerically) zero mass
                const bool flip = std::abs(sum) > 1e-8 * std::sqrt(static_cast<double>(n)) ? sum < 0.0 : peak < 0.0;
                if (flip) {
                    f *= -1.0;
                }
                f *= 1.0 / l2_norm(f);
                out.push_back({theta(j), std::move(f)});
            }
            return out;
        }
    }
    throw SolverError("dirichlet_eigenpairs: block inverse iteration did not converge");
}

struct BoxMode {
    std::array<int, 3> index{1, 1, 1};
    double continuum = 0.0;
    double discrete = 0.0;
};

/// The lowest k box modes sin(pi m_a x_a / L_a), ordered by discrete
/// eigenvalue sum_a (4/h_a^2) sin^2(pi m_a h_a / (2 L_a)).
inline std::vector<BoxMode> box_modes(const Domain& d, int k) {
    std::vector<BoxMode> modes;
    const int cap = k + 1;
    std::array<int, 3> hi{1, 1, 1};
    for (int a = 0; a < d.dim(); ++a) {
        hi[a] = std::min(d.count(a), cap);
    }
    for (int i = 1; i <= hi[0]; ++i) {
        for (int j = 1; j <= hi[1]; ++j) {
            for (int l = 1; l <= (d.dim() == 3 ? hi[2] : 1); ++l) {
                BoxMode m;
                m.index = {i, j, d.dim() == 3 ? l : 0};
                for (int a = 0; a < d.dim(); ++a) {
                    const double h = d.spacing(a);
                    const double ratio = m.index[a] / d.length(a);
                    m.continuum += std::numbers::pi * std::numbers::pi * ratio * ratio;
                    const double s = std::sin(std::numbers::pi * m.index[a] * h / (2.0 * d.length(a)));
                    m.discrete += 4.0 / (h * h) * s * s;
                }
                modes.push_back(m);
            }
        }
    }
    std::stable_sort(modes.begin(), modes.end(),
                     [](const BoxMode& x, const BoxMode& y) { return x.discrete < y.discrete; });
    if (static_cast<int>(modes.size()) > k) {
        modes.resize(k);
    }
    return modes;
}

/// The sampled product of sines for a box mode: an exact eigenvector of the
/// discrete Dirichlet Laplacian, l2-normalized with positive mass.
inline ScalarField box_mode_field(const Domain& d, const BoxMode& mode) {
    ScalarField f(d);
    for (std::size_t flat : d.interior_nodes()) {
        const Point x = d.position(flat);
        double value = 1.0;
        for (int a = 0; a < d.dim(); ++a) {
            value *= std::sin(std::numbers::pi * mode.index[a] * x[a] / d.length(a));
        }
        f[flat] = value;
    }
    f *= 1.0 / l2_norm(f);
    return f;
}

}  // namespace kgmvar
