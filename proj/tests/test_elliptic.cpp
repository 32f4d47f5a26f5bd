#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kgmvar/elliptic.hpp"
#include "kgmvar/spectrum.hpp"
#include "oracle.hpp"

using namespace kgmvar;

namespace {

constexpr double pi = std::numbers::pi;

ScalarField sine_mode(const Domain& d) {
    return ScalarField::from_function(d, [&](const Point& x) {
        double s = 1.0;
        for (int a = 0; a < d.dim(); ++a) {
            s *= std::sin(pi * x[a] / d.length(a));
        }
        return s;
    });
}

ScalarField random_potential(const Domain& d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 3.0);
    ScalarField w(d);
    for (double& x : w.values()) {
        x = u(rng);
    }
    return w;
}

}  // namespace

TEST(Apply, ConstantsAreNeumannHarmonic) {
    const Domain d(2, {1.0, 1.0}, {6, 6});
    const EllipticOperator op(d, BoundaryKind::neumann, 0.0);
    const ScalarField out = apply(op, ScalarField(d, 1.0));
    EXPECT_LT(out.max_abs(), 1e-12);
}

TEST(Apply, ConstantWithZeroTrace) {
    const Domain d(2, {1.0, 1.0}, {7, 7});
    ScalarField f(d);
    for (std::size_t i : d.interior_nodes()) {
        f[i] = 1.0;
    }
    const ScalarField out = apply(EllipticOperator(d, BoundaryKind::dirichlet, 0.0), f);
    const double h2 = d.spacing(0) * d.spacing(0);
    EXPECT_NEAR(out[d.index(1, 4)], 1.0 / h2, 1e-9);  // one boundary neighbour
    EXPECT_NEAR(out[d.index(1, 1)], 2.0 / h2, 1e-9);  // corner: two
    EXPECT_NEAR(out[d.index(4, 4)], 0.0, 1e-12);      // deep inside
}

TEST(Apply, EigenfunctionPointwise) {
    const Domain d(2, {1.0, 1.0}, {63, 63});
    const ScalarField f = sine_mode(d);
    const ScalarField out = apply(EllipticOperator(d, BoundaryKind::dirichlet, 0.0), f);
    for (std::size_t i : d.interior_nodes()) {
        EXPECT_NEAR(out[i] / (2.0 * pi * pi * f[i]), 1.0, 0.01);
    }
}

TEST(Apply, SymmetryAndPositivity) {
    std::mt19937_64 rng(5);
    const Domain d(2, {1.0, 1.5}, {8, 9});
    const ScalarField w = random_potential(d, rng);
    const EllipticOperator dir(d, BoundaryKind::dirichlet, w, 0.3);
    const ScalarField f = oracle::random_interior(d, rng);
    const ScalarField g = oracle::random_interior(d, rng);
    EXPECT_NEAR(inner_product(apply(dir, f), g), inner_product(f, apply(dir, g)), 1e-11);
    EXPECT_GT(inner_product(apply(dir, f), f), 0.0);

    // the Neumann operator is symmetric under the closed quadrature
    const EllipticOperator neu(d, BoundaryKind::neumann, w);
    ScalarField a(d);
    ScalarField b(d);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < d.node_count(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    EXPECT_NEAR(inner_product_closed(apply(neu, a), b), inner_product_closed(a, apply(neu, b)), 1e-11);
    EXPECT_GT(inner_product_closed(apply(neu, a), a), 0.0);
}

TEST(CgSolve, ZeroRhs) {
    const Domain d(2, {1.0, 1.0}, {8, 8});
    const CgResult r = cg_solve(EllipticOperator(d, BoundaryKind::dirichlet, 1.0), ScalarField(d));
    EXPECT_EQ(r.stats.iterations, 0);
    EXPECT_TRUE(r.stats.converged);
    EXPECT_EQ(r.solution.max_abs(), 0.0);
}

TEST(CgSolve, MatchesDenseOracle) {
    std::mt19937_64 rng(11);
    const Domain d(2, {1.0, 1.0}, {8, 8});
    for (int trial = 0; trial < 5; ++trial) {
        const ScalarField w = random_potential(d, rng);
        const ScalarField f = oracle::random_interior(d, rng);
        const CgResult r = cg_solve(EllipticOperator(d, BoundaryKind::dirichlet, w, 0.5), f, 1e-12);
        ScalarField c = w;
        for (double& x : c.values()) {
            x += 0.5;
        }
        const ScalarField ref = oracle::dirichlet_solve(d, c, f, ScalarField(d));
        EXPECT_LE(oracle::rel_diff(r.solution, ref), 1e-10);
    }
}

TEST(CgSolve, ShiftedEigenfunction) {
    const Domain d(2, {1.0, 1.0}, {31, 31});
    const double m2 = 2.0;
    const ScalarField e = sine_mode(d);
    const ScalarField rhs = (2.0 * pi * pi + m2) * e;
    const CgResult r = cg_solve(EllipticOperator(d, BoundaryKind::dirichlet, m2), rhs, 1e-12);
    EXPECT_TRUE(r.stats.converged);
    EXPECT_LT(l2_norm(r.solution - e) / l2_norm(e), 5e-3);
}

TEST(CgSolve, SingularNeumannHasZeroMean) {
    std::mt19937_64 rng(3);
    const Domain d(2, {1.0, 1.0}, {7, 7});
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ScalarField f(d);
    for (double& x : f.values()) {
        x = u(rng);
    }
    f -= ScalarField(d, integrate_volume_closed(f) / d.volume());
    const CgResult r = cg_solve(EllipticOperator(d, BoundaryKind::neumann, 0.0), f, 1e-12);
    EXPECT_TRUE(r.stats.converged);
    EXPECT_NEAR(integrate_volume_closed(r.solution), 0.0, 1e-12);
    EXPECT_LE(oracle::rel_diff(r.solution, oracle::neumann_solve(d, ScalarField(d), f)), 1e-10);
}

TEST(CgSolve, RejectsBadTolerance) {
    const Domain d(2, {1.0, 1.0}, {4, 4});
    EXPECT_THROW(cg_solve(EllipticOperator(d, BoundaryKind::dirichlet, 0.0), ScalarField(d), 0.0), ConfigError);
}

TEST(NeumannCoupled, MatchesOracleForSmallWeights) {
    std::mt19937_64 rng(21);
    const Domain d(2, {1.0, 1.0}, {10, 10});
    for (double scale : {1.0, 1e-3, 1e-6}) {
        ScalarField w = random_potential(d, rng);
        w *= scale;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        ScalarField f(d);
        for (double& x : f.values()) {
            x = u(rng);
        }
        const CgResult r = solve_neumann_coupled(w, f, 1e-13);
        EXPECT_TRUE(r.stats.converged) << scale;
        EXPECT_LE(oracle::rel_diff(r.solution, oracle::neumann_solve(d, w, f)), 1e-9) << scale;
    }
}

TEST(LiftingU, ZeroTrace) {
    const Domain d(2, {1.0, 1.0}, {8, 8});
    const ScalarField U = solve_lifting_U(d, {1.0, 0.5, 0.1}, BoundaryData::constant(d, BoundaryKind::dirichlet, 0.0));
    EXPECT_EQ(U.max_abs(), 0.0);
}

TEST(LiftingU, MaximumPrincipleAndOracle) {
    const Domain d(2, {1.0, 1.0}, {8, 8});
    const PhysicalParams p{1.0, 0.5, 0.3};
    const BoundaryData h = BoundaryData::constant(d, BoundaryKind::dirichlet, 2.0);
    const ScalarField U = solve_lifting_U(d, p, h);
    const double top = sqrt_4pi * p.q * 2.0;
    for (std::size_t i : d.interior_nodes()) {
        EXPECT_GT(U[i], 0.0);
        EXPECT_LT(U[i], top);
    }
    EXPECT_LE(oracle::rel_diff(U, oracle::lifting_U(d, p.m, p.q, h)), 1e-10);
}

TEST(LiftingU, ZeroCouplingGivesZero) {
    const Domain d(2, {1.0, 1.0}, {6, 6});
    const ScalarField U = solve_lifting_U(d, {1.0, 0.5, 0.0}, BoundaryData::constant(d, BoundaryKind::dirichlet, 3.0));
    EXPECT_EQ(U.max_abs(), 0.0);
}

TEST(PhiD, ConstantTrace) {
    const Domain d(2, {1.0, 1.0}, {9, 9});
    const PhysicalParams p{1.0, 0.7, 0.2};
    const ScalarField phi = solve_phi_D(d, BoundaryData::constant(d, BoundaryKind::dirichlet, 3.0), p);
    for (double x : phi.values()) {
        EXPECT_NEAR(x, 0.2 * 3.0 - 0.7, 1e-12);
    }
}

TEST(PhiD, LinearTrace) {
    const Domain d(2, {1.0, 1.0}, {9, 9});
    const PhysicalParams p{1.0, 0.7, 0.2};
    const BoundaryData zeta = BoundaryData::sample(d, BoundaryKind::dirichlet, [](const Point& x) { return x[0]; });
    const ScalarField phi = solve_phi_D(d, zeta, p);
    for (std::size_t i = 0; i < d.node_count(); ++i) {
        EXPECT_NEAR(phi[i], 0.2 * d.position(i)[0] - 0.7, 1e-11);
    }
}

TEST(PhiD, RandomTraceMatchesOracle) {
    std::mt19937_64 rng(17);
    const Domain d(2, {1.0, 1.0}, {16, 16});
    const PhysicalParams p{1.0, 0.4, 0.3};
    const BoundaryData zeta = oracle::random_trace(d, BoundaryKind::dirichlet, rng);
    EXPECT_LE(oracle::rel_diff(solve_phi_D(d, zeta, p), oracle::phi_D(d, p.q, p.omega, zeta)), 1e-10);
}

TEST(PhiD, HarmonicMaximumPrinciple) {
    std::mt19937_64 rng(23);
    const Domain d(2, {1.0, 1.0}, {10, 10});
    for (int trial = 0; trial < 50; ++trial) {
        const BoundaryData zeta = oracle::random_trace(d, BoundaryKind::dirichlet, rng);
        const ScalarField phi = solve_phi_D(d, zeta, {1.0, 0.0, 1.0});
        double lo = 1e300;
        double hi = -1e300;
        for (double z : zeta.values()) {
            lo = std::min(lo, z);
            hi = std::max(hi, z);
        }
        for (std::size_t i : d.interior_nodes()) {
            EXPECT_GE(phi[i], lo - 1e-12);
            EXPECT_LE(phi[i], hi + 1e-12);
        }
    }
}

TEST(PhiN, ZeroFlux) {
    const Domain d(2, {1.0, 1.0}, {8, 8});
    const NeumannLift l = solve_phi_N(d, BoundaryData::constant(d, BoundaryKind::neumann, 0.0), 1.0);
    EXPECT_EQ(l.kappa, 0.0);
    EXPECT_EQ(l.field.max_abs(), 0.0);
}

TEST(PhiN, UnitFluxBalance) {
    const Domain d(2, {1.0, 1.0}, {16, 16});
    const BoundaryData theta = BoundaryData::constant(d, BoundaryKind::neumann, 1.0);
    const NeumannLift l = solve_phi_N(d, theta, 1.0);
    EXPECT_NEAR(l.kappa, 4.0, 1e-12);
    EXPECT_NEAR(integrate_volume_closed(l.field), 0.0, 1e-12);
    // discrete divergence theorem: sum_i W_i (Lap Phi_N)_i = q * boundary integral of theta
    const ScalarField minus_lap = apply(EllipticOperator(d, BoundaryKind::neumann, 0.0), l.field);
    const ScalarField source = neumann_flux_source(d, theta, 1.0);
    double lap_sum = 0.0;
    for (std::size_t i = 0; i < d.node_count(); ++i) {
        lap_sum += d.closed_weight(i) * (source[i] - minus_lap[i]);
    }
    EXPECT_NEAR(lap_sum, integrate_boundary(theta, d), 1e-10);
    EXPECT_LE(oracle::rel_diff(l.field, oracle::phi_N(d, 1.0, theta).field), 1e-9);
}

TEST(PhiN, OddFluxGivesAntisymmetricField) {
    const Domain d(2, {1.0, 1.0}, {12, 12});
    const BoundaryData theta =
        BoundaryData::sample(d, BoundaryKind::neumann, [](const Point& x) { return x[0] - 0.5; });
    const NeumannLift l = solve_phi_N(d, theta, 0.5);
    const int last = d.extent(0) - 1;
    for (int j = 0; j < d.extent(1); ++j) {
        for (int i = 0; i < d.extent(0); ++i) {
            EXPECT_NEAR(l.field[d.index(i, j)], -l.field[d.index(last - i, j)], 1e-10);
        }
    }
}

TEST(PhiN, RandomFluxMatchesOracle) {
    std::mt19937_64 rng(29);
    const Domain d(2, {1.5, 1.0}, {12, 8});
    const BoundaryData theta = oracle::random_trace(d, BoundaryKind::neumann, rng);
    const NeumannLift l = solve_phi_N(d, theta, 0.7);
    const oracle::NeumannLift ref = oracle::phi_N(d, 0.7, theta);
    EXPECT_NEAR(l.kappa, ref.kappa, 1e-13);
    EXPECT_LE(oracle::rel_diff(l.field, ref.field), 1e-9);
}

TEST(Eigenvalue, UnitSquare) {
    const Domain d(2, {1.0, 1.0}, {63, 63});
    const EigenResult e = smallest_eigenvalue(d);
    EXPECT_NEAR(e.lambda / (2.0 * pi * pi), 1.0, 0.01);
    EXPECT_NEAR(e.lambda, oracle::box_eigenvalue(d, {1, 1, 1}), 1e-8);
}

TEST(Eigenvalue, UnitCube) {
    const Domain d(3, {1.0, 1.0, 1.0}, {23, 23, 23});
    EXPECT_NEAR(smallest_eigenvalue(d).lambda / (3.0 * pi * pi), 1.0, 0.02);
}

TEST(Eigenvalue, Rectangle) {
    const Domain d(2, {2.0, 1.0}, {63, 31});
    EXPECT_NEAR(smallest_eigenvalue(d).lambda / (pi * pi * 1.25), 1.0, 0.01);
}

TEST(Eigenvalue, MonotoneInDomain) {
    const double small = smallest_eigenvalue(Domain(2, {1.0, 1.0}, {15, 15})).lambda;
    const double large = smallest_eigenvalue(Domain(2, {2.0, 1.0}, {31, 15})).lambda;
    EXPECT_LT(large, small);
}

TEST(Eigenvalue, DeflatedPairsMatchClosedForm) {
    const Domain d(2, {1.0, 1.0}, {15, 15});
    const std::vector<EigenPair> pairs = dirichlet_eigenpairs(d, 4);
    const std::vector<BoxMode> modes = box_modes(d, 4);
    ASSERT_EQ(pairs.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(pairs[i].lambda, modes[i].discrete, 1e-7 * modes[i].discrete);
        EXPECT_NEAR(modes[i].discrete, oracle::box_eigenvalue(d, modes[i].index), 1e-10);
    }
    EXPECT_NEAR(pairs[1].lambda, pairs[2].lambda, 1e-7 * pairs[1].lambda);
}

TEST(CheckHyp, ZeroCouplingAndFrequency) {
    const Domain d(2, {1.0, 1.0}, {4, 4});
    const HypCheck h = check_hyp({1.5, 0.0, 0.0}, BoundaryData::constant(d, BoundaryKind::dirichlet, 7.0), 10.0);
    EXPECT_TRUE(h.holds);
    EXPECT_DOUBLE_EQ(h.margin, 2.25 + 10.0);
}

TEST(CheckHyp, BoundaryCaseIsStrict) {
    const Domain d(2, {1.0, 1.0}, {4, 4});
    // omega^2 = m^2 + lambda1 exactly in floating point
    const HypCheck h = check_hyp({1.0, 2.0, 0.1}, BoundaryData::constant(d, BoundaryKind::dirichlet, 0.0), 3.0);
    EXPECT_EQ(h.margin, 0.0);
    EXPECT_FALSE(h.holds);
}

TEST(CheckHyp, WorkedExample) {
    const Domain d(2, {1.0, 1.0}, {31, 31});
    const double lambda1 = smallest_eigenvalue(d).lambda;
    const HypCheck h = check_hyp({1.0, 2.0, 0.1}, BoundaryData::constant(d, BoundaryKind::dirichlet, 1.0), lambda1);
    EXPECT_TRUE(h.holds);
    EXPECT_NEAR(h.margin, 1.0 + lambda1 - 1.9 * 1.9, 1e-12);
    EXPECT_NEAR(h.margin, 1.0 + 2.0 * pi * pi - 3.61, 0.05);
}
