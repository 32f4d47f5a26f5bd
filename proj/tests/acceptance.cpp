// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed; nothing here is tuned to pass.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kgmvar/harness.hpp"
#include "kgmvar/reduction.hpp"
#include "kgmvar/spectrum.hpp"
#include "oracle.hpp"

using namespace kgmvar;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    // Records a named check; a failing check fails the criterion.
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

double metric(const Verdict& v, const std::string& key) { return v.get(key).value_or(std::nan("")); }

const Verdict* find(const std::vector<Verdict>& vs, const std::string& name) {
    for (const Verdict& v : vs) {
        if (v.name == name) {
            return &v;
        }
    }
    return nullptr;
}

BoundaryData dir_const(const Domain& d, double c) { return BoundaryData::constant(d, BoundaryKind::dirichlet, c); }
BoundaryData neu_const(const Domain& d, double c) { return BoundaryData::constant(d, BoundaryKind::neumann, c); }

// Energy-identity residuals of every Dirichlet phi_v solve made below.
double worst_energy_identity = 0.0;
int energy_identity_solves = 0;

void record_energy_identity(const ReducedState& s, const ScalarField& U, const ScalarField& PhiD) {
    worst_energy_identity = std::max(worst_energy_identity, verify_energy_identity(s, U, PhiD));
    ++energy_identity_solves;
}

// 1. Discrete Dirichlet eigenvalue against the continuum and the closed form.
void eigenvalue_oracle(Outcome& o) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    {
        const Domain d(2, {1.0, 1.0}, {63, 63});
        const auto t0 = Clock::now();
        const double lambda = dirichlet_eigenpairs(d, 1).front().lambda;
        const double dt = seconds_since(t0);
        const double closed = oracle::box_eigenvalue(d, {1, 1, 1});
        const double rel_cont = std::abs(lambda / (2.0 * pi2) - 1.0);
        const double rel_closed = std::abs(lambda - closed) / closed;
        o.detail << "square 63x63: lambda1=" << lambda << " rel_to_2pi2=" << rel_cont << " rel_to_closed=" << rel_closed
                 << " time=" << dt << "s; ";
        o.check(rel_cont <= 0.01, "square within 1% of 2 pi^2");
        o.check(rel_closed <= 1e-8, "square matches closed form to 1e-8");
        o.check(dt < 10.0, "square under 10 s");
    }
    {
        const Domain d(3, {1.0, 1.0, 1.0}, {23, 23, 23});
        const auto t0 = Clock::now();
        const double lambda = dirichlet_eigenpairs(d, 1).front().lambda;
        const double dt = seconds_since(t0);
        const double closed = oracle::box_eigenvalue(d, {1, 1, 1});
        const double rel_cont = std::abs(lambda / (3.0 * pi2) - 1.0);
        o.detail << "cube 23^3: lambda1=" << lambda << " rel_to_3pi2=" << rel_cont
                 << " rel_to_closed=" << std::abs(lambda - closed) / closed << " time=" << dt << "s";
        o.check(rel_cont <= 0.02, "cube within 2% of 3 pi^2");
        o.check(dt < 10.0, "cube under 10 s");
    }
}

// 2. Iterative solves of U, Phi_D, Phi_N and phi_v against dense elimination.
void dense_equivalence(Outcome& o) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const bool cube = trial % 4 == 3;
        const int dim = cube ? 3 : 2;
        std::vector<int> counts;
        std::vector<double> lengths;
        for (int a = 0; a < dim; ++a) {
            counts.push_back(cube ? 3 + static_cast<int>(4 * unif(rng)) : 6 + static_cast<int>(15 * unif(rng)));
            lengths.push_back(0.5 + 1.5 * unif(rng));
        }
        const Domain d(dim, lengths, counts);
        largest = std::max(largest, d.node_count());
        const PhysicalParams p{0.5 + 1.5 * unif(rng), unif(rng), 0.1 + 0.9 * unif(rng)};
        const BoundaryData h = oracle::random_trace(d, BoundaryKind::dirichlet, rng, 0.2, 1.0);
        const BoundaryData zeta = oracle::random_trace(d, BoundaryKind::dirichlet, rng, -1.0, 2.0);
        const BoundaryData theta = oracle::random_trace(d, BoundaryKind::neumann, rng, -0.5, 1.0);
        const ScalarField v = oracle::random_interior(d, rng, 0.1 + 2.0 * unif(rng));

        const ScalarField U = solve_lifting_U(d, p, h);
        const ScalarField PhiD = solve_phi_D(d, zeta, p);
        const NeumannLift lift = solve_phi_N(d, theta, p.q);
        const ReducedState dirv = solve_phi_v_dirichlet(d, v, U, PhiD);
        const ReducedState neuv = solve_phi_v_neumann(d, v, U, lift.field, p.q, lift.kappa);
        record_energy_identity(dirv, U, PhiD);

        const oracle::NeumannLift ref_lift = oracle::phi_N(d, p.q, theta);
        worst = std::max({worst, oracle::rel_diff(U, oracle::lifting_U(d, p.m, p.q, h)),
                          oracle::rel_diff(PhiD, oracle::phi_D(d, p.q, p.omega, zeta)),
                          oracle::rel_diff(lift.field, ref_lift.field),
                          std::abs(lift.kappa - ref_lift.kappa) / std::max(std::abs(ref_lift.kappa), 1e-300),
                          oracle::rel_diff(dirv.phi, oracle::phi_v_dirichlet(d, v, U, PhiD)),
                          oracle::rel_diff(neuv.phi, oracle::phi_v_neumann(d, v, U, lift.field, p.q, lift.kappa))});
    }
    o.detail << "20 instances, largest grid " << largest << " nodes, worst relative difference " << worst;
    o.check(largest <= 512, "grids at most 512 nodes");
    o.check(worst <= 1e-9, "relative difference <= 1e-9");
}

// 3. Nodewise potential bounds and the sub/supersolution split over random
// (v, Phi_D) Dirichlet instances. Odd trials draw the Phi_D trace from a
// range straddling zero, even trials draw a one-signed trace of random sign.
void phi_bounds(Outcome& o) {
    std::mt19937_64 rng(3033);
    const Domain d(2, {1.0, 1.0}, {16, 16});
    const PhysicalParams p{1.0, 0.0, 1.0};
    std::uniform_real_distribution<double> amp(0.1, 3.0);
    double worst_minmax = 0.0;
    double worst_sup = 0.0;
    double worst_split = 0.0;
    double worst_parts = 0.0;
    double worst_parts_one_signed = 0.0;
    double worst_minmax_one_signed = 0.0;
    int sign_changing = 0;
    int failing = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const BoundaryData h = oracle::random_trace(d, BoundaryKind::dirichlet, rng, 0.0, 0.5);
        const BoundaryData zeta = trial % 2 == 1 ? oracle::random_trace(d, BoundaryKind::dirichlet, rng, -1.0, 2.0)
                                                 : oracle::random_trace(d, BoundaryKind::dirichlet, rng, 0.05, 2.0);
        const ScalarField v = oracle::random_interior(d, rng, amp(rng));
        const ScalarField U = solve_lifting_U(d, p, h);
        ScalarField PhiD = solve_phi_D(d, zeta, p);
        if (trial % 4 == 2) {
            PhiD *= -1.0;
        }
        const ReducedState s = solve_phi_v_dirichlet(d, v, U, PhiD);
        record_energy_identity(s, U, PhiD);
        const PhiBoundsReport b = verify_phi_bounds(s, PhiD);
        const SubSuperReport ss = sub_super_solutions(s, U, PhiD);
        const double parts = std::max(ss.positive_part_error, ss.negative_part_error);
        double lo = 0.0;
        double hi = 0.0;
        for (double x : PhiD.values()) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        const bool changes_sign = lo < 0.0 && hi > 0.0;
        sign_changing += changes_sign ? 1 : 0;
        if (!changes_sign) {
            worst_parts_one_signed = std::max(worst_parts_one_signed, parts);
            worst_minmax_one_signed = std::max(worst_minmax_one_signed, b.minmax_violation);
        }
        failing += (b.minmax_violation > 1e-8 || b.sup_violation > 1e-8 || parts > 1e-8) ? 1 : 0;
        worst_minmax = std::max(worst_minmax, b.minmax_violation);
        worst_sup = std::max(worst_sup, b.sup_violation);
        worst_split = std::max(worst_split, ss.decomposition_error);
        worst_parts = std::max(worst_parts, parts);
    }
    o.detail << "100 instances (" << sign_changing << " with sign-changing Phi_D, " << failing
             << " failing): nodewise violation " << worst_minmax << ", sup violation " << worst_sup
             << ", split error " << worst_split << ", positive/negative-part error " << worst_parts
             << "; one-signed subset (" << 100 - sign_changing << "): nodewise " << worst_minmax_one_signed
             << ", parts " << worst_parts_one_signed << ". ";
    o.check(worst_minmax <= 1e-8, "nodewise bound <= 1e-8");
    o.check(worst_sup <= 1e-8, "sup bound <= 1e-8");
    o.check(worst_split <= 1e-8, "phi = tilde - hat to 1e-8");
    o.check(worst_parts <= 1e-8, "tilde = phi^+ and hat = phi^- to 1e-8");
    if (!o.pass) {
        o.detail << "Where Phi_D changes sign the nodewise bound and the positive/negative-part identification "
                    "do not hold; see README.";
    }
}

// 4. Energy identity on every Dirichlet phi_v solve above plus the
// certified Dirichlet solutions of the scenario runs.
void energy_identity(Outcome& o, const std::vector<double>& certified) {
    double worst = worst_energy_identity;
    for (double x : certified) {
        worst = std::max(worst, x);
    }
    o.detail << energy_identity_solves + certified.size() << " solves, worst relative residual " << worst;
    o.check(energy_identity_solves >= 120, "criteria 2 and 3 ran first");
    o.check(worst <= 1e-8, "relative residual <= 1e-8");
}

double dot_interior(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t i : a.domain().interior_nodes()) {
        s += a[i] * b[i];
    }
    return s;
}

// 5. Central differences of J against the analytic gradient.
void gradient_checks(Outcome& o) {
    const auto t0 = Clock::now();
    const Domain d(2, {1.0, 1.0}, {31, 31});
    std::mt19937_64 rng(5055);
    const BoundaryData h =
        BoundaryData::sample(d, BoundaryKind::dirichlet, [](const Point& x) { return 1.0 + 0.5 * x[0] - 0.3 * x[1]; });
    const BoundaryData zeta =
        BoundaryData::sample(d, BoundaryKind::dirichlet, [](const Point& x) { return 2.0 + x[0] * x[1] - x[1]; });
    const BoundaryData theta = oracle::random_trace(d, BoundaryKind::neumann, rng, -0.5, 1.0);
    const PhysicalParams p{1.0, 0.5, 0.3};
    struct Regime {
        std::string name;
        FunctionalContext ctx;
        double amp;
    };
    const std::vector<Regime> regimes = {
        {"dirichlet", FunctionalContext::dirichlet(d, p, h, zeta), 1.0},
        {"mixed", FunctionalContext::mixed(d, p, h, theta), 1.0},
        {"nonlinear", FunctionalContext::nonlinear(d, p, zeta, NonlinearityModel::power(4.0, 1.0)), 1.5},
    };
    const double eps = 1e-5;
    for (const Regime& r : regimes) {
        double worst = 0.0;
        for (int base = 0; base < 5; ++base) {
            const ScalarField v = oracle::random_interior(d, rng, r.amp);
            const ScalarField g = grad_J(r.ctx, v);
            for (int k = 0; k < 10; ++k) {
                const ScalarField w = oracle::random_interior(d, rng);
                const double fd = (eval_J(r.ctx, v + eps * w) - eval_J(r.ctx, v - eps * w)) / (2.0 * eps);
                const double an = dot_interior(g, w);
                worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-6));
            }
        }
        o.detail << r.name << " worst relative error " << worst << "; ";
        o.check(worst <= 1e-4, r.name + " gradient within 1e-4");
    }
    const double dt = seconds_since(t0);
    o.detail << "time " << dt << "s";
    o.check(dt < 30.0, "under 30 s");
}

// 6. Linear Dirichlet dichotomy.
void th1_dichotomy(Outcome& o, std::vector<double>& energy) {
    const Domain d(2, {1.0, 1.0}, {31, 31});
    const PhysicalParams p{1.0, 0.5, 0.1};
    const Verdict yes = run_th1(d, p, dir_const(d, 1.0), dir_const(d, 1.0));
    const Verdict no = run_th1(d, p, dir_const(d, 0.0), dir_const(d, 1.0), 6066);
    energy.push_back(metric(yes, "energy_identity"));
    o.detail << "h=1: u_norm " << metric(yes, "u_norm") << ", residual " << metric(yes, "residual")
             << ", hyp margin " << metric(yes, "hyp_margin") << "; h=0: max |v| over 5 starts "
             << metric(no, "max_v_norm") << ", identity " << metric(no, "max_identity");
    o.check(metric(yes, "hyp_margin") > 0.0, "hypothesis holds");
    o.check(yes.pass, "existence verdict");
    o.check(metric(yes, "u_norm") > 1e-3, "||u|| > 1e-3");
    o.check(metric(yes, "residual") <= 1e-6, "residual <= 1e-6");
    o.check(no.pass, "nonexistence verdict");
    o.check(metric(no, "starts") == 5.0, "5 random starts");
    o.check(metric(no, "max_v_norm") <= 1e-6, "||v*|| <= 1e-6");
    o.check(metric(no, "max_identity") <= 1e-8, "identity <= 1e-8");
}

// 7. Mapped-back fields solve the original system.
void change_of_variables(Outcome& o, std::vector<double>& energy) {
    const Domain d(2, {1.0, 1.0}, {31, 31});
    const BoundaryData smooth_h =
        BoundaryData::sample(d, BoundaryKind::dirichlet, [](const Point& x) { return 1.0 + 0.5 * x[0] - 0.3 * x[1]; });
    const BoundaryData smooth_zeta = BoundaryData::sample(
        d, BoundaryKind::dirichlet, [](const Point& x) { return 3.0 + std::sin(std::numbers::pi * x[0]) * x[1]; });
    struct Case {
        PhysicalParams p;
        BoundaryData h;
        BoundaryData zeta;
    };
    const std::vector<Case> cases = {
        {{1.0, 0.5, 0.1}, dir_const(d, 1.0), dir_const(d, 1.0)},
        {{1.0, 0.5, 0.3}, smooth_h, smooth_zeta},
        {{2.0, 1.0, -0.2}, smooth_h, dir_const(d, -2.0)},
    };
    double worst = 0.0;
    bool all = true;
    for (const Case& c : cases) {
        const Verdict v = run_change_of_variables(d, c.p, c.h, c.zeta);
        energy.push_back(metric(v, "energy_identity"));
        worst = std::max(worst, metric(v, "original_residual"));
        all = all && v.pass;
    }
    o.detail << cases.size() << " certified Dirichlet solutions, worst original-system residual " << worst;
    o.check(all, "every change-of-variables verdict");
    o.check(worst <= 1e-6, "residual <= 1e-6");
}

// 8. Flux balance on certified mixed solutions, and the h = 0 zero-flux case.
void flux_balance(Outcome& o) {
    const Domain d(2, {1.0, 1.0}, {31, 31});
    std::mt19937_64 rng(8088);
    const std::vector<BoundaryData> thetas = {
        neu_const(d, 0.1),
        BoundaryData::sample(d, BoundaryKind::neumann, [](const Point& x) { return 0.2 * x[0] - 0.05; }),
        oracle::random_trace(d, BoundaryKind::neumann, rng, -0.1, 0.2),
    };
    double worst = 0.0;
    bool all = true;
    for (const BoundaryData& theta : thetas) {
        const std::vector<Verdict> vs = run_thmix(d, {1.0, 0.5, 0.05}, dir_const(d, 1.0), theta);
        const Verdict* v = find(vs, "mixed-existence");
        all = all && v != nullptr && v->pass && metric(*v, "u_norm") > 1e-3;
        if (v != nullptr) {
            worst = std::max(worst, metric(*v, "flux_balance_error"));
        }
    }
    const BoundaryData odd = BoundaryData::sample(d, BoundaryKind::neumann, [](const Point& x) { return x[0] - 0.5; });
    const std::vector<Verdict> zs = run_thmix(d, {1.0, 0.5, 0.05}, dir_const(d, 0.0), odd, 8088);
    const Verdict* z = find(zs, "mixed-trivial");
    const double trivial = z != nullptr ? metric(*z, "max_u_norm") : std::nan("");
    o.detail << thetas.size() << " certified mixed solutions, worst relative flux-balance error " << worst
             << "; h=0 with zero flux: max ||u|| " << trivial;
    o.check(all, "every mixed-existence verdict");
    o.check(worst <= 1e-6, "flux balance to 1e-6");
    o.check(z != nullptr && z->pass && trivial <= 1e-6, "h = 0, zero flux forces ||u|| <= 1e-6");
}

// 9. Continuity in q with Dirichlet data, incompatibility with Neumann data.
void q_limit(Outcome& o) {
    const Domain d(2, {1.0, 1.0}, {31, 31});
    const Verdict dv = run_q_limit_dirichlet(d, 1.0, 0.5, dir_const(d, 1.0), dir_const(d, 1.0));
    const Verdict nv = run_q_limit_neumann(d, 1.0, 0.5, dir_const(d, 1.0), neu_const(d, 1.0));
    const double flux = integrate_boundary(neu_const(d, 1.0), d);
    o.detail << "Dirichlet errors";
    for (const char* q : {"0.4", "0.2", "0.1", "0.05"}) {
        o.detail << " " << metric(dv, std::string("error_q=") + q);
    }
    o.detail << ", worst ratio " << metric(dv, "max_ratio") << "; Neumann incompatibility "
             << metric(nv, "incompatibility") << " vs boundary integral " << flux;
    o.check(dv.pass, "Dirichlet q-limit verdict");
    o.check(metric(dv, "max_ratio") <= 0.7, "consecutive ratio <= 0.7");
    o.check(nv.pass, "Neumann q-limit verdict");
    o.check(std::abs(metric(nv, "incompatibility") - flux) <= 1e-12 * std::abs(flux), "incompatibility equals flux");
    o.check(std::abs(metric(nv, "incompatibility")) > 1e-8, "incompatibility nonzero");
}

// 10. Mountain pass and the multiplicity probe at 31x31.
void mountain_pass_criterion(Outcome& o) {
    const auto t0 = Clock::now();
    const Domain d(2, {1.0, 1.0}, {31, 31});
    const PhysicalParams p{1.0, 0.5, 0.1};
    const BoundaryData zeta = dir_const(d, 1.0);
    const FunctionalContext ctx = FunctionalContext::nonlinear(d, p, zeta, NonlinearityModel::power(4.0, 1.0));
    const std::vector<Verdict> vs = run_thnonlin(d, p, zeta, NonlinearityModel::power(4.0, 1.0));
    const double dt = seconds_since(t0);
    const Verdict* one = find(vs, "nonlinear-existence");
    const Verdict* two = find(vs, "nonlinear-multiplicity");
    o.check(one != nullptr && two != nullptr, "both verdicts present");
    if (one == nullptr || two == nullptr) {
        return;
    }
    const double S = ctx.lift_sup();
    o.detail << "hyp margin " << metric(*one, "hyp_margin") << "; MP: J " << metric(*one, "J") << ", residual "
             << metric(*one, "residual") << "; probe: " << metric(*two, "points") << " points, J1 "
             << metric(*two, "p1_J") << ", J2 " << metric(*two, "p2_J") << ", |grad v1| " << metric(*two, "p1_grad_v")
             << ", |grad v2| " << metric(*two, "p2_grad_v") << ", phi sups " << metric(*two, "p1_phi_sup") << " "
             << metric(*two, "p2_phi_sup") << " vs ||Phi_D|| " << S << "; time " << dt << "s";
    o.check(metric(*one, "hyp_margin") > 0.0, "hypothesis holds");
    o.check(one->pass, "existence verdict");
    o.check(metric(*one, "J") > 0.0, "J > 0");
    o.check(metric(*one, "v_norm") > 1e-3, "nontrivial");
    o.check(metric(*one, "residual") <= 1e-8, "Newton residual <= 1e-8");
    o.check(two->pass, "multiplicity verdict");
    o.check(metric(*two, "points") >= 2.0, "at least 2 points");
    o.check(metric(*two, "p2_J") > metric(*two, "p1_J"), "J2 > J1");
    o.check(metric(*two, "p2_grad_v") > metric(*two, "p1_grad_v"), "|grad v2| > |grad v1|");
    o.check(metric(*two, "p1_phi_sup") <= S + 1e-8 && metric(*two, "p2_phi_sup") <= S + 1e-8, "potential bounds");
    o.check(dt < 180.0, "under 3 min");
}

// 11. The command-line verify suite on default grids.
void verify_all(Outcome& o) {
    const std::filesystem::path out = std::filesystem::temp_directory_path() / "kgmvar_acceptance_verify";
    std::filesystem::remove_all(out);
    const std::string log = (out.parent_path() / "kgmvar_acceptance_verify.log").string();
    const std::string cmd = std::string(KGMVAR_CLI_PATH) + " verify all --out " + out.string() + " > " + log + " 2>&1";
    const auto t0 = Clock::now();
    const int status = std::system(cmd.c_str());
    const double dt = seconds_since(t0);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.detail << "exit code " << code << ", time " << dt << "s, log " << log;
    o.check(code == 0, "exit code 0");
    o.check(dt < 600.0, "under 10 min");
}

}  // namespace

int main() {
    std::cout.precision(4);
    std::vector<double> certified_energy;
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"1 eigenvalue-oracle", eigenvalue_oracle},
        {"2 dense-solve-equivalence", dense_equivalence},
        {"3 potential-bounds", phi_bounds},
        {"6 linear-dirichlet-dichotomy", [&](Outcome& o) { th1_dichotomy(o, certified_energy); }},
        {"7 change-of-variables", [&](Outcome& o) { change_of_variables(o, certified_energy); }},
        {"4 energy-identity", [&](Outcome& o) { energy_identity(o, certified_energy); }},
        {"5 gradient-checks", gradient_checks},
        {"8 neumann-flux-balance", flux_balance},
        {"9 q-limit", q_limit},
        {"10 mountain-pass", mountain_pass_criterion},
        {"11 verify-all", verify_all},
    };
    // criteria 6 and 7 feed criterion 4, so run order differs from report order
    std::vector<std::pair<std::string, Outcome>> results;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            run(o);
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        o.detail << " (" << seconds_since(t0) << "s)";
        std::cerr << "ran criterion " << name << std::endl;
        results.emplace_back(name, std::move(o));
    }
    std::sort(results.begin(), results.end(),
              [](const auto& a, const auto& b) { return std::stoi(a.first) < std::stoi(b.first); });
    for (const auto& [name, o] : results) {
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail.str() << std::endl;
    }
    int failed = 0;
    for (const auto& [name, o] : results) {
        failed += o.pass ? 0 : 1;
    }
    std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
