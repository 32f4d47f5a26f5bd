#pragma once

// The four command-line operations (solve, verify, eig, sweep) as plain
// functions writing to streams and directories, so that they can be driven
// from tests as well as from the executable.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "kgmvar/config.hpp"
#include "kgmvar/elliptic.hpp"
#include "kgmvar/field_io.hpp"
#include "kgmvar/functional.hpp"
#include "kgmvar/harness.hpp"
#include "kgmvar/optimize.hpp"
#include "kgmvar/spectrum.hpp"

namespace kgmvar {

/// Exit codes shared by every command.
enum ExitCode : int { exit_ok = 0, exit_solver = 1, exit_config = 2 };

struct RunOutcome {
    json report;
    std::optional<ScalarField> u;    ///< matter field u_q = v + U (transformed variables)
    std::optional<ScalarField> phi;  ///< potential phi_q = phi_v + lift (transformed variables)
    int exit_code = exit_ok;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json certificate_json(const Certificate& c) {
    return {{"certified", c.certified},
            {"residual_matter", c.residual.matter},
            {"residual_potential", c.residual.potential},
            {"residual", c.residual.total},
            {"bc_matter", c.bc_matter},
            {"bc_potential", c.bc_potential},
            {"phi_sup", c.phi_sup},
            {"lift_sup", c.lift_sup},
            {"bound_violation", c.bound_violation},
            {"energy_identity", c.energy_identity},
            {"flux_balance_error", c.flux_balance_error}};
}

inline json history_json(const std::vector<double>& h) {
    if (h.empty()) {
        return {{"count", 0}};
    }
    return {{"count", h.size()},
            {"first", h.front()},
            {"last", h.back()},
            {"min", *std::min_element(h.begin(), h.end())},
            {"max", *std::max_element(h.begin(), h.end())}};
}

/// When the spectral condition fails the linear problem may still be
/// solvable as long as omega^2 - m^2 is not a Dirichlet eigenvalue; say so.
inline void hyp_warnings(const Domain& d, const PhysicalParams& p, const HypCheck& hyp, json& warnings) {
    if (hyp.holds) {
        return;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "spectral smallness condition fails (margin %.6g); existence is not guaranteed",
                  hyp.margin);
    warnings.push_back(buf);
    const double shift = p.omega * p.omega - p.m * p.m;
    const int k = static_cast<int>(std::min<std::size_t>(10, d.interior_count()));
    bool resonant = false;
    for (const EigenPair& e : dirichlet_eigenpairs(d, k)) {
        resonant = resonant || std::abs(shift - e.lambda) <= 1e-6 * std::max(1.0, e.lambda);
    }
    if (!resonant) {
        warnings.push_back(
            "omega^2 - m^2 avoids the computed Dirichlet spectrum; a solution may still exist but is not covered "
            "by the existence theory implemented here");
    }
}

inline void exponent_warnings(const RunConfig& c, json& warnings) {
    if (c.regime != Regime::nonlinear) {
        return;
    }
    if (c.domain.dim == 2 && c.nonlinearity.p >= 5.0) {
        warnings.push_back("large exponent p in 2D: mountain-pass paths become stiff, expect slow convergence");
    }
}

}  // namespace detail

/// Runs the regime's pipeline (lift, reduce, optimize, certify). Config
/// errors propagate as ConfigError; solver failures are recorded in the
/// report with exit code 1.
inline RunOutcome run_solve(const RunConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out;
    json& r = out.report;
    r["config"] = to_json(cfg);
    r["warnings"] = json::array();
    detail::exponent_warnings(cfg, r["warnings"]);
    const Domain d = cfg.domain.build();
    json timings;
    try {
        auto t = std::chrono::steady_clock::now();
        std::optional<FunctionalContext> ctx;
        switch (cfg.regime) {
        case Regime::dirichlet:
            ctx = FunctionalContext::dirichlet(d, cfg.params, cfg.h.sample(d, BoundaryKind::dirichlet, "boundary.h"),
                                               cfg.zeta.sample(d, BoundaryKind::dirichlet, "boundary.zeta"),
                                               cfg.solve_tol);
            break;
        case Regime::mixed:
            ctx = FunctionalContext::mixed(d, cfg.params, cfg.h.sample(d, BoundaryKind::dirichlet, "boundary.h"),
                                           cfg.theta.sample(d, BoundaryKind::neumann, "boundary.theta"),
                                           cfg.solve_tol);
            break;
        case Regime::nonlinear:
            ctx = FunctionalContext::nonlinear(d, cfg.params,
                                               cfg.zeta.sample(d, BoundaryKind::dirichlet, "boundary.zeta"),
                                               cfg.nonlinearity, cfg.solve_tol);
            break;
        }
        timings["setup"] = detail::seconds_since(t);
        r["regime"] = to_string(cfg.regime);
        if (ctx->neumann_potential()) {
            r["lambda1"] = smallest_eigenvalue(d).lambda;
            r["hyp_margin"] = nullptr;
            r["mixed_margin"] = ctx->mixed_margin();
            r["kappa"] = ctx->kappa();
        } else {
            const HypCheck hyp = check_hyp(cfg.params, *ctx->zeta(), ctx->lambda1());
            r["lambda1"] = ctx->lambda1();
            r["hyp_margin"] = hyp.margin;
            detail::hyp_warnings(d, cfg.params, hyp, r["warnings"]);
        }

        t = std::chrono::steady_clock::now();
        CriticalPoint cp(d);
        if (cfg.regime != Regime::nonlinear) {
            cp = solve_linear(*ctx, ScalarField(d), cfg.descent, cfg.newton_tol);
        } else if (cfg.multiplicity) {
            MultiplicityResult probe = multiplicity_probe(*ctx, cfg.mountain_pass, cfg.newton_tol);
            for (const std::string& w : probe.warnings) {
                r["warnings"].push_back(w);
            }
            json pts = json::array();
            for (const CriticalPoint& p : probe.points) {
                pts.push_back({{"J", p.J},
                               {"grad_v_norm", h1_seminorm(p.v)},
                               {"u_norm", l2_norm(p.v)},
                               {"residual", p.residual ? p.residual->total : NAN}});
            }
            r["multiplicity"] = pts;
            if (probe.points.empty()) {
                throw SolverError("multiplicity probe found no certified critical point");
            }
            cp = probe.points.front();
        } else {
            const ScalarField e1 = box_mode_field(d, box_modes(d, 1).front());
            const ScalarField endpoint = find_negative_endpoint(*ctx, e1, cfg.mountain_pass);
            cp = newton_refine(*ctx, mountain_pass(*ctx, endpoint, cfg.mountain_pass), cfg.newton_tol);
        }
        timings["optimize"] = detail::seconds_since(t);
        for (const std::string& w : cp.warnings) {
            r["warnings"].push_back(w);
        }

        t = std::chrono::steady_clock::now();
        const Certificate c = certify(*ctx, cp);
        timings["certify"] = detail::seconds_since(t);
        const ScalarField u = cp.v + ctx->U();
        const double u_norm = l2_norm(u);
        r["solution"] = {{"kind", to_string(cp.kind)},
                         {"J", cp.J},
                         {"grad_norm", cp.grad_norm},
                         {"iterations", cp.iterations},
                         {"converged", cp.converged},
                         {"newton_iterations", cp.newton_iterations},
                         {"u_norm", u_norm},
                         {"v_norm", l2_norm(cp.v)},
                         {"J_history", detail::history_json(cp.J_history)}};
        r["certificate"] = detail::certificate_json(c);
        if (ctx->neumann_potential()) {
            const ReducedState st{cp.v, cp.phi, PotentialRegime::neumann, std::nullopt, {}};
            r["flux_balance"] = {{"lhs", neumann_flux_integral(st, ctx->U(), ctx->lift())},
                                 {"rhs", cfg.params.q * integrate_boundary(*ctx->theta(), d)}};
        }
        r["verdicts"] = {{"certified", c.certified}, {"nontrivial", u_norm > nontrivial_threshold}};
        out.u = u;
        out.phi = cp.phi + ctx->lift();
        out.exit_code = c.certified ? exit_ok : exit_solver;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        r["error"] = e.what();
        r["verdicts"] = {{"certified", false}};
        out.exit_code = exit_solver;
    }
    timings["total"] = detail::seconds_since(t0);
    r["timings"] = timings;
    r["exit_code"] = out.exit_code;
    return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) {
        throw ConfigError("cannot open '" + p.string() + "' for writing");
    }
    os << text;
}

/// Writes report.json and the u/phi fields (CSV and structured points).
inline void write_outputs(const RunOutcome& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", dump_json(run.report));
    if (run.u) {
        write_text(dir / "u.csv", io::to_csv(*run.u));
        std::ostringstream vtk;
        io::write_structured_points(vtk, *run.u, "u");
        write_text(dir / "u.vtk", vtk.str());
    }
    if (run.phi) {
        write_text(dir / "phi.csv", io::to_csv(*run.phi));
        std::ostringstream vtk;
        io::write_structured_points(vtk, *run.phi, "phi");
        write_text(dir / "phi.vtk", vtk.str());
    }
}

inline int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log, bool quiet) {
    const RunOutcome run = run_solve(cfg);
    write_outputs(run, out_dir);
    if (!quiet) {
        const json& r = run.report;
        log << "regime " << r.value("regime", to_string(cfg.regime)) << '\n';
        for (const auto& w : r["warnings"]) {
            log << "warning: " << w.get<std::string>() << '\n';
        }
        if (r.contains("error")) {
            log << "error: " << r["error"].get<std::string>() << '\n';
        } else {
            log << "J = " << io::format_double(r["solution"]["J"].get<double>())
                << "  ||u||_2 = " << io::format_double(r["solution"]["u_norm"].get<double>())
                << "  residual = " << io::format_double(r["certificate"]["residual"].get<double>())
                << (r["certificate"]["certified"].get<bool>() ? "  certified" : "  NOT certified") << '\n';
        }
        log << "wrote " << (out_dir / "report.json").string() << '\n';
    }
    return run.exit_code;
}

inline json verdict_json(const Verdict& v) {
    json metrics = json::object();
    for (const auto& [k, x] : v.metrics) {
        metrics[k] = x;
    }
    return {{"name", v.name},
            {"statement", v.statement},
            {"pass", v.pass},
            {"informational", v.informational},
            {"metrics", metrics},
            {"notes", v.notes}};
}

/// Threads for scenario-level parallelism: KGMVAR_THREADS, else the
/// hardware concurrency.
inline int thread_budget() {
    if (const char* env = std::getenv("KGMVAR_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) {
                return n;
            }
        } catch (const std::exception&) {
        }
        throw ConfigError("KGMVAR_THREADS: expected a positive integer");
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs a scenario set and prints a pass/fail table; exit 0 iff every
/// non-informational verdict passes. Writes one JSON document per verdict
/// when `out_dir` is given.
inline int cmd_verify(const std::string& set, int grid, unsigned seed, const std::optional<std::filesystem::path>& out_dir,
                      std::ostream& log, bool quiet, int threads) {
    const std::vector<Scenario> scenarios = default_scenarios(set, grid, seed);
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Verdict> verdicts = run_scenarios(scenarios, threads);
    const double secs = detail::seconds_since(t0);
    bool ok = true;
    for (const Verdict& v : verdicts) {
        ok = ok && v.counts_as_pass();
        if (!quiet || !v.counts_as_pass()) {
            const char* tag = v.pass ? "PASS" : (v.informational ? "INFO" : "FAIL");
            log << std::left << std::setw(6) << tag << std::setw(26) << v.name << v.statement << '\n';
            for (const std::string& n : v.notes) {
                log << "      " << n << '\n';
            }
        }
    }
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        for (const Verdict& v : verdicts) {
            write_text(*out_dir / (v.name + ".json"), dump_json(verdict_json(v)));
        }
    }
    log << (ok ? "all passed" : "FAILURES") << " (" << verdicts.size() << " verdicts, " << std::fixed
        << std::setprecision(1) << secs << " s)\n";
    log.unsetf(std::ios::fixed);
    return ok ? exit_ok : exit_solver;
}

struct EigRow {
    int index = 0;
    double discrete = 0.0;
    double analytic = 0.0;   ///< continuum box eigenvalue pi^2 sum (m_a / L_a)^2
    double closed_form = 0.0;  ///< exact discrete box eigenvalue
    int multiplicity = 1;
};

/// Lowest k discrete Dirichlet eigenvalues next to the box formulas.
inline std::vector<EigRow> eig_table(const Domain& d, int k) {
    if (k < 1 || k > 10) {
        throw ConfigError("eig: k must lie in [1, 10]");
    }
    const std::vector<EigenPair> pairs = dirichlet_eigenpairs(d, k);
    const std::vector<BoxMode> modes = box_modes(d, k);
    std::vector<EigRow> rows;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        EigRow row;
        row.index = static_cast<int>(i) + 1;
        row.discrete = pairs[i].lambda;
        row.analytic = modes[i].continuum;
        row.closed_form = modes[i].discrete;
        rows.push_back(row);
    }
    for (EigRow& row : rows) {
        row.multiplicity = static_cast<int>(std::count_if(rows.begin(), rows.end(), [&](const EigRow& o) {
            return std::abs(o.discrete - row.discrete) <= 1e-8 * row.discrete;
        }));
    }
    return rows;
}

inline int cmd_eig(const Domain& d, int k, std::ostream& log) {
    log << "k,lambda_h,closed_form,analytic,relative_error,multiplicity\n";
    for (const EigRow& r : eig_table(d, k)) {
        log << r.index << ',' << io::format_double(r.discrete) << ',' << io::format_double(r.closed_form) << ','
            << io::format_double(r.analytic) << ',' << io::format_double(std::abs(r.discrete - r.analytic) / r.analytic)
            << ',' << r.multiplicity << '\n';
    }
    return exit_ok;
}

enum class SweepAxis { q, omega, m, grid };

inline SweepAxis parse_sweep_axis(const std::string& s) {
    static const std::map<std::string, SweepAxis> axes = {
        {"q", SweepAxis::q}, {"omega", SweepAxis::omega}, {"m", SweepAxis::m}, {"grid", SweepAxis::grid}};
    const auto it = axes.find(s);
    if (it == axes.end()) {
        throw ConfigError("sweep axis: expected q, omega, m or grid");
    }
    return it->second;
}

/// One solve per value of the axis; CSV rows with the spectral margin, J,
/// ||u||_2, residual and, for Dirichlet q-sweeps, the distance to the q -> 0
/// limit in the original variables.
inline int cmd_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values, std::ostream& csv) {
    if (values.empty()) {
        throw ConfigError("sweep: no values given");
    }
    csv << "value,lambda1,lambda1_error,hyp_margin,J,u_norm,residual,certified,limit_error\n";
    int code = exit_ok;
    for (double value : values) {
        RunConfig cfg = base;
        switch (axis) {
        case SweepAxis::q:
            cfg.params.q = value;
            break;
        case SweepAxis::omega:
            cfg.params.omega = value;
            break;
        case SweepAxis::m:
            cfg.params.m = value;
            break;
        case SweepAxis::grid:
            if (value != std::floor(value) || value < 1.0) {
                throw ConfigError("sweep grid values must be positive integers");
            }
            cfg.override_grid(static_cast<int>(value));
            break;
        }
        const RunOutcome run = run_solve(cfg);
        const json& r = run.report;
        auto num = [&](const json& j) { return j.is_number() ? io::format_double(j.get<double>()) : std::string(); };
        const Domain d = cfg.domain.build();
        const double lambda_box = box_modes(d, 1).front().continuum;
        std::string limit;
        if (axis == SweepAxis::q && cfg.regime == Regime::dirichlet && run.u && value != 0.0) {
            const BoundaryData h = cfg.h.sample(d, BoundaryKind::dirichlet, "boundary.h");
            const EllipticOperator op0(d, BoundaryKind::dirichlet, cfg.params.m * cfg.params.m -
                                                                      cfg.params.omega * cfg.params.omega);
            const CgResult u0 = solve_dirichlet_lift(op0, h);
            require_converged(u0.stats, "sweep u0");
            limit = io::format_double(l2_norm((1.0 / (sqrt_4pi * value)) * *run.u - u0.solution));
        }
        const json none;
        csv << io::format_double(value) << ',' << num(r.value("lambda1", none)) << ','
            << (r.contains("lambda1") ? io::format_double(std::abs(r["lambda1"].get<double>() - lambda_box) / lambda_box)
                                      : std::string())
            << ',' << num(r.value("hyp_margin", none)) << ','
            << (r.contains("solution") ? num(r["solution"]["J"]) : std::string()) << ','
            << (r.contains("solution") ? num(r["solution"]["u_norm"]) : std::string()) << ','
            << (r.contains("certificate") ? num(r["certificate"]["residual"]) : std::string()) << ','
            << (run.exit_code == exit_ok ? 1 : 0) << ',' << limit << '\n';
        code = std::max(code, run.exit_code);
    }
    return code;
}

}  // namespace kgmvar
