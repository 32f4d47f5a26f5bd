// kgmvar: solve, verify, eig and sweep from the command line.
//
// Exit codes: 0 success, 1 solver failure or failed verdict, 2 usage or
// configuration error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgmvar/kgmvar.hpp"

namespace {

kgmvar::RunConfig load_config(const std::string& path) {
    if (path.empty()) {
        return kgmvar::parse_config(std::string("{}"));
    }
    std::ifstream is(path);
    if (!is) {
        throw kgmvar::ConfigError("--config: cannot read '" + path + "'");
    }
    std::ostringstream text;
    text << is.rdbuf();
    return kgmvar::parse_config(text.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational solver for the Klein-Gordon-Maxwell boundary value problem"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    int seed = -1;
    int grid = 0;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    app.add_option("--grid", grid, "interior nodes per axis (overrides the config)")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", quiet, "only print failures and the summary");

    CLI::App* solve = app.add_subcommand("solve", "solve one configured problem and certify the result");

    std::string set = "all";
    CLI::App* verify = app.add_subcommand("verify", "run a named scenario set");
    verify->add_option("set", set, "th1 | mix | nonlin | qlimit | all");

    int k = 3;
    int dim = 2;
    CLI::App* eig = app.add_subcommand("eig", "lowest Dirichlet eigenvalues against the box formulas");
    eig->add_option("--k", k, "number of eigenvalues (at most 10)");
    eig->add_option("--dim", dim, "2 or 3 (unit box; ignored with --config)");

    std::string axis;
    std::vector<double> values;
    CLI::App* sweep = app.add_subcommand("sweep", "solve along one parameter axis and print CSV");
    sweep->add_option("--axis", axis, "q | omega | m | grid")->required();
    sweep->add_option("--values", values, "sweep values")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kgmvar::exit_config;
    }

    try {
        if (*verify) {
            const int g = grid > 0 ? grid : 31;
            const unsigned s = seed >= 0 ? static_cast<unsigned>(seed) : 0u;
            const std::optional<std::filesystem::path> out =
                out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir);
            return kgmvar::cmd_verify(set, g, s, out, std::cout, quiet, kgmvar::thread_budget());
        }

        kgmvar::RunConfig cfg = load_config(config_path);
        if (grid > 0) {
            cfg.override_grid(grid);
        }
        if (seed >= 0) {
            cfg.seed = static_cast<unsigned>(seed);
        }
        if (!out_dir.empty()) {
            cfg.output = out_dir;
        }

        if (*solve) {
            return kgmvar::cmd_solve(cfg, cfg.output, std::cout, quiet);
        }
        if (*eig) {
            if (config_path.empty()) {
                if (dim != 2 && dim != 3) {
                    throw kgmvar::ConfigError("--dim: expected 2 or 3");
                }
                const int n = grid > 0 ? grid : (dim == 2 ? 31 : 15);
                cfg.domain = {dim, std::vector<double>(dim, 1.0), std::vector<int>(dim, n)};
            }
            return kgmvar::cmd_eig(cfg.domain.build(), k, std::cout);
        }
        if (*sweep) {
            return kgmvar::cmd_sweep(cfg, kgmvar::parse_sweep_axis(axis), values, std::cout);
        }
    } catch (const kgmvar::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kgmvar::exit_config;
    } catch (const kgmvar::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kgmvar::exit_solver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kgmvar::exit_solver;
    }
    return kgmvar::exit_config;
}
