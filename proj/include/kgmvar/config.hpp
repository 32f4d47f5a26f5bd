#pragma once

// Run configuration: a single JSON document describing the domain, physical
// parameters, boundary profiles, regime, nonlinearity and solver settings.
// Parsing is strict (unknown keys and wrong types are errors naming the
// offending field) and every value is checked against the solver
// preconditions before anything is solved.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgmvar/domain.hpp"
#include "kgmvar/errors.hpp"
#include "kgmvar/field_io.hpp"
#include "kgmvar/functional.hpp"
#include "kgmvar/optimize.hpp"
#include "kgmvar/params.hpp"

namespace kgmvar {

using json = nlohmann::ordered_json;

/// Named analytic boundary profile.
///   constant:    value
///   linear:      offset + sum_a gradient[a] x_a
///   sinusoidal:  offset + amplitude prod_a cos(pi modes[a] x_a / L_a)
///   tabulated:   one value per boundary node (Domain::boundary_nodes order)
struct Profile {
    enum class Kind { constant, linear, sinusoidal, tabulated };

    Kind kind = Kind::constant;
    double value = 0.0;
    double offset = 0.0;
    double amplitude = 0.0;
    std::vector<double> gradient;
    std::vector<int> modes;
    std::vector<double> values;

    static Profile constant(double c) {
        Profile p;
        p.value = c;
        return p;
    }

    [[nodiscard]] BoundaryData sample(const Domain& d, BoundaryKind bk, const std::string& field) const {
        switch (kind) {
        case Kind::constant:
            return BoundaryData::constant(d, bk, value);
        case Kind::linear:
            if (static_cast<int>(gradient.size()) != d.dim()) {
                throw ConfigError(field + ".gradient: expected " + std::to_string(d.dim()) + " entries");
            }
            return BoundaryData::sample(d, bk, [&](const Point& x) {
                double s = offset;
                for (int a = 0; a < d.dim(); ++a) {
                    s += gradient[a] * x[a];
                }
                return s;
            });
        case Kind::sinusoidal:
            if (static_cast<int>(modes.size()) != d.dim()) {
                throw ConfigError(field + ".modes: expected " + std::to_string(d.dim()) + " entries");
            }
            return BoundaryData::sample(d, bk, [&](const Point& x) {
                double s = amplitude;
                for (int a = 0; a < d.dim(); ++a) {
                    s *= std::cos(std::numbers::pi * modes[a] * x[a] / d.length(a));
                }
                return offset + s;
            });
        case Kind::tabulated:
            if (values.size() != d.boundary_count()) {
                throw ConfigError(field + ".values: expected " + std::to_string(d.boundary_count()) +
                                  " entries (one per boundary node), got " + std::to_string(values.size()));
            }
            return BoundaryData(bk, values);
        }
        throw ConfigError(field + ": unknown profile");
    }
};

struct DomainSpec {
    int dim = 2;
    std::vector<double> lengths{1.0, 1.0};
    std::vector<int> counts{31, 31};

    [[nodiscard]] Domain build() const { return Domain(dim, lengths, counts); }
};

struct RunConfig {
    DomainSpec domain;
    PhysicalParams params{1.0, 0.5, 0.1};
    Regime regime = Regime::dirichlet;
    Profile h = Profile::constant(1.0);
    Profile zeta = Profile::constant(1.0);
    Profile theta = Profile::constant(0.1);
    NonlinearityModel nonlinearity = NonlinearityModel::power(4.0, 1.0);
    bool multiplicity = false;
    DescentConfig descent;
    MountainPassConfig mountain_pass;
    double solve_tol = 1e-12;
    double newton_tol = 1e-10;
    std::string output = "out";
    unsigned seed = 0;

    /// Throws ConfigError naming the first invalid field.
    void validate() const {
        (void)domain.build();
        params.validate();
        descent.validate();
        mountain_pass.validate();
        if (regime == Regime::nonlinear) {
            nonlinearity.validate();
        }
        if (!(solve_tol > 0.0 && solve_tol < 1e-3)) {
            throw ConfigError("solver.tol: must lie in (0, 1e-3)");
        }
        if (!(newton_tol > 0.0 && newton_tol < 1e-3)) {
            throw ConfigError("solver.newton_tol: must lie in (0, 1e-3)");
        }
        const Domain d = domain.build();
        if (regime != Regime::nonlinear) {
            (void)h.sample(d, BoundaryKind::dirichlet, "boundary.h");
        }
        if (regime == Regime::mixed) {
            (void)theta.sample(d, BoundaryKind::neumann, "boundary.theta");
        } else {
            (void)zeta.sample(d, BoundaryKind::dirichlet, "boundary.zeta");
        }
    }

    /// Sets every axis to n interior nodes.
    void override_grid(int n) {
        if (n < 1) {
            throw ConfigError("--grid: must be >= 1");
        }
        domain.counts.assign(static_cast<std::size_t>(domain.dim), n);
    }
};

namespace detail {

/// Field-level accessor over a JSON object: remembers the path, rejects
/// unknown keys and reports type errors by name.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(where() + ": expected an object");
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    [[nodiscard]] std::string child(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    [[nodiscard]] const json& at(const std::string& key) const {
        seen_.push_back(key);
        return j_.at(key);
    }

    void number(const std::string& key, double& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = at(key);
        if (!v.is_number()) {
            throw ConfigError(child(key) + ": expected a number");
        }
        out = v.get<double>();
        if (!std::isfinite(out)) {
            throw ConfigError(child(key) + ": must be finite");
        }
    }

    void integer(const std::string& key, int& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = at(key);
        if (!v.is_number_integer()) {
            throw ConfigError(child(key) + ": expected an integer");
        }
        out = v.get<int>();
    }

    void boolean(const std::string& key, bool& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = at(key);
        if (!v.is_boolean()) {
            throw ConfigError(child(key) + ": expected true or false");
        }
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = at(key);
        if (!v.is_string()) {
            throw ConfigError(child(key) + ": expected a string");
        }
        out = v.get<std::string>();
    }

    template <class T>
    void array(const std::string& key, std::vector<T>& out) const {
        if (!has(key)) {
            return;
        }
        const json& v = at(key);
        if (!v.is_array()) {
            throw ConfigError(child(key) + ": expected an array");
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const json& e = v[i];
            const bool ok = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
            if (!ok) {
                throw ConfigError(child(key) + "[" + std::to_string(i) + "]: expected " +
                                  (std::is_integral_v<T> ? "an integer" : "a number"));
            }
            out.push_back(e.get<T>());
        }
    }

    /// Call after reading: any key not consumed is an error.
    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
                throw ConfigError(child(key) + ": unknown field");
            }
        }
    }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    mutable std::vector<std::string> seen_;
};

inline Profile parse_profile(const json& j, const std::string& path) {
    if (j.is_number()) {
        return Profile::constant(j.get<double>());
    }
    const Reader r(j, path);
    std::string type;
    r.string("type", type);
    Profile p;
    if (type == "constant") {
        p.kind = Profile::Kind::constant;
        r.number("value", p.value);
    } else if (type == "linear") {
        p.kind = Profile::Kind::linear;
        r.number("offset", p.offset);
        r.array("gradient", p.gradient);
    } else if (type == "sinusoidal") {
        p.kind = Profile::Kind::sinusoidal;
        r.number("offset", p.offset);
        r.number("amplitude", p.amplitude);
        r.array("modes", p.modes);
    } else if (type == "tabulated") {
        p.kind = Profile::Kind::tabulated;
        r.array("values", p.values);
    } else {
        throw ConfigError(path + ".type: expected constant, linear, sinusoidal or tabulated");
    }
    r.finish();
    return p;
}

inline json profile_to_json(const Profile& p) {
    switch (p.kind) {
    case Profile::Kind::constant:
        return {{"type", "constant"}, {"value", p.value}};
    case Profile::Kind::linear:
        return {{"type", "linear"}, {"offset", p.offset}, {"gradient", p.gradient}};
    case Profile::Kind::sinusoidal:
        return {{"type", "sinusoidal"}, {"offset", p.offset}, {"amplitude", p.amplitude}, {"modes", p.modes}};
    case Profile::Kind::tabulated:
        return {{"type", "tabulated"}, {"values", p.values}};
    }
    return {};
}

inline Regime parse_regime(const std::string& s) {
    if (s == "dirichlet") {
        return Regime::dirichlet;
    }
    if (s == "mixed") {
        return Regime::mixed;
    }
    if (s == "nonlinear") {
        return Regime::nonlinear;
    }
    throw ConfigError("regime: expected dirichlet, mixed or nonlinear");
}

}  // namespace detail

/// Parses and validates a configuration document. Missing fields keep
/// their defaults.
inline RunConfig parse_config(const json& j) {
    RunConfig c;
    const detail::Reader top(j, "");
    if (top.has("domain")) {
        const detail::Reader r(top.at("domain"), "domain");
        r.integer("dim", c.domain.dim);
        if (c.domain.dim != 2 && c.domain.dim != 3) {
            throw ConfigError("domain.dim: expected 2 or 3");
        }
        c.domain.lengths.assign(static_cast<std::size_t>(c.domain.dim), 1.0);
        c.domain.counts.assign(static_cast<std::size_t>(c.domain.dim), c.domain.dim == 2 ? 31 : 15);
        r.array("lengths", c.domain.lengths);
        r.array("counts", c.domain.counts);
        if (static_cast<int>(c.domain.lengths.size()) != c.domain.dim) {
            throw ConfigError("domain.lengths: expected " + std::to_string(c.domain.dim) + " entries");
        }
        if (static_cast<int>(c.domain.counts.size()) != c.domain.dim) {
            throw ConfigError("domain.counts: expected " + std::to_string(c.domain.dim) + " entries");
        }
        r.finish();
        try {
            (void)c.domain.build();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("domain: ") + e.what());
        }
    }
    if (top.has("params")) {
        const detail::Reader r(top.at("params"), "params");
        r.number("m", c.params.m);
        r.number("omega", c.params.omega);
        r.number("q", c.params.q);
        r.finish();
    }
    if (top.has("regime")) {
        std::string s;
        top.string("regime", s);
        c.regime = detail::parse_regime(s);
    }
    if (top.has("boundary")) {
        const detail::Reader r(top.at("boundary"), "boundary");
        for (auto [key, target] : {std::pair{"h", &c.h}, {"zeta", &c.zeta}, {"theta", &c.theta}}) {
            if (r.has(key)) {
                *target = detail::parse_profile(r.at(key), r.child(key));
            }
        }
        r.finish();
    }
    if (top.has("nonlinearity")) {
        const detail::Reader r(top.at("nonlinearity"), "nonlinearity");
        double p = c.nonlinearity.p;
        r.number("p", p);
        c.nonlinearity = NonlinearityModel::power(p, c.nonlinearity.mu);
        r.number("mu", c.nonlinearity.mu);
        r.number("s", c.nonlinearity.s);
        r.number("r", c.nonlinearity.r);
        r.boolean("multiplicity", c.multiplicity);
        r.finish();
        try {
            c.nonlinearity.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("nonlinearity: ") + e.what());
        }
    }
    if (top.has("solver")) {
        const detail::Reader r(top.at("solver"), "solver");
        r.number("tol", c.solve_tol);
        r.number("newton_tol", c.newton_tol);
        if (r.has("descent")) {
            const detail::Reader s(r.at("descent"), "solver.descent");
            s.number("grad_tol", c.descent.grad_tol);
            s.integer("max_iters", c.descent.max_iters);
            s.number("armijo_slope", c.descent.armijo_slope);
            s.number("backtrack_factor", c.descent.backtrack_factor);
            s.number("initial_step", c.descent.initial_step);
            s.number("trivial_tol", c.descent.trivial_tol);
            s.finish();
        }
        if (r.has("mountain_pass")) {
            const detail::Reader s(r.at("mountain_pass"), "solver.mountain_pass");
            s.integer("path_points", c.mountain_pass.path_points);
            s.number("deform_tol", c.mountain_pass.deform_tol);
            s.integer("max_deforms", c.mountain_pass.max_deforms);
            s.number("endpoint_scale_start", c.mountain_pass.endpoint_scale_start);
            s.number("armijo_slope", c.mountain_pass.armijo_slope);
            s.number("backtrack_factor", c.mountain_pass.backtrack_factor);
            s.finish();
        }
        r.finish();
    }
    top.string("output", c.output);
    if (top.has("seed")) {
        int seed = 0;
        top.integer("seed", seed);
        if (seed < 0) {
            throw ConfigError("seed: must be >= 0");
        }
        c.seed = static_cast<unsigned>(seed);
    }
    top.finish();
    c.validate();
    return c;
}

inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON (") + e.what() + ")");
    }
    return parse_config(j);
}

/// The complete configuration, every default spelled out, so that the
/// document alone reproduces the run.
inline json to_json(const RunConfig& c) {
    json j;
    j["domain"] = {{"dim", c.domain.dim}, {"lengths", c.domain.lengths}, {"counts", c.domain.counts}};
    j["params"] = {{"m", c.params.m}, {"omega", c.params.omega}, {"q", c.params.q}};
    j["regime"] = to_string(c.regime);
    j["boundary"] = {{"h", detail::profile_to_json(c.h)},
                     {"zeta", detail::profile_to_json(c.zeta)},
                     {"theta", detail::profile_to_json(c.theta)}};
    j["nonlinearity"] = {{"p", c.nonlinearity.p},
                         {"mu", c.nonlinearity.mu},
                         {"s", c.nonlinearity.s},
                         {"r", c.nonlinearity.r},
                         {"multiplicity", c.multiplicity}};
    j["solver"] = {{"tol", c.solve_tol},
                   {"newton_tol", c.newton_tol},
                   {"descent",
                    {{"grad_tol", c.descent.grad_tol},
                     {"max_iters", c.descent.max_iters},
                     {"armijo_slope", c.descent.armijo_slope},
                     {"backtrack_factor", c.descent.backtrack_factor},
                     {"initial_step", c.descent.initial_step},
                     {"trivial_tol", c.descent.trivial_tol}}},
                   {"mountain_pass",
                    {{"path_points", c.mountain_pass.path_points},
                     {"deform_tol", c.mountain_pass.deform_tol},
                     {"max_deforms", c.mountain_pass.max_deforms},
                     {"endpoint_scale_start", c.mountain_pass.endpoint_scale_start},
                     {"armijo_slope", c.mountain_pass.armijo_slope},
                     {"backtrack_factor", c.mountain_pass.backtrack_factor}}}};
    j["output"] = c.output;
    j["seed"] = c.seed;
    return j;
}

namespace detail {

inline void dump_json(std::ostream& os, const json& j, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            os << (first ? "" : ",\n") << pad << json(key).dump() << ": ";
            dump_json(os, value, indent, depth + 1);
            first = false;
        }
        os << '\n' << close << '}';
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            os << (i == 0 ? "" : ",\n") << pad;
            dump_json(os, j[i], indent, depth + 1);
        }
        os << '\n' << close << ']';
        return;
    }
    case json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            os << "null";
            return;
        }
        std::string s = io::format_double(v);
        if (s.find_first_of(".eE") == std::string::npos) {
            s += ".0";
        }
        os << s;
        return;
    }
    default:
        os << j.dump();
    }
}

}  // namespace detail

/// Pretty-printed JSON with every float written to 17 significant digits
/// and a trailing newline. Non-finite numbers become null.
inline std::string dump_json(const json& j) {
    std::ostringstream os;
    detail::dump_json(os, j, 2, 0);
    os << '\n';
    return os.str();
}

}  // namespace kgmvar
