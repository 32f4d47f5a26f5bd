#pragma once

// Rectangular-box grids, nodal fields and the quadrature rules shared by
// every solver in the library.
//
// The grid is node-centred: axis a carries n_a interior nodes at
// x = i h_a, i = 1..n_a, with h_a = L_a / (n_a + 1), plus one boundary
// layer at i = 0 and i = n_a + 1. Fields store the padded lattice
// (interior and boundary nodes) in one flat array, x fastest.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kgmvar/errors.hpp"

namespace kgmvar {

using Point = std::array<double, 3>;
using NodeIndex = std::array<int, 3>;

/// One of the 2*dim faces of the box. `side` is 0 for the face at x_a = 0
/// and 1 for x_a = L_a; the outward normal is -e_a or +e_a respectively.
struct Face {
    int axis = 0;
    int side = 0;

    [[nodiscard]] double normal_sign() const { return side == 0 ? -1.0 : 1.0; }
};

class Domain {
public:
    Domain(int dim, std::vector<double> lengths, std::vector<int> counts) {
        if (dim != 2 && dim != 3) {
            throw ConfigError("domain: dim must be 2 or 3, got " + std::to_string(dim));
        }
        if (static_cast<int>(lengths.size()) != dim || static_cast<int>(counts.size()) != dim) {
            throw ConfigError("domain: lengths and counts need exactly dim entries");
        }
        auto layout = std::make_shared<Layout>();
        layout->dim = dim;
        for (int a = 0; a < 3; ++a) {
            if (a < dim) {
                if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a])) {
                    throw ConfigError("domain: lengths[" + std::to_string(a) + "] must be positive");
                }
                if (counts[a] < 2) {
                    throw ConfigError("domain: counts[" + std::to_string(a) + "] must be >= 2");
                }
                layout->length[a] = lengths[a];
                layout->count[a] = counts[a];
                layout->extent[a] = counts[a] + 2;
                layout->spacing[a] = lengths[a] / (counts[a] + 1);
            } else {
                layout->length[a] = 1.0;
                layout->count[a] = 1;
                layout->extent[a] = 1;
                layout->spacing[a] = 1.0;
            }
        }
        layout->stride = {1, static_cast<std::size_t>(layout->extent[0]),
                          static_cast<std::size_t>(layout->extent[0]) * layout->extent[1]};
        const std::size_t total = static_cast<std::size_t>(layout->extent[0]) * layout->extent[1] *
                                  layout->extent[2];
        layout->interior_flag.assign(total, 0);
        for (std::size_t f = 0; f < total; ++f) {
            const NodeIndex c = decompose(*layout, f);
            bool interior = true;
            for (int a = 0; a < dim; ++a) {
                interior = interior && c[a] >= 1 && c[a] <= layout->count[a];
            }
            if (interior) {
                layout->interior_flag[f] = 1;
                layout->interior.push_back(f);
            } else {
                layout->boundary.push_back(f);
            }
        }
        layout_ = std::move(layout);
    }

    [[nodiscard]] int dim() const { return layout_->dim; }
    [[nodiscard]] double length(int a) const { return layout_->length[a]; }
    [[nodiscard]] double spacing(int a) const { return layout_->spacing[a]; }
    /// Interior node count along axis a.
    [[nodiscard]] int count(int a) const { return layout_->count[a]; }
    /// Padded node count along axis a (interior plus both boundary layers).
    [[nodiscard]] int extent(int a) const { return layout_->extent[a]; }
    [[nodiscard]] std::size_t stride(int a) const { return layout_->stride[a]; }

    [[nodiscard]] std::size_t node_count() const { return layout_->interior_flag.size(); }
    [[nodiscard]] std::size_t interior_count() const { return layout_->interior.size(); }
    [[nodiscard]] std::size_t boundary_count() const { return layout_->boundary.size(); }
    [[nodiscard]] std::span<const std::size_t> interior_nodes() const { return layout_->interior; }
    /// Boundary nodes in ascending flat order; BoundaryData is aligned with it.
    [[nodiscard]] std::span<const std::size_t> boundary_nodes() const { return layout_->boundary; }

    [[nodiscard]] bool is_interior(std::size_t flat) const { return layout_->interior_flag[flat] != 0; }

    [[nodiscard]] NodeIndex coords(std::size_t flat) const { return decompose(*layout_, flat); }
    [[nodiscard]] std::size_t index(int i, int j, int k = 0) const {
        return static_cast<std::size_t>(i) + layout_->stride[1] * j + layout_->stride[2] * k;
    }
    [[nodiscard]] std::size_t index(const NodeIndex& c) const { return index(c[0], c[1], c[2]); }

    [[nodiscard]] Point position(std::size_t flat) const {
        const NodeIndex c = coords(flat);
        Point x{0.0, 0.0, 0.0};
        for (int a = 0; a < dim(); ++a) {
            x[a] = c[a] * spacing(a);
        }
        return x;
    }

    /// Volume weight of an interior node, prod_a h_a.
    [[nodiscard]] double cell_volume() const {
        double w = 1.0;
        for (int a = 0; a < dim(); ++a) {
            w *= spacing(a);
        }
        return w;
    }

    /// |Omega| = prod_a L_a.
    [[nodiscard]] double volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) {
            v *= length(a);
        }
        return v;
    }

    [[nodiscard]] bool on_face(std::size_t flat, const Face& face) const {
        const int c = coords(flat)[face.axis];
        return face.side == 0 ? c == 0 : c == extent(face.axis) - 1;
    }

    [[nodiscard]] std::vector<Face> faces() const {
        std::vector<Face> out;
        for (int a = 0; a < dim(); ++a) {
            out.push_back({a, 0});
            out.push_back({a, 1});
        }
        return out;
    }

    /// Trapezoid weight of node flat along axis a: h_a inside, h_a/2 on the
    /// two boundary layers.
    [[nodiscard]] double axis_weight(int a, int c) const {
        if (a >= dim()) {
            return 1.0;
        }
        return (c == 0 || c == extent(a) - 1) ? 0.5 * spacing(a) : spacing(a);
    }

    /// Closed (all-node) trapezoid volume weight; sums to |Omega| exactly.
    [[nodiscard]] double closed_weight(std::size_t flat) const {
        const NodeIndex c = coords(flat);
        double w = 1.0;
        for (int a = 0; a < dim(); ++a) {
            w *= axis_weight(a, c[a]);
        }
        return w;
    }

    /// Surface weight of a boundary node on `face`: product of the
    /// tangential trapezoid weights.
    [[nodiscard]] double face_weight(std::size_t flat, const Face& face) const {
        const NodeIndex c = coords(flat);
        double w = 1.0;
        for (int a = 0; a < dim(); ++a) {
            if (a != face.axis) {
                w *= axis_weight(a, c[a]);
            }
        }
        return w;
    }

    friend bool operator==(const Domain& lhs, const Domain& rhs) {
        if (lhs.layout_ == rhs.layout_) {
            return true;
        }
        if (lhs.dim() != rhs.dim()) {
            return false;
        }
        for (int a = 0; a < lhs.dim(); ++a) {
            if (lhs.count(a) != rhs.count(a) || lhs.length(a) != rhs.length(a)) {
                return false;
            }
        }
        return true;
    }

private:
    struct Layout {
        int dim = 2;
        std::array<double, 3> length{};
        std::array<double, 3> spacing{};
        std::array<int, 3> count{};
        std::array<int, 3> extent{};
        std::array<std::size_t, 3> stride{};
        std::vector<char> interior_flag;
        std::vector<std::size_t> interior;
        std::vector<std::size_t> boundary;
    };

    static NodeIndex decompose(const Layout& l, std::size_t flat) {
        NodeIndex c{};
        c[0] = static_cast<int>(flat % l.extent[0]);
        flat /= l.extent[0];
        c[1] = static_cast<int>(flat % l.extent[1]);
        c[2] = static_cast<int>(flat / l.extent[1]);
        return c;
    }

    std::shared_ptr<const Layout> layout_;
};

inline Domain build_domain(int dim, std::vector<double> lengths, std::vector<int> counts) {
    return Domain(dim, std::move(lengths), std::move(counts));
}

inline void require_same_domain(const Domain& a, const Domain& b, const char* where) {
    if (!(a == b)) {
        throw ConfigError(std::string(where) + ": domain mismatch");
    }
}

enum class BoundaryKind { dirichlet, neumann };

/// Per-boundary-node data: a Dirichlet trace or a Neumann flux (outward
/// normal derivative). Values follow Domain::boundary_nodes() order.
class BoundaryData {
public:
    BoundaryData(BoundaryKind kind, std::vector<double> values) : kind_(kind), values_(std::move(values)) {
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw ConfigError("boundary data: non-finite value");
            }
        }
    }

    static BoundaryData constant(const Domain& d, BoundaryKind kind, double value) {
        return BoundaryData(kind, std::vector<double>(d.boundary_count(), value));
    }

    static BoundaryData sample(const Domain& d, BoundaryKind kind, const std::function<double(const Point&)>& fn) {
        std::vector<double> v;
        v.reserve(d.boundary_count());
        for (std::size_t flat : d.boundary_nodes()) {
            v.push_back(fn(d.position(flat)));
        }
        return BoundaryData(kind, std::move(v));
    }

    [[nodiscard]] BoundaryKind kind() const { return kind_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : values_) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    /// Affine map a*g + b, keeping the kind.
    [[nodiscard]] BoundaryData affine(double a, double b) const {
        std::vector<double> v(values_.size());
        std::transform(values_.begin(), values_.end(), v.begin(), [&](double x) { return a * x + b; });
        return BoundaryData(kind_, std::move(v));
    }

    void check_domain(const Domain& d, const char* where) const {
        if (values_.size() != d.boundary_count()) {
            throw ConfigError(std::string(where) + ": boundary data has " + std::to_string(values_.size()) +
                              " values, domain has " + std::to_string(d.boundary_count()) + " boundary nodes");
        }
    }

private:
    BoundaryKind kind_;
    std::vector<double> values_;
};

/// Nodal values on the padded lattice of a Domain.
class ScalarField {
public:
    explicit ScalarField(Domain d, double fill = 0.0) : domain_(std::move(d)), values_(domain_.node_count(), fill) {}

    ScalarField(Domain d, std::vector<double> values) : domain_(std::move(d)), values_(std::move(values)) {
        if (values_.size() != domain_.node_count()) {
            throw ConfigError("field: value count does not match domain node count");
        }
    }

    static ScalarField from_function(const Domain& d, const std::function<double(const Point&)>& fn) {
        ScalarField f(d);
        for (std::size_t i = 0; i < f.size(); ++i) {
            f.values_[i] = fn(d.position(i));
        }
        return f;
    }

    [[nodiscard]] const Domain& domain() const { return domain_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] std::span<double> values() { return values_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] const std::vector<double>& data() const { return values_; }

    double& operator[](std::size_t flat) { return values_[flat]; }
    double operator[](std::size_t flat) const { return values_[flat]; }

    double& at(int i, int j, int k = 0) { return values_[domain_.index(i, j, k)]; }
    [[nodiscard]] double at(int i, int j, int k = 0) const { return values_[domain_.index(i, j, k)]; }

    [[nodiscard]] BoundaryData trace(BoundaryKind kind = BoundaryKind::dirichlet) const {
        std::vector<double> v;
        v.reserve(domain_.boundary_count());
        for (std::size_t flat : domain_.boundary_nodes()) {
            v.push_back(values_[flat]);
        }
        return BoundaryData(kind, std::move(v));
    }

    void set_trace(const BoundaryData& g) {
        g.check_domain(domain_, "set_trace");
        const auto nodes = domain_.boundary_nodes();
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            values_[nodes[b]] = g[b];
        }
    }

    void zero_trace() {
        for (std::size_t flat : domain_.boundary_nodes()) {
            values_[flat] = 0.0;
        }
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : values_) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    [[nodiscard]] double max_abs_interior() const {
        double m = 0.0;
        for (std::size_t flat : domain_.interior_nodes()) {
            m = std::max(m, std::abs(values_[flat]));
        }
        return m;
    }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_domain(domain_, o.domain_, "field +=");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            values_[i] += o.values_[i];
        }
        return *this;
    }

    ScalarField& operator-=(const ScalarField& o) {
        require_same_domain(domain_, o.domain_, "field -=");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            values_[i] -= o.values_[i];
        }
        return *this;
    }

    ScalarField& operator*=(double s) {
        for (double& v : values_) {
            v *= s;
        }
        return *this;
    }

    /// this += s * o
    void axpy(double s, const ScalarField& o) {
        require_same_domain(domain_, o.domain_, "field axpy");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            values_[i] += s * o.values_[i];
        }
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
    friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

private:
    Domain domain_;
    std::vector<double> values_;
};

/// Nodewise map of one or two fields.
template <class Fn>
ScalarField transform(const ScalarField& a, Fn fn) {
    ScalarField out(a.domain());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = fn(a[i]);
    }
    return out;
}

template <class Fn>
ScalarField transform(const ScalarField& a, const ScalarField& b, Fn fn) {
    require_same_domain(a.domain(), b.domain(), "transform");
    ScalarField out(a.domain());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = fn(a[i], b[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quadrature and norms
// ---------------------------------------------------------------------------

/// Sum over interior nodes of f_i * prod_a h_a.
inline double integrate_volume(const ScalarField& f) {
    double s = 0.0;
    for (std::size_t flat : f.domain().interior_nodes()) {
        s += f[flat];
    }
    return s * f.domain().cell_volume();
}

/// Trapezoid rule over every node (boundary layers at half weight per
/// axis). This is the quadrature under which the ghost-node Neumann
/// operator is symmetric, so Neumann-regime integrals use it.
inline double integrate_volume_closed(const ScalarField& f) {
    const Domain& d = f.domain();
    double s = 0.0;
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
        s += d.closed_weight(flat) * f[flat];
    }
    return s;
}

/// Face-wise rule: each boundary node contributes g_j times the product of
/// its tangential spacings on every face it lies on (halved along the
/// face's own rim). Exact for constants; matches the discrete flux
/// balance of the Neumann stencil.
inline double integrate_boundary(const BoundaryData& g, const Domain& d) {
    g.check_domain(d, "integrate_boundary");
    const auto nodes = d.boundary_nodes();
    double s = 0.0;
    for (const Face& face : d.faces()) {
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            if (d.on_face(nodes[b], face)) {
                s += g[b] * d.face_weight(nodes[b], face);
            }
        }
    }
    return s;
}

inline double inner_product(const ScalarField& f, const ScalarField& g) {
    require_same_domain(f.domain(), g.domain(), "inner_product");
    double s = 0.0;
    for (std::size_t flat : f.domain().interior_nodes()) {
        s += f[flat] * g[flat];
    }
    return s * f.domain().cell_volume();
}

inline double inner_product_closed(const ScalarField& f, const ScalarField& g) {
    require_same_domain(f.domain(), g.domain(), "inner_product_closed");
    const Domain& d = f.domain();
    double s = 0.0;
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
        s += d.closed_weight(flat) * f[flat] * g[flat];
    }
    return s;
}

inline double l2_norm(const ScalarField& f) { return std::sqrt(inner_product(f, f)); }

inline double l2_norm_closed(const ScalarField& f) { return std::sqrt(inner_product_closed(f, f)); }

/// L^p norm under the interior quadrature.
inline double lp_norm(const ScalarField& f, double p) {
    double s = 0.0;
    for (std::size_t flat : f.domain().interior_nodes()) {
        s += std::pow(std::abs(f[flat]), p);
    }
    return std::pow(s * f.domain().cell_volume(), 1.0 / p);
}

/// Discrete Dirichlet form: sum over stencil edges touching at least one
/// interior node of (df/h_a)(dg/h_a) * prod h. For fields with zero trace
/// this equals <f, -Lap_h g> under the interior quadrature exactly.
inline double dirichlet_form(const ScalarField& f, const ScalarField& g) {
    require_same_domain(f.domain(), g.domain(), "dirichlet_form");
    const Domain& d = f.domain();
    double s = 0.0;
    for (int a = 0; a < d.dim(); ++a) {
        const std::size_t st = d.stride(a);
        const double inv_h2 = 1.0 / (d.spacing(a) * d.spacing(a));
        double sa = 0.0;
        for (std::size_t flat = 0; flat < f.size(); ++flat) {
            // edge (flat, flat + e_a)
            if (d.coords(flat)[a] == d.extent(a) - 1) {
                continue;
            }
            const std::size_t nb = flat + st;
            if (!d.is_interior(flat) && !d.is_interior(nb)) {
                continue;
            }
            sa += (f[nb] - f[flat]) * (g[nb] - g[flat]);
        }
        s += sa * inv_h2;
    }
    return s * d.cell_volume();
}

inline double h1_seminorm(const ScalarField& f) { return std::sqrt(dirichlet_form(f, f)); }

}  // namespace kgmvar
