#pragma once

// Sparse assembly of stencil operators for the direct solvers (Newton
// refinement and the multi-eigenpair solver).

#include <Eigen/Sparse>

#include <vector>

#include "kgmvar/domain.hpp"

namespace kgmvar {

/// Map from flat node index to row in an unknown vector (-1 if absent).
struct UnknownMap {
    std::vector<std::size_t> nodes;
    std::vector<long> row;

    UnknownMap(const Domain& d, BoundaryKind bc) : row(d.node_count(), -1) {
        if (bc == BoundaryKind::dirichlet) {
            const auto in = d.interior_nodes();
            nodes.assign(in.begin(), in.end());
        } else {
            nodes.resize(d.node_count());
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                nodes[i] = i;
            }
        }
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            row[nodes[r]] = static_cast<long>(r);
        }
    }

    [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Appends the entries of -Lap_h on the unknowns of `map` (columns outside
/// the map are dropped, reflected neighbours use ghost reflection) to `out`, rows offset by row0 and
/// columns by col0.
inline void add_laplacian_triplets(const Domain& d, const UnknownMap& map, Triplets& out, long row0 = 0,
                                   long col0 = 0) {
    for (std::size_t r = 0; r < map.size(); ++r) {
        const std::size_t flat = map.nodes[r];
        const NodeIndex c = d.coords(flat);
        double diag = 0.0;
        for (int a = 0; a < d.dim(); ++a) {
            const double inv_h2 = 1.0 / (d.spacing(a) * d.spacing(a));
            diag += 2.0 * inv_h2;
            const std::size_t st = d.stride(a);
            const int last = d.extent(a) - 1;
            const std::size_t left = c[a] == 0 ? flat + st : flat - st;
            const std::size_t right = c[a] == last ? flat - st : flat + st;
            for (std::size_t nb : {left, right}) {
                const long col = map.row[nb];
                if (col >= 0) {
                    out.emplace_back(row0 + static_cast<long>(r), col0 + col, -inv_h2);
                }
            }
        }
        out.emplace_back(row0 + static_cast<long>(r), col0 + static_cast<long>(r), diag);
    }
}

/// -Lap_h + diag(potential) + shift on the unknowns of the given boundary kind.
inline Eigen::SparseMatrix<double> assemble_operator(const Domain& d, BoundaryKind bc, const ScalarField* potential,
                                                     double shift) {
    const UnknownMap map(d, bc);
    Triplets t;
    add_laplacian_triplets(d, map, t);
    for (std::size_t r = 0; r < map.size(); ++r) {
        const double w = potential != nullptr ? (*potential)[map.nodes[r]] : 0.0;
        t.emplace_back(static_cast<long>(r), static_cast<long>(r), w + shift);
    }
    const auto n = static_cast<long>(map.size());
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

}  // namespace kgmvar
