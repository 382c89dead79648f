// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/lattice.hpp>

#include <span>
#include <vector>

namespace symlat
{

/// Tolerances in fractional units. All must be > 0.
struct MetricConfig
{
    double eps_sym = 0.05;
    double eps_per = 0.05;
    double eps_cov = 0.15;
    double eps_rep = 0.05;

    void validate() const;
};

/// Central-symmetry ratio of one cell: N_S * sum_i s_degree_i / N^2 with the
/// node centroid as center. Node i is symmetrical when some node j (i itself
/// included) satisfies |p_i + p_j - 2 p_c| < eps_sym; s_degree_i is
/// (eps_max - s_error_i) / eps_max floored at 0. Coincident nodes give 0.
/// Throws ValidationError for fewer than two nodes.
[[nodiscard]] double symmetry_score(const UnitCell& cell, double eps_sym);

/// Mean symmetry_score over a non-empty set.
[[nodiscard]] double symmetry_validity(std::span<const UnitCell> cells, double eps_sym);

/// True when every axis d admits a pair with |(p_i + e_d) - p_j|_1 < eps_per.
/// The translation is the unit basis vector because nodes are fractional.
[[nodiscard]] bool periodicity_valid(const Lattice& lattice, double eps_per);

[[nodiscard]] double periodicity_validity(std::span<const Lattice> lattices, double eps_per);

/// Symmetric Chamfer distance on fractional node sets (edges ignored).
[[nodiscard]] double structure_distance(const UnitCell& a, const UnitCell& b);

/// Fraction of reference cells with some generated cell closer than eps_cov.
[[nodiscard]] double coverage_recall(std::span<const UnitCell> generated, std::span<const UnitCell> reference,
                                     double eps_cov);

/// Greedy match-once pairing over (i, j), i < j, in lexicographic order;
/// returns the matched-structure count over the set size.
[[nodiscard]] double repeat_ratio(std::span<const UnitCell> generated, double eps_rep);

} // namespace symlat
