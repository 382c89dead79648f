// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace symlat
{

void MetricConfig::validate() const
{
    for (auto v: { eps_sym, eps_per, eps_cov, eps_rep })
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError("metric tolerances must be finite and > 0");
}

double symmetry_score(const UnitCell& cell, double eps_sym)
{
    const auto& p = cell.nodes();
    const auto n = p.size();
    if (n < 2)
        throw ValidationError("symmetry score needs at least two nodes");

    auto center = Vec3(Vec3::Zero());
    for (const auto& q: p)
        center += q;
    center /= static_cast<double>(n);

    auto eps_max = 0.0;
    for (const auto& q: p)
        eps_max = std::max(eps_max, (center - q).norm());
    if (eps_max == 0.0)
        return 0.0;

    auto symmetrical = 0;
    auto degree_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        auto error = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            error = std::min(error, (p[i] + p[j] - 2.0 * center).norm());
        if (error < eps_sym)
            ++symmetrical;
        degree_sum += std::max(0.0, (eps_max - error) / eps_max);
    }
    const auto nn = static_cast<double>(n);
    return symmetrical * degree_sum / (nn * nn);
}

double symmetry_validity(std::span<const UnitCell> cells, double eps_sym)
{
    if (cells.empty())
        throw ValidationError("symmetry validity of an empty set");
    auto sum = 0.0;
    for (const auto& c: cells)
        sum += symmetry_score(c, eps_sym);
    return sum / static_cast<double>(cells.size());
}

bool periodicity_valid(const Lattice& lattice, double eps_per)
{
    const auto& p = lattice.cell().nodes();
    for (int d = 0; d < 3; ++d)
    {
        const Vec3 shift = Vec3::Unit(d);
        auto found = false;
        for (std::size_t i = 0; i < p.size() && !found; ++i)
            for (std::size_t j = 0; j < p.size() && !found; ++j)
                found = (p[i] + shift - p[j]).lpNorm<1>() < eps_per;
        if (!found)
            return false;
    }
    return true;
}

double periodicity_validity(std::span<const Lattice> lattices, double eps_per)
{
    if (lattices.empty())
        throw ValidationError("periodicity validity of an empty set");
    const auto passing = std::count_if(lattices.begin(), lattices.end(),
                                       [&](const Lattice& l) { return periodicity_valid(l, eps_per); });
    return static_cast<double>(passing) / static_cast<double>(lattices.size());
}

namespace
{

double mean_nearest(const std::vector<Vec3>& from, const std::vector<Vec3>& to)
{
    auto sum = 0.0;
    for (const auto& a: from)
    {
        auto best = std::numeric_limits<double>::infinity();
        for (const auto& b: to)
            best = std::min(best, (a - b).norm());
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

} // namespace

double structure_distance(const UnitCell& a, const UnitCell& b)
{
    return 0.5 * (mean_nearest(a.nodes(), b.nodes()) + mean_nearest(b.nodes(), a.nodes()));
}

double coverage_recall(std::span<const UnitCell> generated, std::span<const UnitCell> reference, double eps_cov)
{
    if (reference.empty())
        throw ValidationError("coverage recall needs a non-empty reference set");
    auto covered = 0;
    for (const auto& t: reference)
        for (const auto& g: generated)
            if (structure_distance(t, g) < eps_cov)
            {
                ++covered;
                break;
            }
    return static_cast<double>(covered) / static_cast<double>(reference.size());
}

double repeat_ratio(std::span<const UnitCell> generated, double eps_rep)
{
    if (generated.empty())
        throw ValidationError("repeat ratio of an empty set");
    const auto n = generated.size();
    auto used = std::vector<bool>(n, false);
    auto matched = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        if (used[i])
            continue;
        for (std::size_t j = i + 1; j < n; ++j)
        {
            if (used[j])
                continue;
            if (structure_distance(generated[i], generated[j]) < eps_rep)
            {
                used[i] = used[j] = true;
                matched += 2;
                break;
            }
        }
    }
    return static_cast<double>(matched) / static_cast<double>(n);
}

} // namespace symlat
