// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library code they check.
#pragma once

#include <symlat/lattice.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace symlat::oracle
{

struct Moments
{
    double mean = 0.0;
    double var = 0.0;
};

/// Mean and variance of the density proportional to exp(log_density(x)) on
/// [lo, hi] by composite Simpson quadrature. The log density is shifted by
/// its maximum on the grid before exponentiation.
inline Moments quadrature_moments(const std::function<double(double)>& log_density, double lo, double hi,
                                  int intervals = 20000)
{
    if (intervals % 2 != 0)
        ++intervals;
    const auto h = (hi - lo) / intervals;
    auto logs = std::vector<double>(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k)
        logs[static_cast<std::size_t>(k)] = log_density(lo + k * h);
    const auto peak = *std::max_element(logs.begin(), logs.end());
    auto z = 0.0;
    auto m1 = 0.0;
    auto m2 = 0.0;
    for (int k = 0; k <= intervals; ++k)
    {
        const auto w = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        const auto x = lo + k * h;
        const auto p = std::exp(logs[static_cast<std::size_t>(k)] - peak);
        z += w * p;
        m1 += w * p * x;
        m2 += w * p * x * x;
    }
    const auto mean = m1 / z;
    return { mean, m2 / z - mean * mean };
}

inline double normal_log_density(double x, double mean, double sd)
{
    const auto u = (x - mean) / sd;
    return -0.5 * u * u - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

/// Minimum-cost permutation by exhaustive search; result[i] is the column of row i.
inline std::vector<int> brute_force_assignment(const Eigen::MatrixXd& cost)
{
    auto perm = std::vector<int>(static_cast<std::size_t>(cost.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    auto best = perm;
    auto best_cost = std::numeric_limits<double>::max();
    do
    {
        auto total = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i)
            total += cost(static_cast<Eigen::Index>(i), perm[i]);
        if (total < best_cost)
        {
            best_cost = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Direct evaluation of the central-symmetry ratio.
inline double symmetry(const std::vector<Vec3>& p, double eps)
{
    const auto n = static_cast<double>(p.size());
    const Vec3 c = std::accumulate(p.begin(), p.end(), Vec3(Vec3::Zero())) / n;
    auto eps_max = 0.0;
    for (const auto& q: p)
        eps_max = std::max(eps_max, (q - c).norm());
    auto count = 0.0;
    auto sum = 0.0;
    for (const auto& a: p)
    {
        auto best = std::numeric_limits<double>::max();
        for (const auto& b: p)
            best = std::min(best, (a + b - 2 * c).norm());
        count += best < eps ? 1.0 : 0.0;
        sum += std::max(0.0, 1.0 - best / eps_max);
    }
    return count * sum / (n * n);
}

inline double chamfer(const UnitCell& a, const UnitCell& b)
{
    auto one_way = [](const UnitCell& x, const UnitCell& y) {
        auto total = 0.0;
        for (const auto& p: x.nodes())
        {
            auto best = std::numeric_limits<double>::max();
            for (const auto& q: y.nodes())
                best = std::min(best, (p - q).norm());
            total += best;
        }
        return total / static_cast<double>(x.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

inline double coverage(const std::vector<UnitCell>& gen, const std::vector<UnitCell>& ref, double eps)
{
    auto hit = 0;
    for (const auto& r: ref)
    {
        auto found = false;
        for (const auto& g: gen)
            found = found || chamfer(g, r) < eps;
        hit += found ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(ref.size());
}

/// Greedy match-once pairing in lexicographic (i, j) order.
inline double repeat(const std::vector<UnitCell>& set, double eps)
{
    auto used = std::vector<bool>(set.size(), false);
    auto matched = 0;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j)
            if (!used[i] && !used[j] && chamfer(set[i], set[j]) < eps)
            {
                used[i] = used[j] = true;
                matched += 2;
            }
    return static_cast<double>(matched) / static_cast<double>(set.size());
}

/// Pair scan for every axis: some (i, j) with |(p_i + e_d) - p_j|_1 < eps.
inline bool periodic(const UnitCell& c, double eps)
{
    for (int d = 0; d < 3; ++d)
    {
        auto found = false;
        for (const auto& a: c.nodes())
            for (const auto& b: c.nodes())
                found = found || (a + Vec3::Unit(d) - b).lpNorm<1>() < eps;
        if (!found)
            return false;
    }
    return true;
}

/// Central difference of f at x along coordinate k.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                 Eigen::Index k, double h)
{
    const auto x0 = x[k];
    x[k] = x0 + h;
    const auto fp = f(x);
    x[k] = x0 - h;
    const auto fm = f(x);
    return (fp - fm) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6)
{
    return std::abs(analytic - numeric) / std::max({ floor, std::abs(analytic), std::abs(numeric) });
}

/// Spearman rank correlation without tie correction (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y)
{
    auto ranks = [](const std::vector<double>& v) {
        auto idx = std::vector<std::size_t>(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        auto r = std::vector<double>(v.size());
        for (std::size_t k = 0; k < idx.size();)
        {
            auto e = k;
            while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[k]])
                ++e;
            for (auto t = k; t <= e; ++t)
                r[idx[t]] = 0.5 * static_cast<double>(k + e) + 1.0;
            k = e + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const auto n = static_cast<double>(x.size());
    const auto mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const auto my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    auto sxy = 0.0;
    auto sxx = 0.0;
    auto syy = 0.0;
    for (std::size_t k = 0; k < rx.size(); ++k)
    {
        sxy += (rx[k] - mx) * (ry[k] - my);
        sxx += (rx[k] - mx) * (rx[k] - mx);
        syy += (ry[k] - my) * (ry[k] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace symlat::oracle
