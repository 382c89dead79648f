// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/lattice.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace symlat
{

UnitCell::UnitCell(std::vector<Vec3> nodes, std::vector<Edge> edges):
    nodes_(std::move(nodes)), edges_(std::move(edges))
{
    if (nodes_.empty())
        throw ValidationError("unit cell must contain at least one node");

    for (const auto& p: nodes_)
        if (!p.allFinite())
            throw ValidationError("node coordinates must be finite");

    const auto n = static_cast<int>(nodes_.size());
    for (auto& e: edges_)
    {
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
        {
            std::ostringstream msg;
            msg << "edge (" << e.a << ", " << e.b << ") references a node outside [0, " << n - 1 << "]";
            throw ValidationError(msg.str());
        }
        if (e.a == e.b)
            throw ValidationError("self-loop on node " + std::to_string(e.a));
        if (e.a > e.b)
            std::swap(e.a, e.b);
    }

    std::sort(edges_.begin(), edges_.end());
    const auto dup = std::adjacent_find(edges_.begin(), edges_.end());
    if (dup != edges_.end())
        throw ValidationError("duplicate edge (" + std::to_string(dup->a) + ", " + std::to_string(dup->b) + ")");
}

std::vector<int> UnitCell::degrees() const
{
    auto deg = std::vector<int>(nodes_.size(), 0);
    for (const auto& e: edges_)
    {
        ++deg[e.a];
        ++deg[e.b];
    }
    return deg;
}

std::vector<std::vector<int>> UnitCell::adjacency() const
{
    auto adj = std::vector<std::vector<int>>(nodes_.size());
    for (const auto& e: edges_)
    {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    return adj;
}

UnitCell UnitCell::permuted(const std::vector<int>& perm) const
{
    if (perm.size() != nodes_.size())
        throw ValidationError("permutation size does not match node count");

    auto inverse = std::vector<int>(perm.size(), -1);
    auto nodes = std::vector<Vec3>(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k)
    {
        const auto old = perm[k];
        if (old < 0 || old >= static_cast<int>(perm.size()) || inverse[old] != -1)
            throw ValidationError("not a permutation");
        inverse[old] = static_cast<int>(k);
        nodes[k] = nodes_[old];
    }

    auto edges = std::vector<Edge>();
    edges.reserve(edges_.size());
    for (const auto& e: edges_)
        edges.push_back({ inverse[e.a], inverse[e.b] });
    return UnitCell(std::move(nodes), std::move(edges));
}

bool UnitCell::operator==(const UnitCell& other) const
{
    return nodes_ == other.nodes_ && edges_ == other.edges_;
}

const std::vector<std::string>& PropertyVector::standard_names()
{
    static const auto names = std::vector<std::string> { "young", "shear", "poisson" };
    return names;
}

PropertyVector PropertyVector::standard(double young, double shear, double poisson)
{
    auto values = Eigen::VectorXd(3);
    values << young, shear, poisson;
    return { standard_names(), values };
}

bool PropertyVector::operator==(const PropertyVector& other) const
{
    return names == other.names && values.size() == other.values.size() && values == other.values;
}

Lattice::Lattice(Mat3 vectors, UnitCell cell, std::optional<PropertyVector> properties, std::string name):
    vectors_(std::move(vectors)), cell_(std::move(cell)), properties_(std::move(properties)), name_(std::move(name))
{
    if (!vectors_.allFinite())
        throw ValidationError("lattice vectors must be finite");
    if (std::abs(vectors_.determinant()) <= kSingularTolerance)
        throw ValidationError("lattice vectors are singular (|det L| <= 1e-9)");
    if (properties_)
    {
        if (properties_->names.size() != static_cast<std::size_t>(properties_->values.size()))
            throw ValidationError("property names and values differ in length");
        if (!properties_->values.allFinite())
            throw ValidationError("property values must be finite");
    }
}

Lattice Lattice::from_cell(UnitCell cell)
{
    return Lattice(Mat3::Identity(), std::move(cell));
}

Lattice Lattice::with_properties(std::optional<PropertyVector> properties) const
{
    return Lattice(vectors_, cell_, std::move(properties), name_);
}

Lattice Lattice::with_name(std::string name) const
{
    return Lattice(vectors_, cell_, properties_, std::move(name));
}

Vec3 Lattice::to_cartesian(const Vec3& fractional) const
{
    return vectors_.transpose() * fractional;
}

bool Lattice::operator==(const Lattice& other) const
{
    return vectors_ == other.vectors_ && cell_ == other.cell_ && properties_ == other.properties_
           && name_ == other.name_;
}

std::vector<CellViolation> validate_cell(const UnitCell& cell, int max_nodes)
{
    auto out = std::vector<CellViolation>();
    const auto n = static_cast<int>(cell.size());
    if (n > max_nodes)
        out.push_back({ .kind = CellViolation::Kind::TooManyNodes, .count = n });

    const auto deg = cell.degrees();
    for (int i = 0; i < n; ++i)
        if (deg[i] < 2)
            out.push_back({ .kind = CellViolation::Kind::DanglingNode, .node = i, .degree = deg[i] });
    return out;
}

std::string to_string(const CellViolation& v)
{
    switch (v.kind)
    {
        case CellViolation::Kind::DanglingNode:
            return "dangling node " + std::to_string(v.node) + " (degree " + std::to_string(v.degree) + ")";
        case CellViolation::Kind::TooManyNodes:
            return "too many nodes (" + std::to_string(v.count) + ")";
    }
    return "unknown violation";
}

TiledCloud tile(const Lattice& lattice, const std::array<int, 3>& reps)
{
    for (auto r: reps)
        if (r < 1)
            throw ValidationError("tile repetitions must be >= 1");

    const auto& cell = lattice.cell();
    const auto n = static_cast<int>(cell.size());

    auto raw = std::vector<Vec3>();
    raw.reserve(static_cast<std::size_t>(n) * reps[0] * reps[1] * reps[2]);
    for (int a = 0; a < reps[0]; ++a)
        for (int b = 0; b < reps[1]; ++b)
            for (int c = 0; c < reps[2]; ++c)
                for (const auto& p: cell.nodes())
                    raw.push_back(lattice.to_cartesian(p + Vec3(a, b, c)));

    // Sweep over x-sorted order; merge each point into the earliest
    // (lowest raw index) point within tolerance.
    auto order = std::vector<int>(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return raw[l].x() < raw[r].x(); });

    auto representative = std::vector<int>(raw.size());
    std::iota(representative.begin(), representative.end(), 0);
    auto find = [&](int i) {
        while (representative[i] != i)
            i = representative[i] = representative[representative[i]];
        return i;
    };
    for (std::size_t s = 0; s < order.size(); ++s)
    {
        const auto i = order[s];
        for (std::size_t t = s + 1; t < order.size(); ++t)
        {
            const auto j = order[t];
            if (raw[j].x() - raw[i].x() > kTileMergeTolerance)
                break;
            if ((raw[i] - raw[j]).norm() < kTileMergeTolerance)
            {
                const auto ri = find(i);
                const auto rj = find(j);
                representative[std::max(ri, rj)] = std::min(ri, rj);
            }
        }
    }
    for (std::size_t i = 0; i < raw.size(); ++i)
        representative[i] = find(static_cast<int>(i));

    auto out = TiledCloud();
    auto new_index = std::vector<int>(raw.size(), -1);
    for (std::size_t i = 0; i < raw.size(); ++i)
    {
        const auto root = representative[i];
        if (new_index[root] == -1)
        {
            new_index[root] = static_cast<int>(out.points.size());
            out.points.push_back(raw[root]);
        }
        new_index[i] = new_index[root];
    }

    auto edges = std::set<Edge>();
    auto block = 0;
    for (int a = 0; a < reps[0]; ++a)
        for (int b = 0; b < reps[1]; ++b)
            for (int c = 0; c < reps[2]; ++c, ++block)
                for (const auto& e: cell.edges())
                {
                    auto u = new_index[block * n + e.a];
                    auto v = new_index[block * n + e.b];
                    if (u == v)
                        continue;
                    if (u > v)
                        std::swap(u, v);
                    edges.insert({ u, v });
                }
    out.edges.assign(edges.begin(), edges.end());
    return out;
}

} // namespace symlat
