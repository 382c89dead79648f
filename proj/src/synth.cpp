// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/synth.hpp>

#include <cmath>
#include <random>

namespace symlat
{

namespace
{

std::vector<Vec3> corners()
{
    auto out = std::vector<Vec3>();
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z)
                out.emplace_back(x, y, z);
    return out;
}

// Corner pairs differing in exactly one coordinate.
std::vector<Edge> frame_edges(const std::vector<Vec3>& c)
{
    auto out = std::vector<Edge>();
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j)
            if ((c[i] - c[j]).lpNorm<1>() == 1.0)
                out.push_back({ i, j });
    return out;
}

std::vector<Vec3> face_centers()
{
    return { { 0.5, 0.5, 0.0 }, { 0.5, 0.5, 1.0 }, { 0.5, 0.0, 0.5 },
             { 0.5, 1.0, 0.5 }, { 0.0, 0.5, 0.5 }, { 1.0, 0.5, 0.5 } };
}

} // namespace

Family parse_family(std::string_view name)
{
    if (name == "cubic")
        return Family::Cubic;
    if (name == "bcc")
        return Family::Bcc;
    if (name == "fcc")
        return Family::Fcc;
    if (name == "octet")
        return Family::Octet;
    throw ValidationError("unknown lattice family '" + std::string(name) + "' (expected cubic, bcc, fcc, octet)");
}

std::string_view family_name(Family family)
{
    switch (family)
    {
        case Family::Cubic: return "cubic";
        case Family::Bcc: return "bcc";
        case Family::Fcc: return "fcc";
        case Family::Octet: return "octet";
    }
    return "unknown";
}

const std::vector<Family>& all_families()
{
    static const auto families = std::vector<Family> { Family::Cubic, Family::Bcc, Family::Fcc, Family::Octet };
    return families;
}

UnitCell family_cell(Family family)
{
    auto nodes = corners();
    auto edges = std::vector<Edge>();

    switch (family)
    {
        case Family::Cubic:
            edges = frame_edges(nodes);
            break;

        case Family::Bcc:
            edges = frame_edges(nodes);
            nodes.emplace_back(0.5, 0.5, 0.5);
            for (int i = 0; i < 8; ++i)
                edges.push_back({ i, 8 });
            break;

        case Family::Fcc:
        case Family::Octet:
        {
            const auto faces = face_centers();
            nodes.insert(nodes.end(), faces.begin(), faces.end());
            // A corner touches a face when they share the face's fixed coordinate.
            for (int f = 0; f < 6; ++f)
                for (int i = 0; i < 8; ++i)
                    if ((nodes[i] - nodes[8 + f]).norm() < 0.71)
                        edges.push_back({ i, 8 + f });
            if (family == Family::Octet)
                for (int f = 0; f < 6; ++f)
                    for (int g = f + 1; g < 6; ++g)
                        if ((nodes[8 + f] - nodes[8 + g]).norm() < 0.71)
                            edges.push_back({ 8 + f, 8 + g });
            break;
        }
    }
    return UnitCell(std::move(nodes), std::move(edges));
}

PropertyVector proxy_properties(const Lattice& lattice)
{
    const auto& cell = lattice.cell();
    const auto n = static_cast<double>(cell.size());
    const auto m = static_cast<double>(cell.edges().size());

    const auto coordination = 2.0 * m / n;

    auto length = 0.0;
    auto anisotropy = 0.0;
    for (const auto& e: cell.edges())
    {
        const Vec3 d = lattice.to_cartesian(cell.nodes()[e.b] - cell.nodes()[e.a]);
        const auto len = d.norm();
        length += len;
        if (len > 0.0)
        {
            const Vec3 u = d / len;
            anisotropy += u.x() * u.x() - 0.5 * (u.y() * u.y() + u.z() * u.z());
        }
    }
    if (m > 0)
        anisotropy /= m;

    const auto scale = std::cbrt(std::abs(lattice.vectors().determinant()));
    return PropertyVector::standard(coordination / 8.0, length / (12.0 * scale), anisotropy);
}

Lattice synth_family(Family family, double jitter, std::uint64_t seed)
{
    if (!(jitter >= 0.0) || !std::isfinite(jitter))
        throw ValidationError("jitter must be finite and >= 0");

    const auto base = family_cell(family);
    auto nodes = base.nodes();
    if (jitter > 0.0)
    {
        auto rng = std::mt19937_64(seed);
        auto noise = std::uniform_real_distribution<double>(-jitter, jitter);
        for (auto& p: nodes)
            for (int k = 0; k < 3; ++k)
                p[k] += noise(rng);
    }

    auto lattice = Lattice(Mat3::Identity(), UnitCell(std::move(nodes), base.edges()), std::nullopt,
                           std::string(family_name(family)) + "-" + std::to_string(seed));
    return lattice.with_properties(proxy_properties(lattice));
}

std::vector<Lattice> synth_dataset(int count, const std::vector<Family>& families, double jitter, std::uint64_t seed)
{
    if (count < 0)
        throw ValidationError("dataset size must be >= 0");
    if (families.empty())
        throw ValidationError("at least one family is required");

    auto out = std::vector<Lattice>();
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
    {
        // splitmix64 step keeps per-item seeds decorrelated.
        auto z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        out.push_back(synth_family(families[static_cast<std::size_t>(k) % families.size()], jitter, z));
    }
    return out;
}

} // namespace symlat
