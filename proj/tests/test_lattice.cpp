// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <symlat/errors.hpp>
#include <symlat/lattice_io.hpp>

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace symlat;
using symlat::test::cell_of;

TEST_CASE("unit cell canonicalizes edges")
{
    const auto c = cell_of({ Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0) }, { { 2, 0 }, { 1, 0 } });
    REQUIRE(c.edges().size() == 2);
    CHECK(c.edges()[0] == Edge{ 0, 1 });
    CHECK(c.edges()[1] == Edge{ 0, 2 });
    CHECK(c.degrees() == std::vector<int>{ 2, 1, 1 });
}

TEST_CASE("unit cell rejects bad edges")
{
    const auto nodes = std::vector<Vec3>{ Vec3(0, 0, 0), Vec3(1, 0, 0) };
    CHECK_THROWS_AS(UnitCell(nodes, { { 0, 0 } }), ValidationError);
    CHECK_THROWS_AS(UnitCell(nodes, { { 0, 2 } }), ValidationError);
    CHECK_THROWS_AS(UnitCell(nodes, { { -1, 1 } }), ValidationError);
    CHECK_THROWS_AS(UnitCell(nodes, { { 0, 1 }, { 1, 0 } }), ValidationError);
}

TEST_CASE("lattice rejects singular vectors")
{
    auto l = Mat3::Identity().eval();
    l.row(2) = l.row(0);
    CHECK_THROWS_AS(Lattice(l, family_cell(Family::Cubic)), ValidationError);
    CHECK_NOTHROW(Lattice(Mat3::Identity() * 2.0, family_cell(Family::Cubic)));
}

TEST_CASE("to_cartesian uses rows of the lattice matrix")
{
    auto l = Mat3();
    l << 2, 0, 0, 1, 3, 0, 0, 0, 4;
    const auto lat = Lattice(l, family_cell(Family::Cubic));
    const auto p = lat.to_cartesian(Vec3(0.5, 1.0, 0.25));
    CHECK(p.isApprox(Vec3(0.5 * 2 + 1.0 * 1, 3.0, 1.0)));
}

TEST_CASE("family motifs have the documented sizes")
{
    CHECK(family_cell(Family::Cubic).size() == 8);
    CHECK(family_cell(Family::Cubic).edges().size() == 12);
    CHECK(family_cell(Family::Bcc).size() == 9);
    CHECK(family_cell(Family::Bcc).edges().size() == 20);
    CHECK(family_cell(Family::Fcc).size() == 14);
    CHECK(family_cell(Family::Fcc).edges().size() == 24);
    CHECK(family_cell(Family::Octet).size() == 14);
    CHECK(family_cell(Family::Octet).edges().size() == 36);
    for (const auto f: all_families())
        CHECK(validate_cell(family_cell(f)).empty());
}

TEST_CASE("validate_cell flags dangling nodes")
{
    // Triangle plus a pendant node (degree 1) and an isolated node (degree 0).
    const auto c = cell_of({ Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0), Vec3(0.5, 0.5, 0.5) },
                           { { 0, 1 }, { 1, 2 }, { 0, 2 }, { 2, 3 } });
    const auto v = validate_cell(c);
    REQUIRE(v.size() == 2);
    CHECK(v[0].kind == CellViolation::Kind::DanglingNode);
    CHECK(v[0].node == 3);
    CHECK(v[0].degree == 1);
    CHECK(v[1].node == 4);
    CHECK(v[1].degree == 0);
    CHECK(to_string(v[0]) == "dangling node 3 (degree 1)");
}

TEST_CASE("validate_cell accepts a closed triangle")
{
    const auto c = cell_of({ Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0) }, { { 0, 1 }, { 1, 2 }, { 0, 2 } });
    CHECK(validate_cell(c).empty());
}

namespace
{

UnitCell ring(int n)
{
    auto nodes = std::vector<Vec3>();
    auto edges = std::vector<Edge>();
    for (int k = 0; k < n; ++k)
    {
        nodes.emplace_back(static_cast<double>(k) / n, 0.5, 0.5);
        edges.push_back({ k, (k + 1) % n });
    }
    return UnitCell(nodes, edges);
}

} // namespace

TEST_CASE("validate_cell node-count limit")
{
    CHECK(validate_cell(ring(100)).empty());
    const auto v = validate_cell(ring(101));
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == CellViolation::Kind::TooManyNodes);
    CHECK(v[0].count == 101);
    CHECK(validate_cell(ring(10), 9).size() == 1);
}

TEST_CASE("BCC scaffold text parses with dangling corners")
{
    const auto c = parse_scaffold_text(symlat::test::read_fixture("bcc_scaffold.txt"));
    CHECK(c.size() == 9);
    CHECK(c.edges().size() == 8);
    CHECK(c.nodes()[8].isApprox(Vec3(0.5, 0.5, 0.5)));
    const auto v = validate_cell(c);
    CHECK(v.size() == 8);
    for (const auto& x: v)
        CHECK(x.degree == 1);
}

TEST_CASE("face-centered scaffold text parses with comments")
{
    const auto c = parse_scaffold_text(symlat::test::read_fixture("face_center_scaffold.txt"));
    CHECK(c.size() == 14);
    CHECK(c.edges().size() == 24);
    CHECK(c.nodes()[13].isApprox(Vec3(1.0, 0.5, 0.5)));
    CHECK(validate_cell(c).empty());
}

TEST_CASE("scaffold text ignores surrounding prose")
{
    const auto text = "Here is a design.\n```\nNode number: 2\ncoordinates:\n(0, 0, 0)\n(0.5,0.5,0.5)\nEdges:\n(0, 1)\n```\n"
                      "Rationale: simple.\n";
    const auto c = parse_scaffold_text(text);
    CHECK(c.size() == 2);
    CHECK(c.edges().size() == 1);
}

TEST_CASE("scaffold text errors")
{
    CHECK_THROWS_AS(parse_scaffold_text("no structure here"), ParseError);
    CHECK_THROWS_AS(parse_scaffold_text("Node number: 2\ncoordinates:\n(0,0,0)\nEdges:\n"), ParseError);
    CHECK_THROWS_AS(parse_scaffold_text("Node number: 2\ncoordinates:\n(0,0,0)\n(1,1,1)\n"), ParseError);
    CHECK_THROWS_AS(parse_scaffold_text("Node number: 2\ncoordinates:\n(0,0)\n(1,1,1)\nEdges:\n"), ParseError);
    CHECK_THROWS_AS(parse_scaffold_text("Node number: 2\ncoordinates:\n(0,0,0)\n(1,1,1)\nEdges:\n(0,5)\n"), ParseError);
    CHECK_THROWS_AS(parse_scaffold_text("Node number: 2\nbanana\n"), ParseError);
}

TEST_CASE("scaffold text round trip")
{
    for (const auto f: all_families())
    {
        const auto c = synth_family(f, 0.05, 4).cell();
        const auto back = parse_scaffold_text(format_scaffold_text(c));
        REQUIRE(back.size() == c.size());
        CHECK(back.edges() == c.edges());
        for (std::size_t i = 0; i < c.size(); ++i)
            CHECK((back.nodes()[i] - c.nodes()[i]).norm() < 1e-9);
    }
}

TEST_CASE("lattice JSON round trip is canonical")
{
    auto l = Mat3();
    l << 1, 0, 0, 0.2, 1.1, 0, 0, 0.1, 0.9;
    const auto lat = Lattice(l, synth_family(Family::Octet, 0.02, 1).cell(), PropertyVector::standard(0.5, 1.2, -0.1),
                             "sample");
    const auto text = serialize_lattice(lat);
    const auto back = parse_lattice(text);
    CHECK(back == lat);
    CHECK(serialize_lattice(back) == text);
    CHECK(text.back() == '\n');
}

TEST_CASE("lattice JSON errors")
{
    CHECK_THROWS_AS(parse_lattice("{"), ParseError);
    CHECK_THROWS_AS(parse_lattice(R"({"nodes": [[0,0,0]], "edges": []})"), ValidationError);
    CHECK_THROWS_AS(
        parse_lattice(R"({"lattice_vectors": [[1,0,0],[0,1,0],[0,0,1]], "nodes": [[0,0,0]], "edges": [[0,3]]})"),
        ValidationError);
    CHECK_THROWS_AS(
        parse_lattice(R"({"lattice_vectors": [[1,0,0],[1,0,0],[0,0,1]], "nodes": [[0,0,0],[1,1,1]], "edges": [[0,1]]})"),
        ValidationError);
}

TEST_CASE("tile with one repetition is congruent to the cell")
{
    const auto lat = synth_family(Family::Bcc, 0.03, 2);
    const auto cloud = tile(lat, { 1, 1, 1 });
    REQUIRE(cloud.points.size() == lat.cell().size());
    CHECK(cloud.edges == lat.cell().edges());
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
        CHECK((cloud.points[i] - lat.to_cartesian(lat.cell().nodes()[i])).norm() < 1e-12);
}

TEST_CASE("tile merges shared faces of the cubic frame")
{
    const auto lat = Lattice::from_cell(family_cell(Family::Cubic));
    const auto cloud = tile(lat, { 2, 2, 2 });
    CHECK(cloud.points.size() == 27);
    CHECK(cloud.edges.size() == 54);
    const auto strip = tile(lat, { 3, 1, 1 });
    CHECK(strip.points.size() == 16);
    CHECK(strip.edges.size() == 4 * 3 + 4 * 4);
    CHECK_THROWS_AS(tile(lat, { 0, 1, 1 }), ValidationError);
}

TEST_CASE("relabeling preserves the degree multiset")
{
    auto rng = std::mt19937_64(3);
    for (const auto f: all_families())
    {
        const auto c = family_cell(f);
        auto perm = std::vector<int>(c.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto p = c.permuted(perm);
        auto a = c.degrees();
        auto b = p.degrees();
        for (std::size_t k = 0; k < perm.size(); ++k)
            CHECK(b[k] == a[static_cast<std::size_t>(perm[k])]);
        CHECK(p.edges().size() == c.edges().size());
    }
}

TEST_CASE("synthetic generation is deterministic")
{
    const auto a = synth_dataset(12, all_families(), 0.05, 9);
    const auto b = synth_dataset(12, all_families(), 0.05, 9);
    CHECK(a == b);
    CHECK(synth_family(Family::Fcc, 0.05, 1) == synth_family(Family::Fcc, 0.05, 1));
    CHECK_FALSE(synth_family(Family::Fcc, 0.05, 1) == synth_family(Family::Fcc, 0.05, 2));
    CHECK_THROWS_AS(synth_family(Family::Fcc, -0.1, 1), ValidationError);
    CHECK_THROWS_AS(parse_family("hexagonal"), ValidationError);
}

TEST_CASE("proxy properties of canonical motifs")
{
    // young = mean coordination / 8; poisson vanishes for cubic symmetry.
    const auto cubic = proxy_properties(Lattice::from_cell(family_cell(Family::Cubic)));
    CHECK(cubic.values[0] == doctest::Approx(3.0 / 8.0));
    CHECK(cubic.values[1] == doctest::Approx(1.0));
    CHECK(std::abs(cubic.values[2]) < 1e-12);
    const auto octet = proxy_properties(Lattice::from_cell(family_cell(Family::Octet)));
    CHECK(octet.values[0] == doctest::Approx(2.0 * 36.0 / 14.0 / 8.0));
    CHECK(std::abs(octet.values[2]) < 1e-12);
}
