// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace symlat
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Undirected strut between two node indices, stored with a < b.
struct Edge
{
    int a = 0;
    int b = 0;

    auto operator<=>(const Edge&) const = default;
};

/// Node-and-strut motif of a lattice. Node coordinates are fractional cell
/// coordinates; values slightly outside [0,1] are kept as given.
class UnitCell
{
  public:
    /// Validates indices, rejects self-loops and duplicate edges, and stores
    /// the edges canonically (a < b, sorted). Throws ValidationError.
    UnitCell(std::vector<Vec3> nodes, std::vector<Edge> edges);

    [[nodiscard]] const std::vector<Vec3>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    [[nodiscard]] std::vector<int> degrees() const;
    [[nodiscard]] std::vector<std::vector<int>> adjacency() const;

    /// Node relabeling: new node k is old node perm[k].
    [[nodiscard]] UnitCell permuted(const std::vector<int>& perm) const;

    bool operator==(const UnitCell& other) const;

  private:
    std::vector<Vec3> nodes_;
    std::vector<Edge> edges_;
};

/// Named property components. Standard order is young, shear, poisson.
struct PropertyVector
{
    std::vector<std::string> names;
    Eigen::VectorXd values;

    static PropertyVector standard(double young, double shear, double poisson);
    static const std::vector<std::string>& standard_names();

    [[nodiscard]] std::size_t size() const noexcept { return names.size(); }
    bool operator==(const PropertyVector& other) const;
};

/// A periodic truss lattice: lattice vectors (rows l1, l2, l3) plus a unit cell.
class Lattice
{
  public:
    /// Throws ValidationError when |det L| <= 1e-9 or properties are non-finite
    /// or mis-sized.
    Lattice(Mat3 vectors, UnitCell cell, std::optional<PropertyVector> properties = std::nullopt,
            std::string name = {});

    /// Identity lattice vectors around a bare cell, as assumed for scaffolds.
    static Lattice from_cell(UnitCell cell);

    [[nodiscard]] const Mat3& vectors() const noexcept { return vectors_; }
    [[nodiscard]] const UnitCell& cell() const noexcept { return cell_; }
    [[nodiscard]] const std::optional<PropertyVector>& properties() const noexcept { return properties_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }

    [[nodiscard]] Lattice with_properties(std::optional<PropertyVector> properties) const;
    [[nodiscard]] Lattice with_name(std::string name) const;

    /// Cartesian position of a fractional point: p1*l1 + p2*l2 + p3*l3.
    [[nodiscard]] Vec3 to_cartesian(const Vec3& fractional) const;

    bool operator==(const Lattice& other) const;

  private:
    Mat3 vectors_;
    UnitCell cell_;
    std::optional<PropertyVector> properties_;
    std::string name_;
};

inline constexpr double kSingularTolerance = 1e-9;
inline constexpr int kDefaultMaxNodes = 100;

struct CellViolation
{
    enum class Kind
    {
        DanglingNode,
        TooManyNodes,
    };

    Kind kind;
    int node = -1;   // DanglingNode: offending node index
    int degree = 0;  // DanglingNode: its degree
    int count = 0;   // TooManyNodes: actual node count

    bool operator==(const CellViolation&) const = default;
};

/// Dataset hygiene: nodes with fewer than two struts and cells with more
/// than max_nodes nodes. Report only; never throws.
[[nodiscard]] std::vector<CellViolation> validate_cell(const UnitCell& cell, int max_nodes = kDefaultMaxNodes);

[[nodiscard]] std::string to_string(const CellViolation& violation);

/// Cartesian point-and-edge cloud produced by periodic tiling.
struct TiledCloud
{
    std::vector<Vec3> points;
    std::vector<Edge> edges;
};

inline constexpr double kTileMergeTolerance = 1e-9;

/// Replicates the cell at p + a*l1 + b*l2 + c*l3 for 0 <= a < reps[0] etc.
/// Points closer than kTileMergeTolerance are merged; edges are remapped and
/// deduplicated. Throws ValidationError on a repetition count below one.
[[nodiscard]] TiledCloud tile(const Lattice& lattice, const std::array<int, 3>& reps);

} // namespace symlat
