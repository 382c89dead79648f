// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/lattice.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace symlat
{

/// Lattice JSON schema:
///   {"name": str?, "lattice_vectors": [[f;3];3], "nodes": [[f;3];N],
///    "edges": [[i,j];M], "properties": {"young": f, "shear": f, "poisson": f, ...}?}
/// Throws ParseError on malformed JSON and ValidationError on schema or
/// domain violations (bad index, singular L).
[[nodiscard]] Lattice parse_lattice(std::string_view text);
[[nodiscard]] Lattice lattice_from_json(const nlohmann::json& j);

/// Canonical form: sorted keys, edges as sorted [i, j] with i < j, two-space
/// indentation and a trailing newline.
[[nodiscard]] std::string serialize_lattice(const Lattice& lattice);
[[nodiscard]] nlohmann::json lattice_to_json(const Lattice& lattice);

[[nodiscard]] nlohmann::json properties_to_json(const PropertyVector& properties);
/// Known names come first in standard order, extra names follow alphabetically.
[[nodiscard]] PropertyVector properties_from_json(const nlohmann::json& j);

[[nodiscard]] Lattice read_lattice_file(const std::filesystem::path& path);
void write_lattice_file(const std::filesystem::path& path, const Lattice& lattice);

/// Parses the plain-text scaffold block emitted by the Designer:
///
///     Node number: 9
///     coordinates:                      (or "Node coordinates (fractional):")
///     (0,0,0)                           # optional trailing comment
///     ...
///     Edges:
///     (0,8)
///
/// Prose before "Node number" and after the edge list is ignored.
[[nodiscard]] UnitCell parse_scaffold_text(std::string_view text);

/// Renders a cell in the same grammar parse_scaffold_text accepts.
[[nodiscard]] std::string format_scaffold_text(const UnitCell& cell);

} // namespace symlat
