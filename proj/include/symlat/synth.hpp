// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/lattice.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace symlat
{

enum class Family
{
    Cubic,
    Bcc,
    Fcc,
    Octet,
};

[[nodiscard]] Family parse_family(std::string_view name);
[[nodiscard]] std::string_view family_name(Family family);
[[nodiscard]] const std::vector<Family>& all_families();

/// Unperturbed family motif on the unit cube:
///   cubic: 8 corners, 12 frame struts
///   bcc:   corners + body center, 8 spokes + 12 frame struts
///   fcc:   corners + 6 face centers, 24 corner-to-face struts
///   octet: fcc nodes, 24 corner-to-face + 12 face-to-face struts
[[nodiscard]] UnitCell family_cell(Family family);

/// Synthetic property labels. These are a deterministic geometric stand-in
/// for measured moduli, not physical values:
///   young   = mean coordination number / 8
///   shear   = total Cartesian strut length / (12 * |det L|^(1/3)),
///             i.e. strut length relative to a cube frame of equal volume
///   poisson = mean over struts of (u_x^2 - (u_y^2 + u_z^2) / 2) for the unit
///             strut direction u; in [-0.5, 1], zero for cubic-symmetric motifs
[[nodiscard]] PropertyVector proxy_properties(const Lattice& lattice);

/// Family motif with identity lattice vectors and every coordinate perturbed
/// by uniform noise in [-jitter, jitter]. Pure function of its arguments.
/// Labels come from proxy_properties. Throws ValidationError on jitter < 0.
[[nodiscard]] Lattice synth_family(Family family, double jitter, std::uint64_t seed);

/// Dataset of `count` lattices cycling through `families`; item k uses seed
/// mix(seed, k). Deterministic.
[[nodiscard]] std::vector<Lattice> synth_dataset(int count, const std::vector<Family>& families, double jitter,
                                                 std::uint64_t seed);

} // namespace symlat
