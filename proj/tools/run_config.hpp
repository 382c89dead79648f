// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/agents.hpp>
#include <symlat/evolution.hpp>
#include <symlat/metrics.hpp>
#include <symlat/model.hpp>
#include <symlat/synth.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace symlat::cli
{

struct SynthConfig
{
    int count = 200;
    std::vector<Family> families = all_families();
    double jitter = 0.03;
};

/// Merged configuration of one CLI run. The top-level seed is copied into
/// every seeded component by resolve().
///
///   {"seed": int, "synth": {...}, "model": {...}, "evolution": {...},
///    "metrics": {...}, "loop": {...}}
struct RunConfig
{
    std::uint64_t seed = 7;
    SynthConfig synth;
    ModelConfig model;
    EvolutionConfig evolution;
    MetricConfig metrics;
    LoopConfig loop;

    /// Propagates the seed and validates every section.
    void resolve();
};

/// Overlays `j` onto `base`. Unknown keys and wrongly typed values raise
/// ValidationError naming the offending path.
[[nodiscard]] RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);
[[nodiscard]] nlohmann::json run_config_to_json(const RunConfig& config);

[[nodiscard]] NegationMode parse_negation_mode(const std::string& name);
[[nodiscard]] MassMode parse_mass_mode(const std::string& name);

} // namespace symlat::cli
