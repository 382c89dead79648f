// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/chat_client.hpp>
#include <symlat/evolution.hpp>
#include <symlat/lattice.hpp>
#include <symlat/model.hpp>

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace symlat
{

struct RenderedPrompt
{
    std::string system;
    std::string user;
};

[[nodiscard]] RenderedPrompt designer_prompt(const std::string& request);
[[nodiscard]] RenderedPrompt supervisor_scaffold_prompt(const UnitCell& scaffold, const std::string& request,
                                                        const PropertyVector& predicted);
[[nodiscard]] RenderedPrompt supervisor_structure_prompt(const Lattice& lattice, const std::string& request,
                                                         const PropertyVector& predicted);

/// Renders the designer prompt, sends it and parses the scaffold. On a parse
/// failure the request is repeated with a format reminder up to `retries`
/// times; afterwards ParseError names the last parse error.
[[nodiscard]] UnitCell designer_step(const std::string& request, ChatClient& client, int retries = 2);

enum class EvaluationKind
{
    Scaffold,  // expects improved_prompt
    Structure, // expects improved_properties
};

struct EvaluationResponse
{
    double score = 0.0;
    std::optional<std::string> improved_prompt;
    std::optional<PropertyVector> improved_properties;
};

/// Parses the first {...} block of a reply. Throws ValidationError for a
/// score outside [0,1] and ParseError for malformed JSON or a missing field.
[[nodiscard]] EvaluationResponse parse_evaluation(const std::string& reply, EvaluationKind kind);

[[nodiscard]] EvaluationResponse supervisor_eval_scaffold(const UnitCell& scaffold, const std::string& request,
                                                          const PropertyVector& predicted, ChatClient& client,
                                                          int retries = 2);
[[nodiscard]] EvaluationResponse supervisor_eval_structure(const Lattice& lattice, const std::string& request,
                                                           const PropertyVector& predicted, ChatClient& client,
                                                           int retries = 2);

/// Indices of the k nearest dataset items to `target` by Euclidean distance
/// on max-min normalized properties (statistics fitted on the admitted
/// items), closest first, ties broken by lower index. Items failing
/// validate_cell are skipped. Throws ValidationError when no item qualifies.
[[nodiscard]] std::vector<std::size_t> knn_indices(const PropertyVector& target, std::span<const Lattice> dataset,
                                                   int k = 1);

/// Encoding of the nearest admitted dataset item.
[[nodiscard]] LatentState knn_init(const PropertyVector& target, std::span<const Lattice> dataset,
                                   const ModelParams& params, int k = 1);

struct LoopConfig
{
    double tau_ds = 0.6;
    double tau_gs = 0.6;
    int max_iters = 3;
    int knn_k = 1;
    int retries = 2;
    std::uint64_t seed = 0;
    Operator op = Operator::Mix;
    EvolutionConfig evolution;

    void validate() const;
};

struct DesignOutcome
{
    Lattice lattice;
    PropertyVector properties;
    UnitCell scaffold;
    double design_score = 0.0;
    double generation_score = 0.0;
    bool design_below_threshold = false;
    bool generation_below_threshold = false;
    nlohmann::json trace;
};

/// Designer/Supervisor scaffold refinement, then Generator/Supervisor
/// structure refinement (nearest-neighbour initialization, operator evolution
/// against the scaffold, prediction, evaluation). Each phase runs at most
/// max_iters iterations and keeps the best-scoring candidate.
[[nodiscard]] DesignOutcome run_design_loop(const std::string& request, std::span<const Lattice> dataset,
                                            const ModelParams& params, const LoopConfig& config, ChatClient& client);

/// Trace serialization: two-space indentation, numbers rounded to six
/// significant digits, trailing newline.
[[nodiscard]] std::string dump_trace(const nlohmann::json& trace);

} // namespace symlat
