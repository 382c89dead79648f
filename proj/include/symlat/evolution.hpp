// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/gaussian.hpp>
#include <symlat/model.hpp>
#include <symlat/transport.hpp>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace symlat
{

enum class Operator
{
    Union,
    Mix,
    Intersect,
    Negate,
};

/// Throws ValidationError naming the valid operators.
[[nodiscard]] Operator parse_operator(std::string_view name);
[[nodiscard]] std::string_view operator_name(Operator op);

struct LossWeights
{
    double semantic = 1.0;  // w_s
    double alignment = 1.0; // w_pe
    double unmatched = 0.5; // w_r
    double prior = 1e-3;    // w_prior
};

struct EvolutionConfig
{
    LossWeights weights;
    double learning_rate = 0.05;
    int iterations = 300;
    double tau_o = 0.1;
    double lambda = 0.5; // mix
    double alpha = 1.0;  // negate: preservation strength
    double beta = 0.5;   // negate: suppression strength
    NegationMode negation = NegationMode::Strict;
    SinkhornConfig sinkhorn;                 // plan for mix / intersect / negate
    MassMode union_mass = MassMode::Partial; // plan mass mode for union
    bool recompute_plan = false;

    void validate() const;
};

/// Operator-induced target. Node targets for the alignment term are indexed
/// per pair (i, j): union uses the scaffold node j, the other operators use
/// op(source_i, Pi-barycenter of the scaffold for row i) for every j.
struct OperatorTarget
{
    Operator op = Operator::Mix;
    DiagGaussian semantic = DiagGaussian::standard(1);
    std::vector<DiagGaussian> position;
    std::vector<DiagGaussian> edge;
    bool indexed_by_scaffold = false;
    TransportPlan plan;
    std::vector<int> unmatched; // source nodes with r_i < tau_o
    std::vector<int> appended;  // scaffold nodes joined after optimization (union)
    std::optional<UnionTarget> union_measure;
    LatentState snapshot{ DiagGaussian::standard(1), DiagGaussian::standard(1), {}, {} }; // frozen source
    LatentState scaffold{ DiagGaussian::standard(1), DiagGaussian::standard(1), {}, {} };

    [[nodiscard]] const DiagGaussian& position_target(std::size_t i, std::size_t j) const
    {
        return position[indexed_by_scaffold ? j : i];
    }
    [[nodiscard]] const DiagGaussian& edge_target(std::size_t i, std::size_t j) const
    {
        return edge[indexed_by_scaffold ? j : i];
    }
};

/// Throws NegationInfeasible when a negate target has non-positive precision
/// in Strict mode.
[[nodiscard]] OperatorTarget build_target(const LatentState& source, const LatentState& scaffold, Operator op,
                                          const EvolutionConfig& config);

struct LossTerms
{
    double semantic = 0.0;  // L_s
    double alignment = 0.0; // L_pe
    double unmatched = 0.0; // L_r
    double prior = 0.0;     // L_prior
    double total = 0.0;     // weighted sum

    bool operator==(const LossTerms&) const = default;
};

/// Unweighted terms plus the weighted total.
[[nodiscard]] LossTerms loss_terms(const LatentState& state, const OperatorTarget& target,
                                   const LossWeights& weights = {});

struct GaussianGradient
{
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
};

struct StateGradient
{
    GaussianGradient lattice;
    GaussianGradient semantic;
    std::vector<GaussianGradient> position;
    std::vector<GaussianGradient> edge;
};

/// Gradient of the weighted total with respect to every (mean, log std).
[[nodiscard]] StateGradient loss_gradient(const LatentState& state, const OperatorTarget& target,
                                          const LossWeights& weights);

struct EvolutionTrace
{
    std::vector<LossTerms> iterations; // entry 0 is the initial state
};

struct EvolutionResult
{
    LatentState state{ DiagGaussian::standard(1), DiagGaussian::standard(1), {}, {} }; // optimized nodes, then appended union nodes
    EvolutionTrace trace;
    bool diverged = false;
};

/// Diagonally preconditioned gradient descent on (mean, log std): each
/// coordinate steps by learning_rate * g / (1 + h), where h is the weighted
/// curvature of the loss in that coordinate.
[[nodiscard]] EvolutionResult evolve(const LatentState& source, const OperatorTarget& target,
                                     const EvolutionConfig& config);

/// FNV-1a over every mean and std of the state.
[[nodiscard]] std::uint64_t latent_hash(const LatentState& state);

struct Generated
{
    Lattice lattice;
    PropertyVector properties;
    LatentState evolved;
    OperatorTarget target;
    EvolutionTrace trace;
};

/// Encode both structures (the scaffold with identity lattice vectors),
/// build the operator target, evolve and decode.
[[nodiscard]] Generated generate_evolved(const Lattice& source, const UnitCell& scaffold, Operator op,
                                         const ModelParams& params, const EvolutionConfig& config,
                                         const DecodeOptions& decode_options = {});

} // namespace symlat
