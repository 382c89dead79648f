// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace symlat
{

/// Diagonal Gaussian N(mean, diag(std^2)). Construction enforces finite
/// means and strictly positive finite standard deviations.
class DiagGaussian
{
  public:
    DiagGaussian(Eigen::VectorXd mean, Eigen::VectorXd std);

    static DiagGaussian standard(Eigen::Index dim);
    static DiagGaussian from_log_std(Eigen::VectorXd mean, const Eigen::VectorXd& log_std);

    [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::VectorXd& std() const noexcept { return std_; }
    [[nodiscard]] Eigen::VectorXd var() const { return std_.array().square(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return mean_.size(); }

    /// Concatenation of two independent Gaussians.
    [[nodiscard]] DiagGaussian concat(const DiagGaussian& other) const;

    bool operator==(const DiagGaussian& other) const;

  private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
};

/// Four-channel latent of one lattice: graph-level lattice and semantic
/// channels plus per-node position and edge channels.
struct LatentState
{
    DiagGaussian lattice;
    DiagGaussian semantic;
    std::vector<DiagGaussian> position;
    std::vector<DiagGaussian> edge;

    [[nodiscard]] std::size_t node_count() const noexcept { return position.size(); }

    /// Throws ValidationError unless |position| == |edge| >= 1 and dimensions
    /// agree within each channel.
    void validate() const;

    /// Position and edge latents of node i, concatenated.
    [[nodiscard]] DiagGaussian node(std::size_t i) const;

    bool operator==(const LatentState& other) const = default;
};

inline constexpr double kMixStabilizer = 1e-8;

/// KL(a || b) for diagonal Gaussians, summed over coordinates.
[[nodiscard]] double kl_diag(const DiagGaussian& a, const DiagGaussian& b);

/// Single-Gaussian surrogate of (1-lambda) p_a + lambda p_b: means interpolate,
/// standard deviations interpolate and get kMixStabilizer added to the
/// variance. Throws ValidationError for lambda outside [0,1].
[[nodiscard]] DiagGaussian mix(const DiagGaussian& a, const DiagGaussian& b, double lambda);

/// Product of experts: precisions add, mean is precision-weighted.
[[nodiscard]] DiagGaussian intersect(const DiagGaussian& a, const DiagGaussian& b);

enum class NegationMode
{
    Strict,        // throw NegationInfeasible on any precision <= 0
    ClampPrecision // floor precision at kNegationPrecisionFloor
};

inline constexpr double kNegationPrecisionFloor = 1e-6;

/// Gaussian matching p_a^alpha / p_b^beta: precision alpha/var_a - beta/var_b
/// and mean var * (alpha mu_a/var_a - beta mu_b/var_b). In Strict mode a
/// non-positive precision in any coordinate raises NegationInfeasible naming
/// those coordinates.
[[nodiscard]] DiagGaussian negate(const DiagGaussian& a, const DiagGaussian& b, double alpha, double beta,
                                  NegationMode mode = NegationMode::Strict);

/// Moment-matched single Gaussian of a weighted mixture (weights need not be
/// normalized, their sum must be > 0).
[[nodiscard]] DiagGaussian barycenter(std::span<const DiagGaussian> parts, std::span<const double> weights);

/// Reparameterized draw mean + std * eta with eta ~ N(0, I).
[[nodiscard]] Eigen::VectorXd sample(const DiagGaussian& g, std::uint64_t seed);
[[nodiscard]] Eigen::VectorXd sample(const DiagGaussian& g, std::mt19937_64& rng);

struct TransportPlan;

/// One atom of the union measure: a node distribution with its weight.
struct UnionAtom
{
    int index = 0; // node index in the structure it came from
    DiagGaussian position;
    DiagGaussian edge;
    double weight = 0.0;
};

/// Discrete measure over node distributions produced by Union. The plan is
/// first scaled by 1 / max(1, largest row sum, largest column sum) so every
/// node overlaps at most once. Source atoms keep the source parameters; each
/// carries its unique mass (1 - r_i) and overlap mass (sum_j P_ij). Scaffold
/// atoms carry 1 - c_j; those with c_j < tau_o are flagged for appending.
/// The weights sum to Z.
struct UnionTarget
{
    std::vector<UnionAtom> kept;
    std::vector<double> kept_unique;
    std::vector<double> kept_overlap;
    std::vector<UnionAtom> scaffold_unique;
    std::vector<int> appended; // scaffold node indices with c_j < tau_o
    double normalizer = 0.0;   // Z = N_M + N_M' - rho

    [[nodiscard]] double total_mass() const;
};

/// Throws ValidationError on dimension mismatch, tau_o outside (0,1) or a
/// degenerate normalizer (rho >= N_M + N_M').
[[nodiscard]] UnionTarget union_measure(const LatentState& source, const LatentState& scaffold,
                                        const TransportPlan& plan, double tau_o);

} // namespace symlat
