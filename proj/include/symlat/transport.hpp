// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/gaussian.hpp>

#include <Eigen/Dense>

#include <span>

namespace symlat
{

/// How the log-domain updates treat the per-row / per-column stabilizing
/// max shift.
enum class MassMode
{
    /// The shift is restored inside the log-sum-exp, so the updates drive
    /// both marginals to the all-ones vector. Shift invariant in the cost.
    Balanced,
    /// The shift is subtracted and never restored. Row i then carries
    /// exp(max_j(K_ij + g_j)) <= 1 mass, so isolated nodes keep near-zero
    /// mass. Not shift invariant.
    Partial,
};

struct SinkhornConfig
{
    double entropic_eps = 0.05;
    int max_iters = 200;
    double tol = 1e-6;
    MassMode mode = MassMode::Balanced;

    void validate() const;
};

inline constexpr double kSinkhornBlowUp = 1e4;

struct TransportPlan
{
    Eigen::MatrixXd plan;     // N_s x N_t, entries >= 0
    Eigen::VectorXd row_mass; // r_i clamped to [0,1]
    Eigen::VectorXd col_mass; // c_j clamped to [0,1]
    double rho = 0.0;         // sum of clamped row masses
    int iterations = 0;
    bool converged = false;
    bool blew_up = false;
};

/// Log-stabilized Sinkhorn: K = -C/eps, alternating row and column
/// log-sum-exp updates of the potentials f and g, stopping when
/// |f - f_prev|_inf < tol or > kSinkhornBlowUp. Balanced mode closes with
/// one more row update so row sums are exact. Returns P = exp(K + f + g^T).
/// Throws ValidationError on empty or non-finite costs or an invalid config.
[[nodiscard]] TransportPlan sinkhorn_log(const Eigen::MatrixXd& cost, const SinkhornConfig& config = {});

/// Squared 2-Wasserstein distance between diagonal Gaussians:
/// |mu_a - mu_b|^2 + |std_a - std_b|^2.
[[nodiscard]] double w2_squared(const DiagGaussian& a, const DiagGaussian& b);

/// Pairwise w2_squared cost. Throws ValidationError on empty sets or
/// dimension mismatch.
[[nodiscard]] Eigen::MatrixXd node_cost(std::span<const DiagGaussian> a, std::span<const DiagGaussian> b);

/// Node cost between two latent states on concatenated position+edge latents.
[[nodiscard]] Eigen::MatrixXd node_cost(const LatentState& a, const LatentState& b);

/// rho = sum_i min(r_i, 1).
[[nodiscard]] double overlap_mass(const TransportPlan& plan);

/// Fills row_mass, col_mass and rho from plan.plan.
void update_masses(TransportPlan& plan);

} // namespace symlat
