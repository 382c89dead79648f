// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/transport.hpp>

#include <algorithm>
#include <cmath>

namespace symlat
{

void SinkhornConfig::validate() const
{
    if (!(entropic_eps > 0.0) || !std::isfinite(entropic_eps))
        throw ValidationError("entropic weight must be finite and > 0");
    if (max_iters < 1)
        throw ValidationError("Sinkhorn needs at least one iteration");
    if (!(tol > 0.0))
        throw ValidationError("Sinkhorn tolerance must be > 0");
}

namespace
{

// Potential update for one side. For every row r of `k` (already holding
// K + other potential), Balanced returns -LSE(row); Partial returns
// -LSE(row - max(row)), i.e. the shift is dropped.
void potential_update(const Eigen::MatrixXd& k, MassMode mode, Eigen::VectorXd& out)
{
    for (Eigen::Index r = 0; r < k.rows(); ++r)
    {
        const auto m = k.row(r).maxCoeff();
        const auto lse_shifted = std::log((k.row(r).array() - m).exp().sum());
        out[r] = mode == MassMode::Balanced ? -(m + lse_shifted) : -lse_shifted;
    }
}

} // namespace

TransportPlan sinkhorn_log(const Eigen::MatrixXd& cost, const SinkhornConfig& config)
{
    config.validate();
    if (cost.rows() < 1 || cost.cols() < 1)
        throw ValidationError("Sinkhorn cost matrix must be non-empty");
    if (!cost.allFinite())
        throw ValidationError("Sinkhorn cost matrix has non-finite entries");

    // Balanced updates are invariant to a constant cost shift; removing the
    // minimum keeps the first potential step small.
    const auto offset = config.mode == MassMode::Balanced ? cost.minCoeff() : 0.0;
    const Eigen::MatrixXd kernel = -(cost.array() - offset).matrix() / config.entropic_eps;

    const auto ns = kernel.rows();
    const auto nt = kernel.cols();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(ns);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nt);

    auto out = TransportPlan();
    auto row_step = [&] {
        const Eigen::MatrixXd shifted = kernel.rowwise() + g.transpose();
        potential_update(shifted, config.mode, f);
    };
    auto col_step = [&] {
        const Eigen::MatrixXd shifted = (kernel.colwise() + f).transpose();
        potential_update(shifted, config.mode, g);
    };

    for (int t = 1; t <= config.max_iters; ++t)
    {
        const Eigen::VectorXd f_prev = f;
        row_step();
        col_step();
        out.iterations = t;

        const auto delta = (f - f_prev).lpNorm<Eigen::Infinity>();
        if (delta > kSinkhornBlowUp)
        {
            out.blew_up = true;
            break;
        }
        if (delta < config.tol)
        {
            out.converged = true;
            break;
        }
    }
    if (config.mode == MassMode::Balanced)
        row_step();

    out.plan = ((kernel.colwise() + f).rowwise() + g.transpose()).array().exp().matrix();
    update_masses(out);
    return out;
}

void update_masses(TransportPlan& plan)
{
    plan.row_mass = plan.plan.rowwise().sum().cwiseMax(0.0).cwiseMin(1.0);
    plan.col_mass = plan.plan.colwise().sum().transpose().cwiseMax(0.0).cwiseMin(1.0);
    plan.rho = plan.row_mass.sum();
}

double w2_squared(const DiagGaussian& a, const DiagGaussian& b)
{
    if (a.dim() != b.dim())
        throw ValidationError("node latent dimension mismatch");
    return (a.mean() - b.mean()).squaredNorm() + (a.std() - b.std()).squaredNorm();
}

Eigen::MatrixXd node_cost(std::span<const DiagGaussian> a, std::span<const DiagGaussian> b)
{
    if (a.empty() || b.empty())
        throw ValidationError("node cost needs non-empty node sets");
    auto c = Eigen::MatrixXd(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w2_squared(a[i], b[j]);
    return c;
}

Eigen::MatrixXd node_cost(const LatentState& a, const LatentState& b)
{
    auto na = std::vector<DiagGaussian>();
    auto nb = std::vector<DiagGaussian>();
    for (std::size_t i = 0; i < a.node_count(); ++i)
        na.push_back(a.node(i));
    for (std::size_t j = 0; j < b.node_count(); ++j)
        nb.push_back(b.node(j));
    return node_cost(na, nb);
}

double overlap_mass(const TransportPlan& plan)
{
    return plan.plan.rowwise().sum().cwiseMin(1.0).sum();
}

} // namespace symlat
