// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/gaussian.hpp>
#include <symlat/transport.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace symlat
{

DiagGaussian::DiagGaussian(Eigen::VectorXd mean, Eigen::VectorXd std): mean_(std::move(mean)), std_(std::move(std))
{
    if (mean_.size() != std_.size())
        throw ValidationError("Gaussian mean and std differ in length");
    if (!mean_.allFinite())
        throw ValidationError("Gaussian mean must be finite");
    if (!std_.allFinite() || (std_.array() <= 0.0).any())
        throw ValidationError("Gaussian std must be finite and > 0");
}

DiagGaussian DiagGaussian::standard(Eigen::Index dim)
{
    return DiagGaussian(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

DiagGaussian DiagGaussian::from_log_std(Eigen::VectorXd mean, const Eigen::VectorXd& log_std)
{
    return DiagGaussian(std::move(mean), log_std.array().exp().matrix());
}

DiagGaussian DiagGaussian::concat(const DiagGaussian& other) const
{
    auto m = Eigen::VectorXd(dim() + other.dim());
    auto s = Eigen::VectorXd(dim() + other.dim());
    m << mean_, other.mean_;
    s << std_, other.std_;
    return DiagGaussian(std::move(m), std::move(s));
}

bool DiagGaussian::operator==(const DiagGaussian& other) const
{
    return dim() == other.dim() && mean_ == other.mean_ && std_ == other.std_;
}

void LatentState::validate() const
{
    if (position.empty())
        throw ValidationError("latent state needs at least one node");
    if (position.size() != edge.size())
        throw ValidationError("position and edge channels differ in node count");
    for (std::size_t i = 1; i < position.size(); ++i)
        if (position[i].dim() != position[0].dim() || edge[i].dim() != edge[0].dim())
            throw ValidationError("per-node latent dimensions are inconsistent");
}

DiagGaussian LatentState::node(std::size_t i) const
{
    return position.at(i).concat(edge.at(i));
}

namespace
{

void require_same_dim(const DiagGaussian& a, const DiagGaussian& b)
{
    if (a.dim() != b.dim())
        throw ValidationError("Gaussian dimension mismatch (" + std::to_string(a.dim()) + " vs "
                              + std::to_string(b.dim()) + ")");
}

} // namespace

double kl_diag(const DiagGaussian& a, const DiagGaussian& b)
{
    require_same_dim(a, b);
    const auto sa = a.std().array();
    const auto sb = b.std().array();
    const auto diff = (a.mean() - b.mean()).array();
    return ((sb / sa).log() + (sa.square() + diff.square()) / (2.0 * sb.square()) - 0.5).sum();
}

DiagGaussian mix(const DiagGaussian& a, const DiagGaussian& b, double lambda)
{
    require_same_dim(a, b);
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ValidationError("mix coefficient must lie in [0, 1]");
    const Eigen::VectorXd mean = (1.0 - lambda) * a.mean() + lambda * b.mean();
    const Eigen::ArrayXd s = (1.0 - lambda) * a.std().array() + lambda * b.std().array();
    return DiagGaussian(mean, (s.square() + kMixStabilizer).sqrt().matrix());
}

DiagGaussian intersect(const DiagGaussian& a, const DiagGaussian& b)
{
    require_same_dim(a, b);
    const Eigen::ArrayXd pa = a.var().array().inverse();
    const Eigen::ArrayXd pb = b.var().array().inverse();
    const Eigen::ArrayXd var = (pa + pb).inverse();
    const Eigen::ArrayXd mean = var * (pa * a.mean().array() + pb * b.mean().array());
    return DiagGaussian(mean.matrix(), var.sqrt().matrix());
}

DiagGaussian negate(const DiagGaussian& a, const DiagGaussian& b, double alpha, double beta, NegationMode mode)
{
    require_same_dim(a, b);
    if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
        throw ValidationError("negation strengths alpha and beta must be finite and > 0");

    const Eigen::ArrayXd wa = alpha * a.var().array().inverse();
    const Eigen::ArrayXd wb = beta * b.var().array().inverse();
    Eigen::ArrayXd precision = wa - wb;

    auto bad = std::vector<int>();
    for (Eigen::Index k = 0; k < precision.size(); ++k)
        if (!(precision[k] > 0.0))
            bad.push_back(static_cast<int>(k));

    if (!bad.empty())
    {
        if (mode == NegationMode::Strict)
        {
            auto msg = std::ostringstream();
            msg << "negation infeasible: non-positive precision at coordinate(s)";
            for (auto k: bad)
                msg << ' ' << k;
            throw NegationInfeasible(std::move(bad), msg.str());
        }
        precision = precision.max(kNegationPrecisionFloor);
    }

    const Eigen::ArrayXd var = precision.inverse();
    const Eigen::ArrayXd mean = var * (wa * a.mean().array() - wb * b.mean().array());
    return DiagGaussian(mean.matrix(), var.sqrt().matrix());
}

DiagGaussian barycenter(std::span<const DiagGaussian> parts, std::span<const double> weights)
{
    if (parts.empty() || parts.size() != weights.size())
        throw ValidationError("barycenter needs matching non-empty parts and weights");

    const auto dim = parts.front().dim();
    auto total = 0.0;
    Eigen::ArrayXd first = Eigen::ArrayXd::Zero(dim);
    Eigen::ArrayXd second = Eigen::ArrayXd::Zero(dim);
    for (std::size_t k = 0; k < parts.size(); ++k)
    {
        require_same_dim(parts[k], parts.front());
        if (!(weights[k] >= 0.0))
            throw ValidationError("barycenter weights must be >= 0");
        const auto m = parts[k].mean().array();
        first += weights[k] * m;
        second += weights[k] * (parts[k].var().array() + m.square());
        total += weights[k];
    }
    if (!(total > 0.0))
        throw ValidationError("barycenter weights sum to zero");

    first /= total;
    second /= total;
    // Mixture variance is at least the smallest component variance; the floor
    // only guards cancellation.
    const Eigen::ArrayXd var = (second - first.square()).max(1e-300);
    return DiagGaussian(first.matrix(), var.sqrt().matrix());
}

Eigen::VectorXd sample(const DiagGaussian& g, std::mt19937_64& rng)
{
    auto normal = std::normal_distribution<double>(0.0, 1.0);
    auto eta = Eigen::VectorXd(g.dim());
    for (Eigen::Index k = 0; k < eta.size(); ++k)
        eta[k] = normal(rng);
    return g.mean() + g.std().cwiseProduct(eta);
}

Eigen::VectorXd sample(const DiagGaussian& g, std::uint64_t seed)
{
    auto rng = std::mt19937_64(seed);
    return sample(g, rng);
}

double UnionTarget::total_mass() const
{
    auto sum = 0.0;
    for (std::size_t i = 0; i < kept.size(); ++i)
        sum += kept_unique[i] + kept_overlap[i];
    for (const auto& atom: scaffold_unique)
        sum += atom.weight;
    return sum;
}

UnionTarget union_measure(const LatentState& source, const LatentState& scaffold, const TransportPlan& plan,
                          double tau_o)
{
    source.validate();
    scaffold.validate();
    if (!(tau_o > 0.0 && tau_o < 1.0))
        throw ValidationError("tau_o must lie in (0, 1)");

    const auto nm = static_cast<Eigen::Index>(source.node_count());
    const auto ns = static_cast<Eigen::Index>(scaffold.node_count());
    if (plan.plan.rows() != nm || plan.plan.cols() != ns)
        throw ValidationError("transport plan shape does not match node counts");
    require_same_dim(source.position[0], scaffold.position[0]);
    require_same_dim(source.edge[0], scaffold.edge[0]);

    // A node can overlap at most once on either side: scale the plan down
    // until every row and column sum is at most one.
    auto capped = TransportPlan();
    const auto peak = std::max({ 1.0, plan.plan.rowwise().sum().maxCoeff(), plan.plan.colwise().sum().maxCoeff() });
    capped.plan = plan.plan / peak;
    update_masses(capped);

    const auto rho = overlap_mass(capped);
    auto out = UnionTarget();
    out.normalizer = static_cast<double>(nm + ns) - rho;
    if (!(out.normalizer > 0.0))
        throw ValidationError("degenerate union normalizer (rho >= N_M + N_M')");

    for (Eigen::Index i = 0; i < nm; ++i)
    {
        const auto idx = static_cast<std::size_t>(i);
        const auto unique = 1.0 - capped.row_mass[i];
        const auto overlap = capped.plan.row(i).sum();
        out.kept.push_back({ static_cast<int>(i), source.position[idx], source.edge[idx], unique + overlap });
        out.kept_unique.push_back(unique);
        out.kept_overlap.push_back(overlap);
    }
    for (Eigen::Index j = 0; j < ns; ++j)
    {
        const auto idx = static_cast<std::size_t>(j);
        out.scaffold_unique.push_back(
            { static_cast<int>(j), scaffold.position[idx], scaffold.edge[idx], 1.0 - capped.col_mass[j] });
        if (capped.col_mass[j] < tau_o)
            out.appended.push_back(static_cast<int>(j));
    }
    return out;
}

} // namespace symlat
