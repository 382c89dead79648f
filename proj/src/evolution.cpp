// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/evolution.hpp>

#include <array>
#include <cmath>
#include <string>

namespace symlat
{

namespace
{

constexpr std::array<std::pair<std::string_view, Operator>, 4> kOperators{ {
    { "union", Operator::Union },
    { "mix", Operator::Mix },
    { "intersect", Operator::Intersect },
    { "negate", Operator::Negate },
} };

} // namespace

Operator parse_operator(std::string_view name)
{
    for (const auto& [label, op]: kOperators)
        if (label == name)
            return op;
    throw ValidationError("unknown operator '" + std::string(name) + "' (expected union, mix, intersect or negate)");
}

std::string_view operator_name(Operator op)
{
    for (const auto& [label, value]: kOperators)
        if (value == op)
            return label;
    return "unknown";
}

void EvolutionConfig::validate() const
{
    for (auto w: { weights.semantic, weights.alignment, weights.unmatched, weights.prior })
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ValidationError("loss weights must be finite and >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("evolution learning rate must be finite and > 0");
    if (iterations < 1)
        throw ValidationError("evolution needs at least one iteration");
    if (!(tau_o > 0.0 && tau_o < 1.0))
        throw ValidationError("tau_o must lie in (0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ValidationError("mix coefficient must lie in [0, 1]");
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw ValidationError("negation strengths alpha and beta must be > 0");
    sinkhorn.validate();
}

namespace
{

DiagGaussian apply_operator(Operator op, const DiagGaussian& a, const DiagGaussian& b, const EvolutionConfig& config)
{
    switch (op)
    {
    case Operator::Mix:
        return mix(a, b, config.lambda);
    case Operator::Intersect:
        return intersect(a, b);
    case Operator::Negate:
        return negate(a, b, config.alpha, config.beta, config.negation);
    case Operator::Union:
        return mix(a, b, 0.5);
    }
    return a;
}

// Recomputes the plan between `current` and the scaffold and rebuilds every
// plan-dependent field. Operator operands come from the frozen snapshot.
void refresh_plan(OperatorTarget& t, const LatentState& current, const EvolutionConfig& config)
{
    auto sk = config.sinkhorn;
    if (t.op == Operator::Union)
        sk.mode = config.union_mass;
    t.plan = sinkhorn_log(node_cost(current, t.scaffold), sk);

    const auto ns = t.snapshot.node_count();
    const auto nt = t.scaffold.node_count();
    t.unmatched.clear();
    for (std::size_t i = 0; i < ns; ++i)
        if (t.plan.row_mass[static_cast<Eigen::Index>(i)] < config.tau_o)
            t.unmatched.push_back(static_cast<int>(i));

    t.position.clear();
    t.edge.clear();
    t.appended.clear();
    t.union_measure.reset();
    if (t.op == Operator::Union)
    {
        t.indexed_by_scaffold = true;
        t.position = t.scaffold.position;
        t.edge = t.scaffold.edge;
        t.union_measure = union_measure(t.snapshot, t.scaffold, t.plan, config.tau_o);
        t.appended = t.union_measure->appended;
        return;
    }

    t.indexed_by_scaffold = false;
    auto weights = std::vector<double>(nt);
    for (std::size_t i = 0; i < ns; ++i)
    {
        auto row = 0.0;
        for (std::size_t j = 0; j < nt; ++j)
        {
            weights[j] = t.plan.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            row += weights[j];
        }
        const auto& src_p = t.snapshot.position[i];
        const auto& src_e = t.snapshot.edge[i];
        if (!(row > 0.0))
        {
            // No transported mass: the node keeps its own distribution.
            t.position.push_back(src_p);
            t.edge.push_back(src_e);
            continue;
        }
        const auto bary_p = barycenter(t.scaffold.position, weights);
        const auto bary_e = barycenter(t.scaffold.edge, weights);
        t.position.push_back(apply_operator(t.op, src_p, bary_p, config));
        t.edge.push_back(apply_operator(t.op, src_e, bary_e, config));
    }
}

struct KlParts
{
    double value = 0.0;
    Eigen::VectorXd d_mean, d_log_std, h_mean, h_log_std;
};

// KL(N(mean, exp(log_std)) || t) with gradient and diagonal curvature.
KlParts kl_parts(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, const DiagGaussian& t)
{
    const Eigen::ArrayXd var_q = (2.0 * log_std.array()).exp();
    const Eigen::ArrayXd inv_t = t.var().array().inverse();
    const Eigen::ArrayXd diff = mean.array() - t.mean().array();
    auto k = KlParts();
    k.value = (t.std().array().log() - log_std.array() + 0.5 * (var_q + diff.square()) * inv_t - 0.5).sum();
    k.d_mean = (diff * inv_t).matrix();
    k.d_log_std = (var_q * inv_t - 1.0).matrix();
    k.h_mean = inv_t.matrix();
    k.h_log_std = (2.0 * var_q * inv_t).matrix();
    return k;
}

// Flat (mean, log std) view of a state for optimization.
struct Param
{
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
};

struct Params
{
    Param lattice, semantic;
    std::vector<Param> position, edge;
};

Param to_param(const DiagGaussian& g)
{
    return { g.mean(), g.std().array().log().matrix() };
}

Params to_params(const LatentState& s)
{
    auto p = Params{ to_param(s.lattice), to_param(s.semantic), {}, {} };
    for (const auto& g: s.position)
        p.position.push_back(to_param(g));
    for (const auto& g: s.edge)
        p.edge.push_back(to_param(g));
    return p;
}

DiagGaussian to_gaussian(const Param& p)
{
    return DiagGaussian::from_log_std(p.mean, p.log_std);
}

LatentState to_state(const Params& p)
{
    auto s = LatentState{ to_gaussian(p.lattice), to_gaussian(p.semantic), {}, {} };
    for (const auto& g: p.position)
        s.position.push_back(to_gaussian(g));
    for (const auto& g: p.edge)
        s.edge.push_back(to_gaussian(g));
    return s;
}

GaussianGradient zero_like(const Param& p)
{
    return { Eigen::VectorXd::Zero(p.mean.size()), Eigen::VectorXd::Zero(p.log_std.size()) };
}

StateGradient zero_gradient(const Params& p)
{
    auto g = StateGradient{ zero_like(p.lattice), zero_like(p.semantic), {}, {} };
    for (const auto& q: p.position)
        g.position.push_back(zero_like(q));
    for (const auto& q: p.edge)
        g.edge.push_back(zero_like(q));
    return g;
}

void check_alignment(const Params& p, const OperatorTarget& t)
{
    const auto n = p.position.size();
    if (n == 0 || p.edge.size() != n)
        throw ValidationError("evolution state needs matching, non-empty position and edge channels");
    if (t.plan.plan.rows() != static_cast<Eigen::Index>(n))
        throw ValidationError("transport plan rows do not match the state's node count");
    const auto nt = static_cast<std::size_t>(t.plan.plan.cols());
    const auto needed = t.indexed_by_scaffold ? nt : n;
    if (t.position.size() != needed || t.edge.size() != needed)
        throw ValidationError("operator target does not cover every node pair");
    for (auto i: t.unmatched)
        if (i < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(i) >= t.snapshot.node_count())
            throw ValidationError("unmatched node index outside the state");
    if (p.semantic.mean.size() != t.semantic.dim())
        throw ValidationError("semantic target dimension mismatch");
}

// Evaluates the terms and, when requested, the weighted gradient and
// curvature (curvature stored in a second StateGradient).
LossTerms evaluate(const Params& p, const OperatorTarget& t, const LossWeights& w, StateGradient* grad,
                   StateGradient* curv)
{
    check_alignment(p, t);
    auto terms = LossTerms();
    auto accumulate = [&](GaussianGradient* g, GaussianGradient* h, const KlParts& k, double weight) {
        if (g != nullptr)
        {
            g->mean += weight * k.d_mean;
            g->log_std += weight * k.d_log_std;
        }
        if (h != nullptr)
        {
            h->mean += weight * k.h_mean;
            h->log_std += weight * k.h_log_std;
        }
    };
    const auto want = grad != nullptr;

    {
        const auto k = kl_parts(p.semantic.mean, p.semantic.log_std, t.semantic);
        terms.semantic = k.value;
        if (want)
            accumulate(&grad->semantic, &curv->semantic, k, w.semantic);
    }

    const auto n = p.position.size();
    const auto nt = static_cast<std::size_t>(t.plan.plan.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < nt; ++j)
        {
            const auto pij = t.plan.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (pij == 0.0)
                continue;
            const auto kp = kl_parts(p.position[i].mean, p.position[i].log_std, t.position_target(i, j));
            const auto ke = kl_parts(p.edge[i].mean, p.edge[i].log_std, t.edge_target(i, j));
            terms.alignment += pij * (kp.value + ke.value);
            if (want)
            {
                accumulate(&grad->position[i], &curv->position[i], kp, w.alignment * pij);
                accumulate(&grad->edge[i], &curv->edge[i], ke, w.alignment * pij);
            }
        }

    for (auto ii: t.unmatched)
    {
        const auto i = static_cast<std::size_t>(ii);
        const auto kp = kl_parts(p.position[i].mean, p.position[i].log_std, t.snapshot.position[i]);
        const auto ke = kl_parts(p.edge[i].mean, p.edge[i].log_std, t.snapshot.edge[i]);
        terms.unmatched += kp.value + ke.value;
        if (want)
        {
            accumulate(&grad->position[i], &curv->position[i], kp, w.unmatched);
            accumulate(&grad->edge[i], &curv->edge[i], ke, w.unmatched);
        }
    }

    auto prior = [&](const Param& q, GaussianGradient* g, GaussianGradient* h) {
        terms.prior += q.mean.squaredNorm();
        if (g != nullptr)
        {
            g->mean += 2.0 * w.prior * q.mean;
            h->mean.array() += 2.0 * w.prior;
        }
    };
    prior(p.lattice, want ? &grad->lattice : nullptr, want ? &curv->lattice : nullptr);
    prior(p.semantic, want ? &grad->semantic : nullptr, want ? &curv->semantic : nullptr);
    for (std::size_t i = 0; i < n; ++i)
    {
        prior(p.position[i], want ? &grad->position[i] : nullptr, want ? &curv->position[i] : nullptr);
        prior(p.edge[i], want ? &grad->edge[i] : nullptr, want ? &curv->edge[i] : nullptr);
    }

    terms.total = w.semantic * terms.semantic + w.alignment * terms.alignment + w.unmatched * terms.unmatched
                  + w.prior * terms.prior;
    return terms;
}

bool finite(const LossTerms& t)
{
    return std::isfinite(t.semantic) && std::isfinite(t.alignment) && std::isfinite(t.unmatched)
           && std::isfinite(t.prior) && std::isfinite(t.total);
}

void step(Param& p, const GaussianGradient& g, const GaussianGradient& h, double lr)
{
    p.mean.array() -= lr * g.mean.array() / (1.0 + h.mean.array());
    p.log_std.array() -= lr * g.log_std.array() / (1.0 + h.log_std.array());
}

void hash_vector(std::uint64_t& h, const Eigen::VectorXd& v)
{
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t k = 0; k < static_cast<std::size_t>(v.size()) * sizeof(double); ++k)
    {
        h ^= bytes[k];
        h *= 0x100000001b3ULL;
    }
}

} // namespace

OperatorTarget build_target(const LatentState& source, const LatentState& scaffold, Operator op,
                            const EvolutionConfig& config)
{
    config.validate();
    source.validate();
    scaffold.validate();
    if (source.semantic.dim() != scaffold.semantic.dim())
        throw ValidationError("semantic dimension mismatch between source and scaffold");

    auto t = OperatorTarget();
    t.op = op;
    t.snapshot = source;
    t.scaffold = scaffold;
    t.semantic = apply_operator(op, source.semantic, scaffold.semantic, config);
    refresh_plan(t, source, config);
    return t;
}

LossTerms loss_terms(const LatentState& state, const OperatorTarget& target, const LossWeights& weights)
{
    return evaluate(to_params(state), target, weights, nullptr, nullptr);
}

StateGradient loss_gradient(const LatentState& state, const OperatorTarget& target, const LossWeights& weights)
{
    const auto p = to_params(state);
    auto g = zero_gradient(p);
    auto h = zero_gradient(p);
    evaluate(p, target, weights, &g, &h);
    return g;
}

EvolutionResult evolve(const LatentState& source, const OperatorTarget& target, const EvolutionConfig& config)
{
    config.validate();
    source.validate();
    auto current_target = target;
    auto p = to_params(source);
    auto result = EvolutionResult();

    auto terms = evaluate(p, current_target, config.weights, nullptr, nullptr);
    if (!finite(terms))
        throw NumericalError("initial evolution loss is not finite");
    result.trace.iterations.push_back(terms);

    for (int it = 1; it <= config.iterations; ++it)
    {
        if (config.recompute_plan)
            refresh_plan(current_target, to_state(p), config);
        auto g = zero_gradient(p);
        auto h = zero_gradient(p);
        evaluate(p, current_target, config.weights, &g, &h);

        auto next = p;
        step(next.lattice, g.lattice, h.lattice, config.learning_rate);
        step(next.semantic, g.semantic, h.semantic, config.learning_rate);
        for (std::size_t i = 0; i < next.position.size(); ++i)
        {
            step(next.position[i], g.position[i], h.position[i], config.learning_rate);
            step(next.edge[i], g.edge[i], h.edge[i], config.learning_rate);
        }

        const auto next_terms = evaluate(next, current_target, config.weights, nullptr, nullptr);
        if (!finite(next_terms))
        {
            result.diverged = true;
            break;
        }
        p = std::move(next);
        result.trace.iterations.push_back(next_terms);
    }

    result.state = to_state(p);
    for (auto j: current_target.appended)
    {
        result.state.position.push_back(current_target.scaffold.position.at(static_cast<std::size_t>(j)));
        result.state.edge.push_back(current_target.scaffold.edge.at(static_cast<std::size_t>(j)));
    }
    return result;
}

std::uint64_t latent_hash(const LatentState& state)
{
    auto h = std::uint64_t{ 0xcbf29ce484222325ULL };
    auto add = [&h](const DiagGaussian& g) {
        hash_vector(h, g.mean());
        hash_vector(h, g.std());
    };
    add(state.lattice);
    add(state.semantic);
    for (const auto& g: state.position)
        add(g);
    for (const auto& g: state.edge)
        add(g);
    return h;
}

Generated generate_evolved(const Lattice& source, const UnitCell& scaffold, Operator op, const ModelParams& params,
                           const EvolutionConfig& config, const DecodeOptions& decode_options)
{
    const auto zs = encode(source, params);
    const auto zt = encode(Lattice::from_cell(scaffold), params);
    auto target = build_target(zs, zt, op, config);
    auto evolved = evolve(zs, target, config);
    if (evolved.diverged)
        throw NumericalError("latent evolution diverged after "
                             + std::to_string(evolved.trace.iterations.size() - 1) + " iterations");
    auto decoded = decode(evolved.state, params, decode_options);
    return Generated{ std::move(decoded.lattice), std::move(decoded.properties), std::move(evolved.state),
                      std::move(target), std::move(evolved.trace) };
}

} // namespace symlat
