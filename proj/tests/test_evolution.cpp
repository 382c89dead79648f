// SPDX-License-Identifier: Apache-2.0
#include "latent_helpers.hpp"
#include "oracles.hpp"

#include <symlat/errors.hpp>
#include <symlat/evolution.hpp>

#include <doctest.h>

#include <random>

using namespace symlat;
using namespace symlat::test;

namespace
{

// Closed-form KL between diagonal Gaussians, written out per coordinate.
double kl_reference(const DiagGaussian& q, const DiagGaussian& p)
{
    auto total = 0.0;
    for (Eigen::Index k = 0; k < q.dim(); ++k)
    {
        const auto vq = q.std()[k] * q.std()[k];
        const auto vp = p.std()[k] * p.std()[k];
        const auto d = q.mean()[k] - p.mean()[k];
        total += 0.5 * (std::log(vp / vq) + (vq + d * d) / vp - 1.0);
    }
    return total;
}

LossTerms reference_terms(const LatentState& s, const OperatorTarget& t, const LossWeights& w)
{
    auto out = LossTerms();
    out.semantic = kl_reference(s.semantic, t.semantic);
    for (Eigen::Index i = 0; i < t.plan.plan.rows(); ++i)
        for (Eigen::Index j = 0; j < t.plan.plan.cols(); ++j)
        {
            const auto a = static_cast<std::size_t>(i);
            const auto b = static_cast<std::size_t>(j);
            const auto& tp = t.indexed_by_scaffold ? t.position[b] : t.position[a];
            const auto& te = t.indexed_by_scaffold ? t.edge[b] : t.edge[a];
            out.alignment += t.plan.plan(i, j) * (kl_reference(s.position[a], tp) + kl_reference(s.edge[a], te));
        }
    for (Eigen::Index i = 0; i < t.plan.row_mass.size(); ++i)
        if (t.plan.row_mass[i] < 0.1)
        {
            const auto a = static_cast<std::size_t>(i);
            out.unmatched += kl_reference(s.position[a], t.snapshot.position[a])
                             + kl_reference(s.edge[a], t.snapshot.edge[a]);
        }
    out.prior = s.lattice.mean().squaredNorm() + s.semantic.mean().squaredNorm();
    for (std::size_t i = 0; i < s.node_count(); ++i)
        out.prior += s.position[i].mean().squaredNorm() + s.edge[i].mean().squaredNorm();
    out.total = w.semantic * out.semantic + w.alignment * out.alignment + w.unmatched * out.unmatched
                + w.prior * out.prior;
    return out;
}

EvolutionConfig mild_config()
{
    auto c = EvolutionConfig();
    c.alpha = 1.0;
    c.beta = 0.05;
    c.negation = NegationMode::ClampPrecision;
    return c;
}

} // namespace

TEST_CASE("operator names")
{
    for (const auto op: { Operator::Union, Operator::Mix, Operator::Intersect, Operator::Negate })
        CHECK(parse_operator(operator_name(op)) == op);
    CHECK_THROWS_WITH_AS(parse_operator("xor"), doctest::Contains("union, mix, intersect or negate"),
                         ValidationError);
}

TEST_CASE("evolution config validation")
{
    CHECK_NOTHROW(EvolutionConfig().validate());
    auto c = EvolutionConfig();
    c.tau_o = 1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = EvolutionConfig();
    c.lambda = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = EvolutionConfig();
    c.weights.prior = -1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = EvolutionConfig();
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("loss terms match a reference double loop")
{
    auto rng = std::mt19937_64(41);
    const auto weights = LossWeights{ 0.7, 1.3, 0.4, 0.01 };
    for (int trial = 0; trial < 40; ++trial)
    {
        const auto op = static_cast<Operator>(trial % 4);
        const auto source = random_state(rng, 2 + trial % 4);
        const auto scaffold = random_state(rng, 2 + trial % 3, trial % 5 == 0 ? 10.0 : 0.0);
        const auto target = build_target(source, scaffold, op, mild_config());
        const auto state = random_state(rng, static_cast<int>(source.node_count()));
        const auto got = loss_terms(state, target, weights);
        const auto want = reference_terms(state, target, weights);
        CHECK(got.semantic == doctest::Approx(want.semantic).epsilon(1e-10));
        CHECK(got.alignment == doctest::Approx(want.alignment).epsilon(1e-10));
        CHECK(got.unmatched == doctest::Approx(want.unmatched).epsilon(1e-10));
        CHECK(got.prior == doctest::Approx(want.prior).epsilon(1e-10));
        CHECK(got.total == doctest::Approx(want.total).epsilon(1e-10));
    }
}

TEST_CASE("identical state, target and snapshot give zero divergence terms")
{
    auto rng = std::mt19937_64(42);
    const auto source = random_state(rng, 3);
    auto target = build_target(source, source, Operator::Mix, mild_config());
    target.semantic = source.semantic;
    target.position = source.position;
    target.edge = source.edge;
    target.unmatched = { 0, 1, 2 };
    const auto t = loss_terms(source, target);
    CHECK(std::abs(t.semantic) < 1e-12);
    CHECK(std::abs(t.alignment) < 1e-12);
    CHECK(std::abs(t.unmatched) < 1e-12);

    auto zero = source;
    zero.lattice = DiagGaussian::standard(2);
    zero.semantic = DiagGaussian::standard(3);
    for (auto& g: zero.position)
        g = DiagGaussian::standard(2);
    for (auto& g: zero.edge)
        g = DiagGaussian::standard(2);
    CHECK(loss_terms(zero, target).prior == 0.0);
}

TEST_CASE("each loss term's gradient matches central differences")
{
    auto rng = std::mt19937_64(43);
    const auto single = std::array<LossWeights, 4>{ LossWeights{ 1, 0, 0, 0 }, LossWeights{ 0, 1, 0, 0 },
                                                    LossWeights{ 0, 0, 1, 0 }, LossWeights{ 0, 0, 0, 1 } };
    for (int trial = 0; trial < 8; ++trial)
    {
        const auto op = static_cast<Operator>(trial % 4);
        const auto source = random_state(rng, 2);
        // Every other trial uses a far scaffold so some nodes are unmatched.
        const auto scaffold = random_state(rng, 3, trial % 2 == 0 ? 6.0 : 0.0);
        auto target = build_target(source, scaffold, op, mild_config());
        if (target.unmatched.empty())
            target.unmatched = { 1 };
        const auto state = random_state(rng, 2);
        const auto flat = flatten(state);
        for (const auto& w: single)
        {
            const auto analytic = flatten_gradient(loss_gradient(state, target, w));
            REQUIRE(analytic.size() == flat.x.size());
            auto f = [&](const Eigen::VectorXd& x) { return loss_terms(unflatten(x, flat.shape), target, w).total; };
            auto worst = 0.0;
            for (Eigen::Index k = 0; k < flat.x.size(); ++k)
                worst = std::max(worst,
                                 oracle::relative_error(analytic[k], oracle::central_difference(f, flat.x, k, 1e-6)));
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("gradient vanishes when the target equals the source")
{
    auto rng = std::mt19937_64(44);
    const auto source = random_state(rng, 3);
    auto config = mild_config();
    config.lambda = 0.0;
    auto target = build_target(source, random_state(rng, 3), Operator::Mix, config);
    target.semantic = source.semantic;
    target.position = source.position;
    target.edge = source.edge;
    const auto g = flatten_gradient(loss_gradient(source, target, LossWeights{ 1, 1, 0.5, 0 }));
    CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("intersect with itself halves the variance of matched nodes")
{
    auto rng = std::mt19937_64(45);
    auto s = random_state(rng, 3);
    for (std::size_t i = 0; i < 3; ++i)
        s.position[i] = DiagGaussian(Eigen::VectorXd::Constant(2, 4.0 * static_cast<double>(i)),
                                     Eigen::VectorXd::Constant(2, 0.2));
    auto config = mild_config();
    config.sinkhorn.entropic_eps = 0.01;
    const auto t = build_target(s, s, Operator::Intersect, config);
    CHECK(t.unmatched.empty());
    for (std::size_t i = 0; i < 3; ++i)
    {
        CHECK((t.position[i].var() - s.position[i].var() / 2).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((t.position[i].mean() - s.position[i].mean()).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK((t.semantic.var() - s.semantic.var() / 2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("union of disjoint states appends every scaffold node")
{
    auto rng = std::mt19937_64(46);
    const auto source = random_state(rng, 3);
    const auto scaffold = random_state(rng, 4, 40.0);
    const auto t = build_target(source, scaffold, Operator::Union, EvolutionConfig());
    CHECK(t.unmatched == std::vector<int>{ 0, 1, 2 });
    CHECK(t.appended == std::vector<int>{ 0, 1, 2, 3 });
    REQUIRE(t.union_measure.has_value());
    CHECK(t.union_measure->normalizer == doctest::Approx(7.0));
    auto config = EvolutionConfig();
    config.iterations = 20;
    const auto r = evolve(source, t, config);
    CHECK(r.state.node_count() == 7);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(r.state.position[3 + j] == scaffold.position[j]);
}

TEST_CASE("strict negation propagates infeasibility")
{
    auto rng = std::mt19937_64(47);
    auto source = random_state(rng, 2);
    auto scaffold = source;
    scaffold.semantic = DiagGaussian(source.semantic.mean(), source.semantic.std() * 0.1);
    auto config = EvolutionConfig();
    CHECK_THROWS_AS((void)build_target(source, scaffold, Operator::Negate, config), NegationInfeasible);
    config.negation = NegationMode::ClampPrecision;
    CHECK_NOTHROW((void)build_target(source, scaffold, Operator::Negate, config));
}

TEST_CASE("mix evolution lowers the semantic loss and is deterministic")
{
    auto rng = std::mt19937_64(48);
    auto config = EvolutionConfig();
    auto runs = 0;
    auto monotone = 0;
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto source = random_state(rng, 3);
        const auto scaffold = random_state(rng, 3 + trial % 3);
        const auto before = latent_hash(source);
        const auto target = build_target(source, scaffold, Operator::Mix, config);
        const auto snapshot = latent_hash(target.snapshot);
        const auto r = evolve(source, target, config);
        CHECK_FALSE(r.diverged);
        REQUIRE(r.trace.iterations.size() == 301);
        const auto& first = r.trace.iterations.front();
        const auto& last = r.trace.iterations.back();
        CHECK(last.semantic <= 0.1 * first.semantic);
        auto ok = true;
        for (std::size_t k = 1; k < r.trace.iterations.size(); ++k)
        {
            const auto& t = r.trace.iterations[k];
            ok = ok && t.semantic <= r.trace.iterations[k - 1].semantic + 1e-6 * first.semantic;
            CHECK(std::isfinite(t.total));
            CHECK(t.prior < 10.0 * first.prior + 1.0);
            CHECK(t.unmatched < 10.0 * first.unmatched + 1.0);
        }
        ++runs;
        monotone += ok ? 1 : 0;
        CHECK(latent_hash(source) == before);
        CHECK(latent_hash(target.snapshot) == snapshot);
        CHECK(latent_hash(evolve(source, target, config).state) == latent_hash(r.state));
    }
    CHECK(monotone >= (95 * runs + 99) / 100);
}

TEST_CASE("mix with zero weight leaves the source nearly unchanged")
{
    auto rng = std::mt19937_64(49);
    const auto source = random_state(rng, 3);
    auto config = EvolutionConfig();
    config.lambda = 0.0;
    config.weights.prior = 0.0;
    const auto target = build_target(source, random_state(rng, 4), Operator::Mix, config);
    const auto r = evolve(source, target, config);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK((r.state.position[i].mean() - source.position[i].mean()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((r.state.semantic.std() - source.semantic.std()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("recomputing the plan keeps the run finite")
{
    auto rng = std::mt19937_64(50);
    auto config = EvolutionConfig();
    config.recompute_plan = true;
    config.iterations = 50;
    const auto source = random_state(rng, 3);
    const auto target = build_target(source, random_state(rng, 3), Operator::Intersect, config);
    const auto r = evolve(source, target, config);
    CHECK_FALSE(r.diverged);
    CHECK(r.trace.iterations.back().total < r.trace.iterations.front().total);
}
