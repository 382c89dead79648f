// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"
#include "support.hpp"

#include <symlat/errors.hpp>
#include <symlat/model.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace symlat;
using symlat::test::tiny_config;

namespace
{

ModelParams untrained(bool conditional = false)
{
    auto c = tiny_config();
    c.conditional = conditional;
    auto p = init_params(c);
    p.normalization = Normalization::fit(synth_dataset(8, all_families(), 0.05, 1));
    return p;
}

bool same(const DiagGaussian& a, const DiagGaussian& b, double tol)
{
    return (a.mean() - b.mean()).cwiseAbs().maxCoeff() <= tol && (a.std() - b.std()).cwiseAbs().maxCoeff() <= tol;
}

} // namespace

TEST_CASE("model config validation")
{
    auto c = ModelConfig();
    CHECK_NOTHROW(c.validate());
    c.d_edge = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = ModelConfig();
    c.rounds = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = ModelConfig();
    c.validation_fraction = 1.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("model config JSON overlay")
{
    const auto j = model_config_to_json(ModelConfig());
    CHECK(model_config_from_json(j) == ModelConfig());
    const auto c = model_config_from_json(nlohmann::json{ { "hidden", 12 }, { "conditional", true } });
    CHECK(c.hidden == 12);
    CHECK(c.conditional);
    CHECK(c.d_edge == ModelConfig().d_edge);
    CHECK_THROWS_AS((void)model_config_from_json(nlohmann::json{ { "hiden", 12 } }), ValidationError);
    CHECK_THROWS_AS((void)model_config_from_json(nlohmann::json{ { "hidden", "wide" } }), ValidationError);
    CHECK_THROWS_AS((void)model_config_from_json(nlohmann::json{ { "hidden", 0 } }), ValidationError);
}

TEST_CASE("normalization round trip and zero range")
{
    const auto data = synth_dataset(12, all_families(), 0.05, 2);
    const auto n = Normalization::fit(data);
    CHECK(n.names == PropertyVector::standard_names());
    for (const auto& l: data)
    {
        const auto y = l.properties()->values;
        const auto z = n.normalize(y);
        CHECK((z.array() >= -1e-12).all());
        CHECK((z.array() <= 1.0 + 1e-12).all());
        CHECK((n.denormalize(z) - y).cwiseAbs().maxCoeff() < 1e-12);
    }
    // Unperturbed cubic cells all share one label: zero range maps to offsets.
    const auto flat = std::vector<Lattice>(3, synth_family(Family::Cubic, 0.0, 1));
    const auto f = Normalization::fit(flat);
    CHECK(f.normalize(flat[0].properties()->values).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(Normalization::fit(std::vector<Lattice>{}), ValidationError);
    CHECK_THROWS_AS(Normalization::fit(std::vector<Lattice>{ Lattice::from_cell(family_cell(Family::Bcc)) }),
                    ValidationError);
}

TEST_CASE("encode is deterministic and sized")
{
    const auto p = untrained();
    const auto l = synth_family(Family::Octet, 0.03, 3);
    const auto a = encode(l, p);
    const auto b = encode(l, p);
    CHECK(a == b);
    CHECK(a.node_count() == l.cell().size());
    CHECK(a.lattice.dim() == p.config.d_lattice);
    CHECK(a.semantic.dim() == p.config.d_semantic);
    CHECK(a.position[0].dim() == p.config.d_position);
    CHECK(a.edge[0].dim() == p.config.d_edge);
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("encode is permutation equivariant")
{
    const auto p = untrained();
    auto rng = std::mt19937_64(31);
    for (const auto f: all_families())
    {
        const auto l = synth_family(f, 0.04, 10);
        auto perm = std::vector<int>(l.cell().size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto lp = Lattice(l.vectors(), l.cell().permuted(perm), l.properties());
        const auto a = encode(l, p);
        const auto b = encode(lp, p);
        CHECK(same(a.lattice, b.lattice, 1e-6));
        CHECK(same(a.semantic, b.semantic, 1e-6));
        for (std::size_t k = 0; k < perm.size(); ++k)
        {
            CHECK(same(b.position[k], a.position[static_cast<std::size_t>(perm[k])], 1e-9));
            CHECK(same(b.edge[k], a.edge[static_cast<std::size_t>(perm[k])], 1e-9));
        }
    }
}

TEST_CASE("encode handles a single isolated node")
{
    const auto p = untrained();
    const auto l = Lattice::from_cell(UnitCell({ Vec3(0.5, 0.5, 0.5) }, {}));
    const auto s = encode(l, p);
    CHECK(s.node_count() == 1);
    CHECK(s.position[0].mean().allFinite());
}

TEST_CASE("decode emits the latent node count with symmetric edge scores")
{
    const auto p = untrained();
    const auto s = encode(synth_family(Family::Fcc, 0.03, 4), p);
    const auto d = decode(s, p, {});
    CHECK(d.lattice.cell().size() == s.node_count());
    CHECK((d.edge_probability - d.edge_probability.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.edge_probability.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.properties.names == PropertyVector::standard_names());
    for (const auto& e: d.lattice.cell().edges())
        CHECK(d.edge_probability(e.a, e.b) > 0.5);
}

TEST_CASE("decode of a near-zero-variance state ignores the seed")
{
    const auto p = untrained();
    auto s = encode(synth_family(Family::Bcc, 0.03, 4), p);
    auto tighten = [](DiagGaussian& g) { g = DiagGaussian(g.mean(), Eigen::VectorXd::Constant(g.dim(), 1e-300)); };
    tighten(s.lattice);
    tighten(s.semantic);
    for (auto& g: s.position)
        tighten(g);
    for (auto& g: s.edge)
        tighten(g);
    auto o1 = DecodeOptions();
    o1.seed = 1;
    auto o2 = DecodeOptions();
    o2.seed = 2;
    const auto a = decode(s, p, o1);
    const auto b = decode(s, p, o2);
    CHECK(a.lattice == b.lattice);
    auto means = DecodeOptions();
    means.sample = false;
    CHECK(decode(s, p, means).lattice == a.lattice);
}

TEST_CASE("decode validates its inputs")
{
    const auto p = untrained();
    auto s = encode(synth_family(Family::Bcc, 0.03, 4), p);
    auto o = DecodeOptions();
    o.edge_threshold = 1.0;
    CHECK_THROWS_AS(decode(s, p, o), ValidationError);
    s.lattice = DiagGaussian::standard(p.config.d_lattice + 1);
    CHECK_THROWS_AS(decode(s, p, {}), ValidationError);
}

TEST_CASE("elbo bookkeeping")
{
    const auto p = untrained();
    for (const auto f: all_families())
    {
        const auto b = elbo(synth_family(f, 0.03, 6), p, 17);
        CHECK(b.kl_lattice >= 0.0);
        CHECK(b.kl_position >= 0.0);
        CHECK(b.kl_edge >= 0.0);
        CHECK(b.kl_semantic >= 0.0);
        CHECK(b.total == doctest::Approx(b.reconstruction() + p.config.kl_weight * b.kl()).epsilon(1e-12));
        CHECK(std::abs(b.total - (b.reconstruction() + p.config.kl_weight * b.kl())) < 1e-9);
        CHECK(b.elbo() == -b.total);
    }
}

TEST_CASE("posterior equal to the prior has zero KL")
{
    auto p = untrained();
    const auto lay = p.layout();
    for (const auto k: { lay.pos_mu_w, lay.pos_mu_b, lay.pos_ls_w, lay.pos_ls_b, lay.edge_mu_w, lay.edge_mu_b,
                         lay.edge_ls_w, lay.edge_ls_b, lay.lat_mu_w, lay.lat_mu_b, lay.lat_ls_w, lay.lat_ls_b,
                         lay.sem_mu_w, lay.sem_mu_b, lay.sem_ls_w, lay.sem_ls_b })
        p.blocks[static_cast<std::size_t>(k)].value.setZero();
    const auto b = elbo(synth_family(Family::Octet, 0.03, 6), p, 3);
    CHECK(b.kl_lattice == 0.0);
    CHECK(b.kl_position == 0.0);
    CHECK(b.kl_edge == 0.0);
    CHECK(b.kl_semantic == 0.0);
}

TEST_CASE("elbo gradient matches central differences")
{
    for (const auto conditional: { false, true })
    {
        const auto p = untrained(conditional);
        const auto lattice = synth_family(Family::Bcc, 0.05, 8);
        auto grad = zero_gradients(p);
        (void)elbo(lattice, p, 42, &grad);
        auto worst = 0.0;
        for (std::size_t b = 0; b < p.blocks.size(); ++b)
            for (Eigen::Index k = 0; k < p.blocks[b].value.size(); ++k)
            {
                auto q = p;
                const auto h = 1e-5;
                q.blocks[b].value.data()[k] += h;
                const auto fp = elbo(lattice, q, 42).total;
                q.blocks[b].value.data()[k] -= 2 * h;
                const auto fm = elbo(lattice, q, 42).total;
                worst = std::max(worst, oracle::relative_error(grad[b].data()[k], (fp - fm) / (2 * h)));
            }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("training is deterministic and lowers the loss")
{
    const auto data = synth_dataset(12, all_families(), 0.04, 7);
    auto c = tiny_config();
    c.max_epochs = 15;
    const auto a = train(data, c);
    const auto b = train(data, c);
    CHECK(a.params == b.params);
    CHECK_FALSE(a.diverged);
    CHECK(a.epochs.size() == 16);
    CHECK(a.epochs[static_cast<std::size_t>(a.best_epoch)].total < a.epochs.front().total);
    for (const auto& e: a.epochs)
        CHECK(std::isfinite(e.total));
    CHECK_THROWS_AS((void)train(std::vector<Lattice>{}, c), ValidationError);
}

TEST_CASE("predictor training leaves the backbone untouched")
{
    const auto data = synth_dataset(20, all_families(), 0.04, 8);
    const auto base = train(data, tiny_config()).params;
    CHECK_THROWS_AS((void)predict_properties(data[0], base), ValidationError);
    const auto report = train_predictor(data, base);
    CHECK(report.params.predictor_trained);
    CHECK(report.params.backbone_hash() == base.backbone_hash());
    const auto lay = base.layout();
    for (int k = 0; k < lay.first_predictor; ++k)
        CHECK(report.params.blocks[static_cast<std::size_t>(k)].value
              == base.blocks[static_cast<std::size_t>(k)].value);
    CHECK(report.validation_mse.size() == report.train_mse.size());
    const auto y = predict_properties(data[0], report.params);
    CHECK(y.names == PropertyVector::standard_names());
    CHECK(y.values.allFinite());
}

TEST_CASE("checkpoint round trip")
{
    const auto& p = symlat::test::tiny_trained_model();
    const auto path = std::filesystem::temp_directory_path() / "symlat_test_checkpoint.json";
    save_checkpoint(path, p);
    const auto q = load_checkpoint(path);
    CHECK(q == p);
    CHECK(q.backbone_hash() == p.backbone_hash());
    const auto l = synth_family(Family::Fcc, 0.03, 2);
    CHECK(predict_properties(l, q) == predict_properties(l, p));

    {
        auto out = std::ofstream(path);
        out << R"({"format": "symlat-checkpoint", "version": 99})";
    }
    CHECK_THROWS_AS((void)load_checkpoint(path), ValidationError);
    {
        auto out = std::ofstream(path);
        out << "{not json";
    }
    CHECK_THROWS_AS((void)load_checkpoint(path), ValidationError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)load_checkpoint(path), ValidationError);
}
