// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

namespace symlat
{

namespace
{

constexpr int kNodeFeatures = 7;
constexpr double kDegreeScale = 8.0;
constexpr double kLogStdInit = -1.0;
constexpr double kLogStdClamp = 20.0;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    auto z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int condition_dim(const ModelConfig& c)
{
    return c.conditional ? c.d_properties : 0;
}

double softplus(double s)
{
    return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
}

double sigmoid(double s)
{
    if (s >= 0.0)
        return 1.0 / (1.0 + std::exp(-s));
    const auto e = std::exp(s);
    return e / (1.0 + e);
}

Eigen::MatrixXd node_features(const Lattice& lattice)
{
    const auto& cell = lattice.cell();
    const auto n = static_cast<Eigen::Index>(cell.nodes().size());
    const auto deg = cell.degrees();
    auto x = Eigen::MatrixXd(kNodeFeatures, n);
    x.bottomRows(3).setZero();
    for (Eigen::Index i = 0; i < n; ++i)
    {
        x.block<3, 1>(0, i) = cell.nodes()[static_cast<std::size_t>(i)];
        x(3, i) = deg[static_cast<std::size_t>(i)] / kDegreeScale;
    }
    // Mean squared direction cosines of incident struts.
    for (const auto& e: cell.edges())
    {
        const Vec3 d = lattice.to_cartesian(cell.nodes()[static_cast<std::size_t>(e.b)]
                                            - cell.nodes()[static_cast<std::size_t>(e.a)]);
        const auto len2 = d.squaredNorm();
        if (len2 <= 0.0)
            continue;
        const Vec3 u2 = d.cwiseAbs2() / len2;
        x.block<3, 1>(4, e.a) += u2 / deg[static_cast<std::size_t>(e.a)];
        x.block<3, 1>(4, e.b) += u2 / deg[static_cast<std::size_t>(e.b)];
    }
    return x;
}

// agg(j, i) = 1/deg_i for each neighbor j of i, so (H * agg).col(i) is the
// neighborhood mean of node i.
Eigen::MatrixXd neighbor_mean(const UnitCell& cell)
{
    const auto n = static_cast<Eigen::Index>(cell.nodes().size());
    const auto deg = cell.degrees();
    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e: cell.edges())
    {
        agg(e.a, e.b) = 1.0 / deg[static_cast<std::size_t>(e.b)];
        agg(e.b, e.a) = 1.0 / deg[static_cast<std::size_t>(e.a)];
    }
    return agg;
}

Eigen::VectorXd flatten(const Mat3& m)
{
    auto v = Eigen::VectorXd(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            v[3 * r + c] = m(r, c);
    return v;
}

Mat3 unflatten(const Eigen::VectorXd& v)
{
    auto m = Mat3();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            m(r, c) = v[3 * r + c];
    return m;
}

struct EncoderCache
{
    Eigen::MatrixXd x;
    Eigen::MatrixXd agg;
    std::vector<Eigen::MatrixXd> h;
    std::vector<Eigen::MatrixXd> m;
    Eigen::VectorXd u;
    Eigen::MatrixXd mu_p, ls_p, mu_e, ls_e;
    Eigen::VectorXd mu_l, ls_l, mu_s, ls_s;
};

struct Access
{
    const ModelParams& params;
    const Eigen::MatrixXd& operator[](int i) const { return params.blocks[static_cast<std::size_t>(i)].value; }
    Eigen::VectorXd bias(int i) const { return params.blocks[static_cast<std::size_t>(i)].value.col(0); }
};

EncoderCache run_encoder(const Lattice& lattice, const ModelParams& params, const ParamLayout& lay)
{
    const auto w = Access{ params };
    auto c = EncoderCache();
    c.x = node_features(lattice);
    c.agg = neighbor_mean(lattice.cell());
    const auto n = c.x.cols();

    c.h.push_back(((w[lay.embed_w] * c.x).colwise() + w.bias(lay.embed_b)).array().tanh().matrix());
    for (std::size_t r = 0; r < lay.round_self.size(); ++r)
    {
        c.m.push_back(c.h.back() * c.agg);
        const Eigen::MatrixXd a = w[lay.round_self[r]] * c.h.back() + w[lay.round_neighbor[r]] * c.m.back();
        c.h.push_back((a.colwise() + w.bias(lay.round_bias[r])).array().tanh().matrix());
    }
    const auto& h = c.h.back();

    c.mu_p = (w[lay.pos_mu_w] * h).colwise() + w.bias(lay.pos_mu_b);
    c.ls_p = (w[lay.pos_ls_w] * h).colwise() + w.bias(lay.pos_ls_b);
    c.mu_e = (w[lay.edge_mu_w] * h).colwise() + w.bias(lay.edge_mu_b);
    c.ls_e = (w[lay.edge_ls_w] * h).colwise() + w.bias(lay.edge_ls_b);

    c.u = Eigen::VectorXd(h.rows() + 9);
    c.u << h.rowwise().sum() / static_cast<double>(n), flatten(lattice.vectors());
    c.mu_l = w[lay.lat_mu_w] * c.u + w.bias(lay.lat_mu_b);
    c.ls_l = w[lay.lat_ls_w] * c.u + w.bias(lay.lat_ls_b);
    c.mu_s = w[lay.sem_mu_w] * c.u + w.bias(lay.sem_mu_b);
    c.ls_s = w[lay.sem_ls_w] * c.u + w.bias(lay.sem_ls_b);
    return c;
}

struct DecoderCache
{
    Eigen::VectorXd lat_in, lat_out;
    Eigen::MatrixXd pos_in, pos_hidden, pos_out;
    Eigen::MatrixXd edge_in, sym, score;
    Eigen::VectorXd prop_out;
};

Eigen::MatrixXd with_condition(const Eigen::MatrixXd& z, const Eigen::VectorXd& cond)
{
    auto out = Eigen::MatrixXd(z.rows() + cond.size(), z.cols());
    out.topRows(z.rows()) = z;
    if (cond.size() > 0)
        out.bottomRows(cond.size()) = cond.replicate(1, z.cols());
    return out;
}

DecoderCache run_decoder(const Eigen::VectorXd& zl, const Eigen::MatrixXd& zp, const Eigen::MatrixXd& ze,
                         const Eigen::VectorXd& zs, const Eigen::VectorXd& cond, const ModelParams& params,
                         const ParamLayout& lay)
{
    const auto w = Access{ params };
    auto d = DecoderCache();
    d.lat_in = with_condition(zl, cond).col(0);
    d.lat_out = w[lay.dec_lat_w] * d.lat_in + w.bias(lay.dec_lat_b);

    d.pos_in = with_condition(zp, cond);
    d.pos_hidden = ((w[lay.dec_pos_w1] * d.pos_in).colwise() + w.bias(lay.dec_pos_b1)).array().tanh().matrix();
    d.pos_out = (w[lay.dec_pos_w2] * d.pos_hidden).colwise() + w.bias(lay.dec_pos_b2);

    d.edge_in = with_condition(ze, cond);
    d.sym = 0.5 * (w[lay.dec_edge_a] + w[lay.dec_edge_a].transpose());
    d.score = (d.edge_in.transpose() * d.sym * d.edge_in).array() + w[lay.dec_edge_b](0, 0);

    d.prop_out = w[lay.dec_prop_w] * zs + w.bias(lay.dec_prop_b);
    return d;
}

Eigen::VectorXd condition_vector(const ModelParams& params, const std::optional<PropertyVector>& props)
{
    const auto dim = condition_dim(params.config);
    if (dim == 0)
        return Eigen::VectorXd();
    if (!props || params.normalization.empty())
        return Eigen::VectorXd::Zero(dim);
    if (props->values.size() != dim)
        throw ValidationError("condition has " + std::to_string(props->values.size()) + " properties, model expects "
                              + std::to_string(dim));
    return params.normalization.normalize(props->values);
}

double kl_standard(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& ls)
{
    return (0.5 * (mu.array().square() + (2.0 * ls.array()).exp() - 1.0) - ls.array()).sum();
}

DiagGaussian gaussian_from(const Eigen::VectorXd& mu, const Eigen::VectorXd& ls)
{
    return DiagGaussian::from_log_std(mu, ls.cwiseMax(-kLogStdClamp).cwiseMin(kLogStdClamp));
}

Eigen::MatrixXd draw(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols)
{
    auto normal = std::normal_distribution<double>(0.0, 1.0);
    auto m = Eigen::MatrixXd(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            m(r, c) = normal(rng);
    return m;
}

void add_dense_grad(Gradients& g, int w, int b, const Eigen::MatrixXd& d_out, const Eigen::MatrixXd& in)
{
    g[static_cast<std::size_t>(w)] += d_out * in.transpose();
    g[static_cast<std::size_t>(b)] += d_out.rowwise().sum();
}

class Adam
{
  public:
    Adam(const ModelParams& params, double lr, int first, int last): lr_(lr), first_(first), last_(last)
    {
        for (int i = first; i < last; ++i)
        {
            const auto& v = params.blocks[static_cast<std::size_t>(i)].value;
            m_.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
            v_.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
        }
    }

    void step(ModelParams& params, const Gradients& grad)
    {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t_;
        const auto c1 = 1.0 - std::pow(b1, t_);
        const auto c2 = 1.0 - std::pow(b2, t_);
        for (int i = first_; i < last_; ++i)
        {
            const auto k = static_cast<std::size_t>(i - first_);
            const auto& g = grad[static_cast<std::size_t>(i)];
            m_[k] = b1 * m_[k] + (1.0 - b1) * g;
            v_[k] = b2 * v_[k] + (1.0 - b2) * g.cwiseAbs2();
            params.blocks[static_cast<std::size_t>(i)].value.array() -=
                lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps);
        }
    }

  private:
    double lr_;
    int first_, last_;
    int t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

} // namespace

void ModelConfig::validate() const
{
    if (d_lattice < 1 || d_position < 1 || d_edge < 1 || d_semantic < 1 || d_properties < 1)
        throw ValidationError("latent and property dimensions must be >= 1");
    if (hidden < 1 || rounds < 0 || predictor_hidden < 1)
        throw ValidationError("hidden width must be >= 1 and rounds >= 0");
    if (!(learning_rate > 0.0) || !(predictor_learning_rate > 0.0))
        throw ValidationError("learning rates must be > 0");
    if (max_epochs < 0 || predictor_max_epochs < 0 || patience < 1 || predictor_patience < 1)
        throw ValidationError("epoch counts must be >= 0 and patience >= 1");
    if (batch_size < 0)
        throw ValidationError("batch size must be >= 0");
    if (!(kl_weight >= 0.0))
        throw ValidationError("kl weight must be >= 0");
    if (kl_warmup_epochs < 0)
        throw ValidationError("kl warm-up epochs must be >= 0");
    if (!(obs_std_coords > 0.0) || !(obs_std_lattice > 0.0) || !(obs_std_properties > 0.0))
        throw ValidationError("observation standard deviations must be > 0");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ValidationError("validation fraction must lie in [0, 1)");
}

Eigen::VectorXd Normalization::normalize(const Eigen::VectorXd& y) const
{
    if (y.size() != min.size())
        throw ValidationError("property vector length does not match normalization");
    const Eigen::ArrayXd range = (max - min).array();
    return ((y - min).array() / (range > 0.0).select(range, 1.0)).matrix();
}

Eigen::VectorXd Normalization::denormalize(const Eigen::VectorXd& y) const
{
    if (y.size() != min.size())
        throw ValidationError("property vector length does not match normalization");
    const Eigen::ArrayXd range = (max - min).array();
    return (y.array() * (range > 0.0).select(range, 1.0)).matrix() + min;
}

Normalization Normalization::fit(std::span<const Lattice> dataset)
{
    if (dataset.empty())
        throw ValidationError("cannot fit normalization on an empty dataset");
    auto out = Normalization();
    for (std::size_t k = 0; k < dataset.size(); ++k)
    {
        const auto& props = dataset[k].properties();
        if (!props)
            throw ValidationError("lattice " + std::to_string(k) + " has no property labels");
        if (k == 0)
        {
            out.names = props->names;
            out.min = props->values;
            out.max = props->values;
            continue;
        }
        if (props->names != out.names)
            throw ValidationError("lattice " + std::to_string(k) + " has inconsistent property names");
        out.min = out.min.cwiseMin(props->values);
        out.max = out.max.cwiseMax(props->values);
    }
    return out;
}

ParamLayout ParamLayout::for_config(const ModelConfig& c)
{
    auto l = ParamLayout();
    auto next = 0;
    auto take = [&next] { return next++; };
    l.embed_w = take();
    l.embed_b = take();
    for (int r = 0; r < c.rounds; ++r)
    {
        l.round_self.push_back(take());
        l.round_neighbor.push_back(take());
        l.round_bias.push_back(take());
    }
    for (auto* p: { &l.pos_mu_w, &l.pos_mu_b, &l.pos_ls_w, &l.pos_ls_b, &l.edge_mu_w, &l.edge_mu_b, &l.edge_ls_w,
                    &l.edge_ls_b, &l.lat_mu_w, &l.lat_mu_b, &l.lat_ls_w, &l.lat_ls_b, &l.sem_mu_w, &l.sem_mu_b,
                    &l.sem_ls_w, &l.sem_ls_b, &l.dec_lat_w, &l.dec_lat_b, &l.dec_pos_w1, &l.dec_pos_b1,
                    &l.dec_pos_w2, &l.dec_pos_b2, &l.dec_edge_a, &l.dec_edge_b, &l.dec_prop_w, &l.dec_prop_b })
        *p = take();
    l.first_predictor = next;
    for (auto* p: { &l.pred_w1, &l.pred_b1, &l.pred_w2, &l.pred_b2 })
        *p = take();
    l.count = next;
    return l;
}

std::size_t ModelParams::parameter_count() const
{
    auto n = std::size_t{ 0 };
    for (const auto& b: blocks)
        n += static_cast<std::size_t>(b.value.size());
    return n;
}

std::uint64_t ModelParams::backbone_hash() const
{
    auto h = std::uint64_t{ 0xcbf29ce484222325ULL };
    const auto first_pred = static_cast<std::size_t>(layout().first_predictor);
    for (std::size_t i = 0; i < first_pred && i < blocks.size(); ++i)
    {
        const auto& v = blocks[i].value;
        const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
        for (std::size_t k = 0; k < static_cast<std::size_t>(v.size()) * sizeof(double); ++k)
        {
            h ^= bytes[k];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

bool ModelParams::operator==(const ModelParams& other) const
{
    if (!(config == other.config) || predictor_trained != other.predictor_trained
        || blocks.size() != other.blocks.size() || normalization.names != other.normalization.names
        || normalization.min != other.normalization.min || normalization.max != other.normalization.max)
        return false;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].name != other.blocks[i].name || blocks[i].value.rows() != other.blocks[i].value.rows()
            || blocks[i].value.cols() != other.blocks[i].value.cols() || blocks[i].value != other.blocks[i].value)
            return false;
    return true;
}

ModelParams init_params(const ModelConfig& config)
{
    config.validate();
    const auto lay = ParamLayout::for_config(config);
    auto p = ModelParams();
    p.config = config;
    p.blocks.resize(static_cast<std::size_t>(lay.count));

    auto rng = std::mt19937_64(config.seed);
    auto normal = std::normal_distribution<double>(0.0, 1.0);
    auto dense = [&](int w, int b, const std::string& name, int out, int in, double bias = 0.0) {
        auto m = Eigen::MatrixXd(out, in);
        const auto scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                m(r, c) = normal(rng) * scale;
        p.blocks[static_cast<std::size_t>(w)] = { name + ".weight", std::move(m) };
        p.blocks[static_cast<std::size_t>(b)] = { name + ".bias", Eigen::MatrixXd::Constant(out, 1, bias) };
    };

    const auto hid = config.hidden;
    const auto cd = condition_dim(config);
    dense(lay.embed_w, lay.embed_b, "encoder.embed", hid, kNodeFeatures);
    for (int r = 0; r < config.rounds; ++r)
    {
        const auto name = "encoder.round" + std::to_string(r);
        dense(lay.round_self[static_cast<std::size_t>(r)], lay.round_bias[static_cast<std::size_t>(r)], name, hid,
              hid);
        p.blocks[static_cast<std::size_t>(lay.round_bias[static_cast<std::size_t>(r)])].name = name + ".bias";
        p.blocks[static_cast<std::size_t>(lay.round_self[static_cast<std::size_t>(r)])].name = name + ".self";
        auto m = Eigen::MatrixXd(hid, hid);
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index k = 0; k < m.rows(); ++k)
                m(k, c) = normal(rng) / std::sqrt(static_cast<double>(hid));
        p.blocks[static_cast<std::size_t>(lay.round_neighbor[static_cast<std::size_t>(r)])] = { name + ".neighbor",
                                                                                                 std::move(m) };
    }
    dense(lay.pos_mu_w, lay.pos_mu_b, "encoder.position.mean", config.d_position, hid);
    dense(lay.pos_ls_w, lay.pos_ls_b, "encoder.position.log_std", config.d_position, hid, kLogStdInit);
    dense(lay.edge_mu_w, lay.edge_mu_b, "encoder.edge.mean", config.d_edge, hid);
    dense(lay.edge_ls_w, lay.edge_ls_b, "encoder.edge.log_std", config.d_edge, hid, kLogStdInit);
    dense(lay.lat_mu_w, lay.lat_mu_b, "encoder.lattice.mean", config.d_lattice, hid + 9);
    dense(lay.lat_ls_w, lay.lat_ls_b, "encoder.lattice.log_std", config.d_lattice, hid + 9, kLogStdInit);
    dense(lay.sem_mu_w, lay.sem_mu_b, "encoder.semantic.mean", config.d_semantic, hid + 9);
    dense(lay.sem_ls_w, lay.sem_ls_b, "encoder.semantic.log_std", config.d_semantic, hid + 9, kLogStdInit);
    dense(lay.dec_lat_w, lay.dec_lat_b, "decoder.lattice", 9, config.d_lattice + cd);
    dense(lay.dec_pos_w1, lay.dec_pos_b1, "decoder.position.hidden", hid, config.d_position + cd);
    dense(lay.dec_pos_w2, lay.dec_pos_b2, "decoder.position.out", 3, hid);
    dense(lay.dec_edge_a, lay.dec_edge_b, "decoder.edge", config.d_edge + cd, config.d_edge + cd);
    p.blocks[static_cast<std::size_t>(lay.dec_edge_a)].name = "decoder.edge.bilinear";
    p.blocks[static_cast<std::size_t>(lay.dec_edge_b)].value.resize(1, 1);
    p.blocks[static_cast<std::size_t>(lay.dec_edge_b)].value(0, 0) = 0.0;
    dense(lay.dec_prop_w, lay.dec_prop_b, "decoder.properties", config.d_properties, config.d_semantic);
    dense(lay.pred_w1, lay.pred_b1, "predictor.hidden", config.predictor_hidden, config.d_semantic);
    dense(lay.pred_w2, lay.pred_b2, "predictor.out", config.d_properties, config.predictor_hidden);
    return p;
}

Gradients zero_gradients(const ModelParams& params)
{
    auto g = Gradients();
    g.reserve(params.blocks.size());
    for (const auto& b: params.blocks)
        g.push_back(Eigen::MatrixXd::Zero(b.value.rows(), b.value.cols()));
    return g;
}

LatentState encode(const Lattice& lattice, const ModelParams& params)
{
    const auto c = run_encoder(lattice, params, params.layout());
    auto state = LatentState{ gaussian_from(c.mu_l, c.ls_l), gaussian_from(c.mu_s, c.ls_s), {}, {} };
    for (Eigen::Index i = 0; i < c.mu_p.cols(); ++i)
    {
        state.position.push_back(gaussian_from(c.mu_p.col(i), c.ls_p.col(i)));
        state.edge.push_back(gaussian_from(c.mu_e.col(i), c.ls_e.col(i)));
    }
    return state;
}

Decoded decode(const LatentState& state, const ModelParams& params, const DecodeOptions& options)
{
    state.validate();
    const auto& cfg = params.config;
    if (state.lattice.dim() != cfg.d_lattice || state.semantic.dim() != cfg.d_semantic
        || state.position[0].dim() != cfg.d_position || state.edge[0].dim() != cfg.d_edge)
        throw ValidationError("latent state dimensions do not match the model");
    if (!(options.edge_threshold > 0.0 && options.edge_threshold < 1.0))
        throw ValidationError("edge threshold must lie in (0, 1)");

    const auto n = static_cast<Eigen::Index>(state.node_count());
    auto rng = std::mt19937_64(options.seed);
    auto pick = [&](const DiagGaussian& g) -> Eigen::VectorXd { return options.sample ? sample(g, rng) : g.mean(); };

    const Eigen::VectorXd zl = pick(state.lattice);
    const Eigen::VectorXd zs = pick(state.semantic);
    auto zp = Eigen::MatrixXd(cfg.d_position, n);
    auto ze = Eigen::MatrixXd(cfg.d_edge, n);
    for (Eigen::Index i = 0; i < n; ++i)
        zp.col(i) = pick(state.position[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < n; ++i)
        ze.col(i) = pick(state.edge[static_cast<std::size_t>(i)]);

    const auto cond = condition_vector(params, options.condition);
    const auto d = run_decoder(zl, zp, ze, zs, cond, params, params.layout());

    const Mat3 vectors = unflatten(d.lat_out);
    if (!vectors.allFinite() || std::abs(vectors.determinant()) <= 1e-9)
        throw NumericalError("decoded lattice vectors are singular");

    auto nodes = std::vector<Vec3>();
    for (Eigen::Index i = 0; i < n; ++i)
        nodes.push_back(d.pos_out.col(i));
    Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(n, n);
    auto edges = std::vector<Edge>();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
        {
            prob(i, j) = prob(j, i) = sigmoid(d.score(i, j));
            if (prob(i, j) > options.edge_threshold)
                edges.push_back({ static_cast<int>(i), static_cast<int>(j) });
        }

    auto props = PropertyVector();
    if (!params.normalization.empty())
        props = PropertyVector{ params.normalization.names, params.normalization.denormalize(d.prop_out) };
    else
        props = PropertyVector{ {}, d.prop_out };
    if (props.names.empty() && props.values.size() == 3)
        props.names = PropertyVector::standard_names();

    return Decoded{ Lattice(vectors, UnitCell(std::move(nodes), std::move(edges))), std::move(props), std::move(prob) };
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o)
{
    rec_lattice += o.rec_lattice;
    rec_position += o.rec_position;
    rec_edge += o.rec_edge;
    rec_properties += o.rec_properties;
    kl_lattice += o.kl_lattice;
    kl_position += o.kl_position;
    kl_edge += o.kl_edge;
    kl_semantic += o.kl_semantic;
    total += o.total;
    return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s)
{
    rec_lattice *= s;
    rec_position *= s;
    rec_edge *= s;
    rec_properties *= s;
    kl_lattice *= s;
    kl_position *= s;
    kl_edge *= s;
    kl_semantic *= s;
    total *= s;
    return *this;
}

namespace
{

LossBreakdown elbo_impl(const Lattice& lattice, const ModelParams& params, std::uint64_t seed, Gradients* grad,
                        double kl_weight)
{
    const auto& cfg = params.config;
    const auto lay = params.layout();
    const auto w = Access{ params };
    const auto enc = run_encoder(lattice, params, lay);
    const auto n = enc.x.cols();

    auto rng = std::mt19937_64(seed);
    const Eigen::VectorXd eta_l = draw(rng, cfg.d_lattice, 1).col(0);
    const Eigen::VectorXd eta_s = draw(rng, cfg.d_semantic, 1).col(0);
    const Eigen::MatrixXd eta_p = draw(rng, cfg.d_position, n);
    const Eigen::MatrixXd eta_e = draw(rng, cfg.d_edge, n);

    const Eigen::VectorXd sl = enc.ls_l.array().exp();
    const Eigen::VectorXd ss = enc.ls_s.array().exp();
    const Eigen::MatrixXd sp = enc.ls_p.array().exp();
    const Eigen::MatrixXd se = enc.ls_e.array().exp();
    const Eigen::VectorXd zl = enc.mu_l + sl.cwiseProduct(eta_l);
    const Eigen::VectorXd zs = enc.mu_s + ss.cwiseProduct(eta_s);
    const Eigen::MatrixXd zp = enc.mu_p + sp.cwiseProduct(eta_p);
    const Eigen::MatrixXd ze = enc.mu_e + se.cwiseProduct(eta_e);

    const auto cond = condition_vector(params, lattice.properties());
    const auto dec = run_decoder(zl, zp, ze, zs, cond, params, lay);

    auto out = LossBreakdown();
    const Eigen::VectorXd lat_err = dec.lat_out - flatten(lattice.vectors());
    const auto var_l = cfg.obs_std_lattice * cfg.obs_std_lattice;
    out.rec_lattice = 0.5 * lat_err.squaredNorm() / var_l;

    auto target_p = Eigen::MatrixXd(3, n);
    for (Eigen::Index i = 0; i < n; ++i)
        target_p.col(i) = lattice.cell().nodes()[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd pos_err = dec.pos_out - target_p;
    const auto var_p = cfg.obs_std_coords * cfg.obs_std_coords;
    out.rec_position = 0.5 * pos_err.squaredNorm() / var_p;

    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e: lattice.cell().edges())
        adj(e.a, e.b) = adj(e.b, e.a) = 1.0;
    Eigen::MatrixXd d_score = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
        {
            const auto s = dec.score(i, j);
            out.rec_edge += softplus(s) - adj(i, j) * s;
            d_score(i, j) = sigmoid(s) - adj(i, j);
        }

    auto prop_err = Eigen::VectorXd();
    const auto var_y = cfg.obs_std_properties * cfg.obs_std_properties;
    if (lattice.properties() && !params.normalization.empty())
    {
        prop_err = dec.prop_out - params.normalization.normalize(lattice.properties()->values);
        out.rec_properties = 0.5 * prop_err.squaredNorm() / var_y;
    }

    out.kl_lattice = kl_standard(enc.mu_l, enc.ls_l);
    out.kl_semantic = kl_standard(enc.mu_s, enc.ls_s);
    out.kl_position = kl_standard(enc.mu_p, enc.ls_p);
    out.kl_edge = kl_standard(enc.mu_e, enc.ls_e);
    out.total = out.reconstruction() + params.config.kl_weight * out.kl();

    if (grad == nullptr)
        return out;
    auto& g = *grad;
    const auto hid = static_cast<Eigen::Index>(cfg.hidden);

    // Decoder heads.
    const Eigen::VectorXd d_lat_out = lat_err / var_l;
    add_dense_grad(g, lay.dec_lat_w, lay.dec_lat_b, d_lat_out, dec.lat_in);
    Eigen::VectorXd d_zl = (w[lay.dec_lat_w].transpose() * d_lat_out).head(cfg.d_lattice);

    const Eigen::MatrixXd d_pos_out = pos_err / var_p;
    add_dense_grad(g, lay.dec_pos_w2, lay.dec_pos_b2, d_pos_out, dec.pos_hidden);
    const Eigen::MatrixXd d_pos_hidden = (w[lay.dec_pos_w2].transpose() * d_pos_out).array()
                                         * (1.0 - dec.pos_hidden.array().square());
    add_dense_grad(g, lay.dec_pos_w1, lay.dec_pos_b1, d_pos_hidden, dec.pos_in);
    Eigen::MatrixXd d_zp = (w[lay.dec_pos_w1].transpose() * d_pos_hidden).topRows(cfg.d_position);

    const Eigen::MatrixXd d_sym = dec.edge_in * d_score * dec.edge_in.transpose();
    g[static_cast<std::size_t>(lay.dec_edge_a)] += 0.5 * (d_sym + d_sym.transpose());
    g[static_cast<std::size_t>(lay.dec_edge_b)](0, 0) += d_score.sum();
    Eigen::MatrixXd d_ze = (dec.sym * dec.edge_in * (d_score + d_score.transpose())).topRows(cfg.d_edge);

    Eigen::VectorXd d_zs = Eigen::VectorXd::Zero(cfg.d_semantic);
    if (prop_err.size() > 0)
    {
        const Eigen::VectorXd d_prop = prop_err / var_y;
        add_dense_grad(g, lay.dec_prop_w, lay.dec_prop_b, d_prop, zs);
        d_zs = w[lay.dec_prop_w].transpose() * d_prop;
    }

    // Reparameterization and KL.
    const auto kw = kl_weight;
    const Eigen::VectorXd d_mu_l = d_zl + kw * enc.mu_l;
    const Eigen::VectorXd d_ls_l = (d_zl.array() * sl.array() * eta_l.array() + kw * (sl.array().square() - 1.0)).matrix();
    const Eigen::VectorXd d_mu_s = d_zs + kw * enc.mu_s;
    const Eigen::VectorXd d_ls_s = (d_zs.array() * ss.array() * eta_s.array() + kw * (ss.array().square() - 1.0)).matrix();
    const Eigen::MatrixXd d_mu_p = d_zp + kw * enc.mu_p;
    const Eigen::MatrixXd d_ls_p = (d_zp.array() * sp.array() * eta_p.array() + kw * (sp.array().square() - 1.0)).matrix();
    const Eigen::MatrixXd d_mu_e = d_ze + kw * enc.mu_e;
    const Eigen::MatrixXd d_ls_e = (d_ze.array() * se.array() * eta_e.array() + kw * (se.array().square() - 1.0)).matrix();

    // Encoder heads.
    const auto& h = enc.h.back();
    add_dense_grad(g, lay.pos_mu_w, lay.pos_mu_b, d_mu_p, h);
    add_dense_grad(g, lay.pos_ls_w, lay.pos_ls_b, d_ls_p, h);
    add_dense_grad(g, lay.edge_mu_w, lay.edge_mu_b, d_mu_e, h);
    add_dense_grad(g, lay.edge_ls_w, lay.edge_ls_b, d_ls_e, h);
    Eigen::MatrixXd d_h = w[lay.pos_mu_w].transpose() * d_mu_p + w[lay.pos_ls_w].transpose() * d_ls_p
                          + w[lay.edge_mu_w].transpose() * d_mu_e + w[lay.edge_ls_w].transpose() * d_ls_e;

    add_dense_grad(g, lay.lat_mu_w, lay.lat_mu_b, d_mu_l, enc.u);
    add_dense_grad(g, lay.lat_ls_w, lay.lat_ls_b, d_ls_l, enc.u);
    add_dense_grad(g, lay.sem_mu_w, lay.sem_mu_b, d_mu_s, enc.u);
    add_dense_grad(g, lay.sem_ls_w, lay.sem_ls_b, d_ls_s, enc.u);
    const Eigen::VectorXd d_u = w[lay.lat_mu_w].transpose() * d_mu_l + w[lay.lat_ls_w].transpose() * d_ls_l
                                + w[lay.sem_mu_w].transpose() * d_mu_s + w[lay.sem_ls_w].transpose() * d_ls_s;
    d_h.colwise() += d_u.head(hid) / static_cast<double>(n);

    // Message-passing rounds.
    for (auto r = static_cast<int>(lay.round_self.size()) - 1; r >= 0; --r)
    {
        const auto ru = static_cast<std::size_t>(r);
        const auto& h_out = enc.h[ru + 1];
        const Eigen::MatrixXd d_a = d_h.array() * (1.0 - h_out.array().square());
        g[static_cast<std::size_t>(lay.round_self[ru])] += d_a * enc.h[ru].transpose();
        g[static_cast<std::size_t>(lay.round_neighbor[ru])] += d_a * enc.m[ru].transpose();
        g[static_cast<std::size_t>(lay.round_bias[ru])] += d_a.rowwise().sum();
        d_h = w[lay.round_self[ru]].transpose() * d_a
              + (w[lay.round_neighbor[ru]].transpose() * d_a) * enc.agg.transpose();
    }
    const Eigen::MatrixXd d_a0 = d_h.array() * (1.0 - enc.h[0].array().square());
    add_dense_grad(g, lay.embed_w, lay.embed_b, d_a0, enc.x);
    return out;
}

} // namespace

LossBreakdown elbo(const Lattice& lattice, const ModelParams& params, std::uint64_t seed, Gradients* grad)
{
    return elbo_impl(lattice, params, seed, grad, params.config.kl_weight);
}

namespace
{

void check_dataset(std::span<const Lattice> dataset, const ModelConfig& config, Normalization& norm)
{
    if (dataset.empty())
        throw ValidationError("training dataset is empty");
    const auto labelled = std::count_if(dataset.begin(), dataset.end(),
                                        [](const Lattice& l) { return l.properties().has_value(); });
    if (labelled == 0)
        return;
    if (static_cast<std::size_t>(labelled) != dataset.size())
        throw ValidationError("dataset mixes labelled and unlabelled lattices");
    norm = Normalization::fit(dataset);
    if (static_cast<int>(norm.names.size()) != config.d_properties)
        throw ValidationError("dataset has " + std::to_string(norm.names.size()) + " properties, model expects "
                              + std::to_string(config.d_properties));
}

LossBreakdown dataset_loss(std::span<const Lattice> dataset, const ModelParams& params, std::uint64_t epoch,
                           Gradients* grad, double kl_weight)
{
    auto total = LossBreakdown();
    for (std::size_t k = 0; k < dataset.size(); ++k)
        total += elbo_impl(dataset[k], params, mix_seed(params.config.seed, epoch, k), grad, kl_weight);
    const auto inv = 1.0 / static_cast<double>(dataset.size());
    total *= inv;
    if (grad != nullptr)
        for (auto& g: *grad)
            g *= inv;
    return total;
}

} // namespace

TrainReport train(std::span<const Lattice> dataset, const ModelConfig& config)
{
    config.validate();
    auto params = init_params(config);
    check_dataset(dataset, config, params.normalization);

    const auto lay = params.layout();
    auto adam = Adam(params, config.learning_rate, 0, lay.first_predictor);
    const auto n = dataset.size();
    const auto batch = config.batch_size <= 0 || static_cast<std::size_t>(config.batch_size) >= n
                           ? n
                           : static_cast<std::size_t>(config.batch_size);
    auto order = std::vector<std::size_t>(n);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = std::mt19937_64(mix_seed(config.seed, 0xa11ce, 0));

    auto report = TrainReport();
    report.params = params;
    auto best = std::numeric_limits<double>::infinity();
    auto since_best = 0;

    for (int epoch = 0; epoch <= config.max_epochs; ++epoch)
    {
        const auto beta = config.kl_warmup_epochs > 0
                              ? config.kl_weight * std::min(1.0, static_cast<double>(epoch + 1) / config.kl_warmup_epochs)
                              : config.kl_weight;
        const auto full = batch == n;
        auto grad = zero_gradients(params);
        const auto loss =
            dataset_loss(dataset, params, static_cast<std::uint64_t>(epoch), full ? &grad : nullptr, beta);
        if (!std::isfinite(loss.total))
        {
            report.diverged = true;
            break;
        }
        report.epochs.push_back(loss);
        if (loss.total < best)
        {
            best = loss.total;
            report.best_epoch = epoch;
            report.params = params;
            since_best = 0;
        }
        else if (++since_best >= config.patience)
            break;
        if (epoch == config.max_epochs)
            break;

        if (full)
        {
            adam.step(params, grad);
            continue;
        }
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < n; start += batch)
        {
            const auto stop = std::min(n, start + batch);
            auto g = zero_gradients(params);
            for (auto k = start; k < stop; ++k)
                elbo_impl(dataset[order[k]], params,
                          mix_seed(config.seed ^ 0x5eed, static_cast<std::uint64_t>(epoch), k), &g, beta);
            for (auto& block: g)
                block /= static_cast<double>(stop - start);
            adam.step(params, g);
        }
    }
    return report;
}

namespace
{

struct PredictorCache
{
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd out;
};

PredictorCache run_predictor(const Eigen::MatrixXd& z, const ModelParams& params, const ParamLayout& lay)
{
    const auto w = Access{ params };
    auto c = PredictorCache();
    c.hidden = ((w[lay.pred_w1] * z).colwise() + w.bias(lay.pred_b1)).array().tanh().matrix();
    c.out = (w[lay.pred_w2] * c.hidden).colwise() + w.bias(lay.pred_b2);
    return c;
}

double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& y)
{
    return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols)
{
    auto out = Eigen::MatrixXd(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
    return out;
}

} // namespace

PredictorReport train_predictor(std::span<const Lattice> dataset, const ModelParams& params)
{
    const auto& cfg = params.config;
    if (dataset.empty())
        throw ValidationError("predictor dataset is empty");
    auto fitted = params;
    auto norm = Normalization::fit(dataset);
    if (static_cast<int>(norm.names.size()) != cfg.d_properties)
        throw ValidationError("dataset has " + std::to_string(norm.names.size()) + " properties, model expects "
                              + std::to_string(cfg.d_properties));
    if (fitted.normalization.empty())
        fitted.normalization = norm;
    else if (fitted.normalization.names != norm.names)
        throw ValidationError("dataset property names do not match the checkpoint");

    const auto n = static_cast<Eigen::Index>(dataset.size());
    auto z = Eigen::MatrixXd(cfg.d_semantic, n);
    auto y = Eigen::MatrixXd(cfg.d_properties, n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        const auto& lat = dataset[static_cast<std::size_t>(k)];
        z.col(k) = encode(lat, fitted).semantic.mean();
        y.col(k) = fitted.normalization.normalize(lat.properties()->values);
    }

    auto order = std::vector<Eigen::Index>(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto rng = std::mt19937_64(mix_seed(cfg.seed, 0x9e11, 0));
    std::shuffle(order.begin(), order.end(), rng);
    auto n_val = static_cast<Eigen::Index>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    if (cfg.validation_fraction > 0.0 && n >= 2)
        n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
    else
        n_val = 0;
    const auto val_idx = std::vector<Eigen::Index>(order.begin(), order.begin() + n_val);
    const auto train_idx = std::vector<Eigen::Index>(order.begin() + n_val, order.end());
    const auto z_train = gather(z, train_idx);
    const auto y_train = gather(y, train_idx);
    const auto z_val = val_idx.empty() ? z_train : gather(z, val_idx);
    const auto y_val = val_idx.empty() ? y_train : gather(y, val_idx);

    const auto lay = fitted.layout();
    auto adam = Adam(fitted, cfg.predictor_learning_rate, lay.first_predictor, lay.count);
    auto report = PredictorReport();
    auto best = std::numeric_limits<double>::infinity();
    auto best_blocks = std::vector<ParamBlock>(fitted.blocks.begin() + lay.first_predictor, fitted.blocks.end());
    auto since_best = 0;
    const auto w = Access{ fitted };

    for (int epoch = 0; epoch <= cfg.predictor_max_epochs; ++epoch)
    {
        const auto c = run_predictor(z_train, fitted, lay);
        const auto train_loss = mse(c.out, y_train);
        const auto val_loss = mse(run_predictor(z_val, fitted, lay).out, y_val);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw NumericalError("predictor training produced a non-finite loss");
        report.train_mse.push_back(train_loss);
        report.validation_mse.push_back(val_loss);
        if (val_loss < best)
        {
            best = val_loss;
            report.best_epoch = epoch;
            std::copy(fitted.blocks.begin() + lay.first_predictor, fitted.blocks.end(), best_blocks.begin());
            since_best = 0;
        }
        else if (++since_best >= cfg.predictor_patience)
            break;
        if (epoch == cfg.predictor_max_epochs)
            break;

        auto g = zero_gradients(fitted);
        const Eigen::MatrixXd d_out = 2.0 * (c.out - y_train) / static_cast<double>(y_train.size());
        add_dense_grad(g, lay.pred_w2, lay.pred_b2, d_out, c.hidden);
        const Eigen::MatrixXd d_hidden =
            (w[lay.pred_w2].transpose() * d_out).array() * (1.0 - c.hidden.array().square());
        add_dense_grad(g, lay.pred_w1, lay.pred_b1, d_hidden, z_train);
        adam.step(fitted, g);
    }

    std::copy(best_blocks.begin(), best_blocks.end(), fitted.blocks.begin() + lay.first_predictor);
    fitted.predictor_trained = true;
    report.params = std::move(fitted);
    return report;
}

PropertyVector predict_properties(const Lattice& lattice, const ModelParams& params)
{
    if (!params.predictor_trained || params.normalization.empty())
        throw ValidationError("checkpoint has no trained property predictor");
    const auto lay = params.layout();
    const Eigen::MatrixXd z = encode(lattice, params).semantic.mean();
    const auto c = run_predictor(z, params, lay);
    return PropertyVector{ params.normalization.names, params.normalization.denormalize(c.out.col(0)) };
}

} // namespace symlat
