// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/model.hpp>

#include <fstream>
#include <sstream>

namespace symlat
{

namespace
{

constexpr const char* kFormat = "symlat-checkpoint";
constexpr int kVersion = 1;

nlohmann::json vector_json(const Eigen::VectorXd& v)
{
    auto j = nlohmann::json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k)
        j.push_back(v[k]);
    return j;
}

Eigen::VectorXd vector_from(const nlohmann::json& j)
{
    auto v = Eigen::VectorXd(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k)
        v[static_cast<Eigen::Index>(k)] = j.at(k).get<double>();
    return v;
}

template <typename T>
void overlay(const nlohmann::json& j, const char* key, T& field)
{
    if (j.contains(key))
        field = j.at(key).get<T>();
}

} // namespace

nlohmann::json model_config_to_json(const ModelConfig& c)
{
    return {
        { "d_lattice", c.d_lattice },
        { "d_position", c.d_position },
        { "d_edge", c.d_edge },
        { "d_semantic", c.d_semantic },
        { "d_properties", c.d_properties },
        { "hidden", c.hidden },
        { "rounds", c.rounds },
        { "conditional", c.conditional },
        { "learning_rate", c.learning_rate },
        { "max_epochs", c.max_epochs },
        { "patience", c.patience },
        { "batch_size", c.batch_size },
        { "kl_weight", c.kl_weight },
        { "kl_warmup_epochs", c.kl_warmup_epochs },
        { "obs_std_coords", c.obs_std_coords },
        { "obs_std_lattice", c.obs_std_lattice },
        { "obs_std_properties", c.obs_std_properties },
        { "predictor_hidden", c.predictor_hidden },
        { "predictor_learning_rate", c.predictor_learning_rate },
        { "predictor_max_epochs", c.predictor_max_epochs },
        { "predictor_patience", c.predictor_patience },
        { "validation_fraction", c.validation_fraction },
        { "seed", c.seed },
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base)
{
    if (!j.is_object())
        throw ValidationError("model config must be a JSON object");
    const auto known = model_config_to_json(base);
    for (const auto& [key, value]: j.items())
        if (!known.contains(key))
            throw ValidationError("unknown model config key '" + key + "'");
    try
    {
        overlay(j, "d_lattice", base.d_lattice);
        overlay(j, "d_position", base.d_position);
        overlay(j, "d_edge", base.d_edge);
        overlay(j, "d_semantic", base.d_semantic);
        overlay(j, "d_properties", base.d_properties);
        overlay(j, "hidden", base.hidden);
        overlay(j, "rounds", base.rounds);
        overlay(j, "conditional", base.conditional);
        overlay(j, "learning_rate", base.learning_rate);
        overlay(j, "max_epochs", base.max_epochs);
        overlay(j, "patience", base.patience);
        overlay(j, "batch_size", base.batch_size);
        overlay(j, "kl_weight", base.kl_weight);
        overlay(j, "kl_warmup_epochs", base.kl_warmup_epochs);
        overlay(j, "obs_std_coords", base.obs_std_coords);
        overlay(j, "obs_std_lattice", base.obs_std_lattice);
        overlay(j, "obs_std_properties", base.obs_std_properties);
        overlay(j, "predictor_hidden", base.predictor_hidden);
        overlay(j, "predictor_learning_rate", base.predictor_learning_rate);
        overlay(j, "predictor_max_epochs", base.predictor_max_epochs);
        overlay(j, "predictor_patience", base.predictor_patience);
        overlay(j, "validation_fraction", base.validation_fraction);
        overlay(j, "seed", base.seed);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ValidationError(std::string("model config: ") + e.what());
    }
    base.validate();
    return base;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params)
{
    auto blocks = nlohmann::json::array();
    for (const auto& b: params.blocks)
    {
        auto data = nlohmann::json::array();
        for (Eigen::Index r = 0; r < b.value.rows(); ++r)
            for (Eigen::Index c = 0; c < b.value.cols(); ++c)
                data.push_back(b.value(r, c));
        blocks.push_back({ { "name", b.name }, { "rows", b.value.rows() }, { "cols", b.value.cols() }, { "data", data } });
    }
    auto norm = nlohmann::json(nullptr);
    if (!params.normalization.empty())
        norm = { { "names", params.normalization.names },
                 { "min", vector_json(params.normalization.min) },
                 { "max", vector_json(params.normalization.max) } };

    const nlohmann::json j = {
        { "format", kFormat },       { "version", kVersion },
        { "config", model_config_to_json(params.config) },
        { "normalization", norm },   { "predictor_trained", params.predictor_trained },
        { "blocks", blocks },
    };
    auto out = std::ofstream(path);
    if (!out)
        throw Error("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
    if (!out)
        throw Error("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ValidationError("cannot open checkpoint " + path.string());
    auto buffer = std::stringstream();
    buffer << in.rdbuf();

    auto j = nlohmann::json();
    try
    {
        j = nlohmann::json::parse(buffer.str());
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }

    try
    {
        if (j.at("format").get<std::string>() != kFormat)
            throw ValidationError("not a checkpoint file: " + path.string());
        const auto version = j.at("version").get<int>();
        if (version != kVersion)
            throw ValidationError("unsupported checkpoint version " + std::to_string(version));

        auto params = ModelParams();
        params.config = model_config_from_json(j.at("config"));
        params.predictor_trained = j.at("predictor_trained").get<bool>();
        if (!j.at("normalization").is_null())
        {
            const auto& n = j.at("normalization");
            params.normalization.names = n.at("names").get<std::vector<std::string>>();
            params.normalization.min = vector_from(n.at("min"));
            params.normalization.max = vector_from(n.at("max"));
            if (params.normalization.min.size() != static_cast<Eigen::Index>(params.normalization.names.size())
                || params.normalization.max.size() != params.normalization.min.size())
                throw ValidationError("checkpoint normalization has inconsistent lengths");
        }

        const auto reference = init_params(params.config);
        const auto& blocks = j.at("blocks");
        if (blocks.size() != reference.blocks.size())
            throw ValidationError("checkpoint has " + std::to_string(blocks.size()) + " parameter blocks, expected "
                                  + std::to_string(reference.blocks.size()));
        for (std::size_t i = 0; i < blocks.size(); ++i)
        {
            const auto& b = blocks[i];
            const auto& ref = reference.blocks[i];
            const auto rows = b.at("rows").get<Eigen::Index>();
            const auto cols = b.at("cols").get<Eigen::Index>();
            const auto& data = b.at("data");
            if (b.at("name").get<std::string>() != ref.name || rows != ref.value.rows() || cols != ref.value.cols()
                || data.size() != static_cast<std::size_t>(rows * cols))
                throw ValidationError("checkpoint block " + std::to_string(i) + " does not match the config");
            auto m = Eigen::MatrixXd(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    m(r, c) = data.at(static_cast<std::size_t>(r * cols + c)).get<double>();
            params.blocks.push_back({ ref.name, std::move(m) });
        }
        return params;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
    }
}

} // namespace symlat
