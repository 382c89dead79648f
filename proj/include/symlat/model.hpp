// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/gaussian.hpp>
#include <symlat/lattice.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace symlat
{

struct ModelConfig
{
    int d_lattice = 4;
    int d_position = 4;
    int d_edge = 8;
    int d_semantic = 4;
    int d_properties = 3;
    int hidden = 32;
    int rounds = 2;             // neighborhood-aggregation rounds
    bool conditional = false;   // concatenate normalized properties to decoder heads

    double learning_rate = 3e-3;
    int max_epochs = 300;
    int patience = 100;         // epochs without improvement before stopping
    int batch_size = 10;        // 0 = full batch

    double kl_weight = 0.1;
    int kl_warmup_epochs = 100; // KL weight ramps linearly to kl_weight over these epochs
    double obs_std_coords = 0.05;
    double obs_std_lattice = 0.1;
    double obs_std_properties = 0.03;

    int predictor_hidden = 32;
    double predictor_learning_rate = 1e-2;
    int predictor_max_epochs = 2000;
    int predictor_patience = 200;
    double validation_fraction = 0.1;

    std::uint64_t seed = 7;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Max-min normalization statistics for property vectors.
struct Normalization
{
    std::vector<std::string> names;
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    [[nodiscard]] bool empty() const noexcept { return names.empty(); }
    [[nodiscard]] Eigen::VectorXd normalize(const Eigen::VectorXd& y) const;
    [[nodiscard]] Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const;

    /// Throws ValidationError on an empty set, missing labels or
    /// inconsistent property names.
    static Normalization fit(std::span<const Lattice> dataset);
};

struct ParamBlock
{
    std::string name;
    Eigen::MatrixXd value;
};

/// Index of every parameter block; derived from ModelConfig.
struct ParamLayout
{
    int embed_w = 0, embed_b = 0;
    std::vector<int> round_self, round_neighbor, round_bias;
    int pos_mu_w = 0, pos_mu_b = 0, pos_ls_w = 0, pos_ls_b = 0;
    int edge_mu_w = 0, edge_mu_b = 0, edge_ls_w = 0, edge_ls_b = 0;
    int lat_mu_w = 0, lat_mu_b = 0, lat_ls_w = 0, lat_ls_b = 0;
    int sem_mu_w = 0, sem_mu_b = 0, sem_ls_w = 0, sem_ls_b = 0;
    int dec_lat_w = 0, dec_lat_b = 0;
    int dec_pos_w1 = 0, dec_pos_b1 = 0, dec_pos_w2 = 0, dec_pos_b2 = 0;
    int dec_edge_a = 0, dec_edge_b = 0;
    int dec_prop_w = 0, dec_prop_b = 0;
    int pred_w1 = 0, pred_b1 = 0, pred_w2 = 0, pred_b2 = 0;

    int first_predictor = 0; // blocks at or after this index belong to the predictor head
    int count = 0;

    static ParamLayout for_config(const ModelConfig& config);
};

struct ModelParams
{
    ModelConfig config;
    std::vector<ParamBlock> blocks;
    Normalization normalization;
    bool predictor_trained = false;

    [[nodiscard]] ParamLayout layout() const { return ParamLayout::for_config(config); }
    [[nodiscard]] std::size_t parameter_count() const;

    /// FNV-1a over the bytes of every encoder/decoder block (predictor head
    /// excluded).
    [[nodiscard]] std::uint64_t backbone_hash() const;

    bool operator==(const ModelParams& other) const;
};

/// Seeded Gaussian fan-in initialization; biases start at zero except the
/// log-std heads.
[[nodiscard]] ModelParams init_params(const ModelConfig& config);

using Gradients = std::vector<Eigen::MatrixXd>;

[[nodiscard]] Gradients zero_gradients(const ModelParams& params);

/// Per-node Gaussians for position/edge channels (shared message-passing
/// trunk, split at the heads) and mean-pooled graph Gaussians for the
/// lattice/semantic channels.
[[nodiscard]] LatentState encode(const Lattice& lattice, const ModelParams& params);

struct DecodeOptions
{
    std::uint64_t seed = 0;
    bool sample = true; // false decodes channel means
    std::optional<PropertyVector> condition;
    double edge_threshold = 0.5;
};

struct Decoded
{
    Lattice lattice;
    PropertyVector properties; // semantic-head output, de-normalized
    Eigen::MatrixXd edge_probability;
};

/// Emits exactly state.node_count() nodes. Throws NumericalError if the
/// decoded lattice vectors are singular.
[[nodiscard]] Decoded decode(const LatentState& state, const ModelParams& params, const DecodeOptions& options = {});

/// Negative ELBO breakdown for one lattice. `total` is the training loss:
/// reconstruction terms plus kl_weight times the four KL terms.
struct LossBreakdown
{
    double rec_lattice = 0.0;
    double rec_position = 0.0;
    double rec_edge = 0.0;
    double rec_properties = 0.0;
    double kl_lattice = 0.0;
    double kl_position = 0.0;
    double kl_edge = 0.0;
    double kl_semantic = 0.0;
    double total = 0.0;

    [[nodiscard]] double reconstruction() const { return rec_lattice + rec_position + rec_edge + rec_properties; }
    [[nodiscard]] double kl() const { return kl_lattice + kl_position + kl_edge + kl_semantic; }
    /// Evidence lower bound (kl_weight applied), i.e. -total.
    [[nodiscard]] double elbo() const { return -total; }

    LossBreakdown& operator+=(const LossBreakdown& other);
    LossBreakdown& operator*=(double s);
};

/// Reparameterized loss with noise drawn from `seed`; accumulates the
/// gradient of `total` into `grad` when given.
LossBreakdown elbo(const Lattice& lattice, const ModelParams& params, std::uint64_t seed,
                   Gradients* grad = nullptr);

struct TrainReport
{
    std::vector<LossBreakdown> epochs; // dataset-mean loss (full KL weight) at the start of each epoch
    int best_epoch = 0;
    bool diverged = false;
    ModelParams params; // checkpoint with the lowest recorded training loss
};

/// Adam on the negative ELBO. Deterministic given config.seed. Throws
/// ValidationError on an empty dataset.
[[nodiscard]] TrainReport train(std::span<const Lattice> dataset, const ModelConfig& config);

struct PredictorReport
{
    std::vector<double> train_mse;
    std::vector<double> validation_mse;
    int best_epoch = 0;
    ModelParams params;
};

/// Fits the property head on frozen semantic means with MSE on max-min
/// normalized labels; early stopping on a held-out validation slice.
[[nodiscard]] PredictorReport train_predictor(std::span<const Lattice> dataset, const ModelParams& params);

/// Throws ValidationError when the predictor head has not been trained.
[[nodiscard]] PropertyVector predict_properties(const Lattice& lattice, const ModelParams& params);

[[nodiscard]] nlohmann::json model_config_to_json(const ModelConfig& config);
/// Overlays the keys of `j` onto `base`; unknown keys raise ValidationError.
[[nodiscard]] ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

/// Versioned JSON checkpoint.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
[[nodiscard]] ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace symlat
