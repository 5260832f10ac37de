#pragma once

#include "hdh/features.hpp"
#include "hdh/hash_code.hpp"
#include "hdh/rbm.hpp"
#include "hdh/sae.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hdh {

enum class InitMode {
    paper,     ///< every parameter uniform in [0, 1)
    symmetric  ///< uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out))
};

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

/// Hyperparameters of the interleaved autoencoder/RBM training loop.
struct TrainingConfig {
    double lambda = 0.1;
    double mu = 0.1;
    double beta = 10.0;
    double alpha = 0.01;
    /// [d, q_1, ..., q_L]
    std::vector<std::size_t> layer_dims;
    std::size_t code_bits = 0;
    std::size_t outer_iters = 10;
    /// Re-training thresholds on |R_t - R_{t-1}| and |J_t - J_{t-1}|.
    /// Unset means 1e-3 times the corresponding objective of the first iteration.
    std::optional<double> eps_sae;
    std::optional<double> eps_rbm;
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    std::size_t cd_steps = 1;
    std::uint64_t seed = 0;
    DecorrelationMode decorrelation_mode = DecorrelationMode::batch;
    InitMode init_mode = InitMode::paper;
    std::size_t max_repeats_per_iter = 3;
    NormMode norm_mode = NormMode::minmax_symmetric;

    Regularization regularization() const { return {lambda, mu, decorrelation_mode}; }

    /// Throws ConfigError naming the offending field.
    void validate() const;

    bool operator==(const TrainingConfig&) const = default;
};

/// Canonical key=value lines, one per field, in a fixed order.
std::string format_config(const TrainingConfig& config);

/// Parses key=value text. '#' starts a comment. Throws ConfigError naming any
/// missing required key, unknown key or malformed value.
TrainingConfig parse_config(const std::string& text);
TrainingConfig load_config(const std::filesystem::path& path);

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct Model {
    SaeStack sae;
    Rbm rbm;
    NormStats norm_stats;
    TrainingConfig config;
    std::uint32_t format_version = kModelFormatVersion;

    std::size_t input_dim() const { return sae.input_dim(); }
    std::size_t code_bits() const { return rbm.hidden(); }

    bool operator==(const Model& other) const;
};

Model init_model(const TrainingConfig& config, Engine& engine);

/// Per-outer-iteration record. R sums the autoencoder objective over all layers and
/// batches of the last pass; J sums the RBM penalties plus the CD free-energy gap
/// F(v0) - F(v_r), which stands in for -ln L.
struct IterationRecord {
    std::size_t iteration = 0;
    double sae_objective = 0.0;
    double rbm_objective = 0.0;
    std::size_t sae_repeats = 0;
    std::size_t rbm_repeats = 0;
};

struct TrainingHistory {
    std::vector<IterationRecord> iterations;
};

struct TrainOptions {
    std::size_t threads = 1;
    /// Called after every outer iteration.
    std::function<void(const IterationRecord&)> on_iteration;
};

struct TrainResult {
    Model model;
    TrainingHistory history;
};

/// Normalizes `raw` with config.norm_mode, then runs the training loop.
/// Throws DivergenceError when an objective or parameter becomes non-finite.
TrainResult train(const TrainingConfig& config, const FeatureMatrix& raw, const TrainOptions& options = {});

/// Normalize, autoencoder stack, sign, RBM threshold.
HashCode encode(const Model& model, const Eigen::Ref<const Vector>& raw_features);
std::vector<HashCode> encode_all(const Model& model, const FeatureMatrix& raw);

/// Autoencoder stack outputs (before the sign) for every normalized row.
RowMatrix sae_outputs(const Model& model, const FeatureMatrix& raw);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// In-memory forms of the model file.
std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& bytes);

} // namespace hdh
