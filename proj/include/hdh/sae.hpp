#pragma once

#include "hdh/linalg.hpp"

#include <string>
#include <vector>

namespace hdh {

/// How the uncorrelated-bits penalty aggregates outer products.
///   batch:      (mu/2) * || (1/N) sum_n v_n v_n^T - I ||_F^2
///   per_sample: (mu/2) * sum_n || (1/N) v_n v_n^T - I ||_F^2
enum class DecorrelationMode { batch, per_sample };

std::string to_string(DecorrelationMode mode);
DecorrelationMode parse_decorrelation_mode(const std::string& text);

/// Penalty weights shared by the autoencoder and RBM objectives.
struct Regularization {
    double lambda = 0.1;  ///< balance weight
    double mu = 0.1;      ///< decorrelation weight
    DecorrelationMode mode = DecorrelationMode::batch;

    void validate() const;
};

/// One tanh autoencoder: v = tanh(enc_w * x + enc_b), x~ = tanh(dec_w * v + dec_b).
struct SaeLayer {
    Matrix enc_w;  ///< out_dim x in_dim
    Vector enc_b;  ///< out_dim
    Matrix dec_w;  ///< in_dim x out_dim
    Vector dec_b;  ///< in_dim

    SaeLayer() = default;
    /// Zero-initialized layer.
    SaeLayer(std::size_t in_dim, std::size_t out_dim);

    std::size_t in_dim() const { return static_cast<std::size_t>(enc_w.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(enc_w.rows()); }

    /// Throws ShapeError if the four blocks disagree.
    void check_shapes() const;
    bool all_finite() const;

    bool operator==(const SaeLayer& other) const;
};

struct SaeGradients {
    Matrix d_enc_w;
    Vector d_enc_b;
    Matrix d_dec_w;
    Vector d_dec_b;

    static SaeGradients zeros_like(const SaeLayer& layer);
};

Vector forward(const SaeLayer& layer, const Eigen::Ref<const Vector>& v_prev);
Vector reconstruct(const SaeLayer& layer, const Eigen::Ref<const Vector>& v);

/// Batch forward: row n of the result is forward(layer, row n of batch).
RowMatrix forward_batch(const SaeLayer& layer, const RowMatrix& batch);

/// The three terms of the regularized reconstruction objective, kept separate for reporting.
struct SaeObjective {
    double reconstruction = 0.0;
    double balance = 0.0;
    double decorrelation = 0.0;

    double total() const { return reconstruction + balance + decorrelation; }
};

SaeObjective objective_terms(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg);

inline double objective(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg) {
    return objective_terms(layer, batch, reg).total();
}

/// Exact gradient of `objective` with respect to all four parameter blocks.
SaeGradients gradients(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg);

/// Objective value and gradient from a single forward pass.
struct SaeEvaluation {
    SaeObjective objective;
    SaeGradients grads;
};

SaeEvaluation evaluate(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg);

/// p := p - alpha * grad on every block. Throws ConfigError unless alpha > 0.
SaeLayer sgd_step(const SaeLayer& layer, const SaeGradients& grads, double alpha);

struct LayerTrainResult {
    SaeLayer layer;
    /// Objective at the parameters each step's gradient was taken from.
    std::vector<double> trace;
};

/// One gradient step per batch, in order.
LayerTrainResult train_layer(SaeLayer layer, const std::vector<RowMatrix>& batches,
                             const Regularization& reg, double alpha);

/// Chain of layers with dims [d, q_1, ..., q_L].
class SaeStack {
public:
    SaeStack() = default;
    explicit SaeStack(std::vector<SaeLayer> layers);

    std::size_t depth() const { return layers_.size(); }
    std::vector<std::size_t> dims() const;
    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }

    const std::vector<SaeLayer>& layers() const { return layers_; }
    SaeLayer& layer(std::size_t l) { return layers_.at(l); }
    const SaeLayer& layer(std::size_t l) const { return layers_.at(l); }

    bool operator==(const SaeStack& other) const { return layers_ == other.layers_; }

private:
    std::vector<SaeLayer> layers_;
};

Vector encode_stack(const SaeStack& stack, const Eigen::Ref<const Vector>& x);
RowMatrix encode_stack_batch(const SaeStack& stack, const RowMatrix& x);

/// bit_i = 1 if v_i >= 0 else 0.
BitVector binarize_pm(const Eigen::Ref<const Vector>& v);
RowMatrix binarize_pm_batch(const RowMatrix& v);

namespace detail {

/// Gradient of the balance + decorrelation penalties with respect to each output row.
/// Shared by the autoencoder and the RBM surrogate.
RowMatrix penalty_output_gradient(const RowMatrix& outputs, const Regularization& reg);
double balance_penalty(const RowMatrix& outputs, double lambda);
double decorrelation_penalty(const RowMatrix& outputs, double mu, DecorrelationMode mode);

} // namespace detail

} // namespace hdh
