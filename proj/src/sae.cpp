#include "hdh/sae.hpp"

#include "hdh/errors.hpp"

#include <cmath>

namespace hdh {

std::string to_string(DecorrelationMode mode) {
    return mode == DecorrelationMode::batch ? "batch" : "per_sample";
}

DecorrelationMode parse_decorrelation_mode(const std::string& text) {
    if (text == "batch") return DecorrelationMode::batch;
    if (text == "per_sample") return DecorrelationMode::per_sample;
    throw ConfigError("unknown decorrelation mode '" + text + "'");
}

void Regularization::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be finite and >= 0");
}

SaeLayer::SaeLayer(std::size_t in_dim, std::size_t out_dim)
    : enc_w(Matrix::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim))),
      enc_b(Vector::Zero(static_cast<Eigen::Index>(out_dim))),
      dec_w(Matrix::Zero(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(out_dim))),
      dec_b(Vector::Zero(static_cast<Eigen::Index>(in_dim))) {}

void SaeLayer::check_shapes() const {
    const auto q = enc_w.rows();
    const auto p = enc_w.cols();
    if (q == 0 || p == 0 || enc_b.size() != q || dec_w.rows() != p || dec_w.cols() != q ||
        dec_b.size() != p) {
        throw ShapeError("inconsistent autoencoder layer shapes");
    }
}

bool SaeLayer::all_finite() const {
    return enc_w.allFinite() && enc_b.allFinite() && dec_w.allFinite() && dec_b.allFinite();
}

bool SaeLayer::operator==(const SaeLayer& o) const {
    return enc_w.rows() == o.enc_w.rows() && enc_w.cols() == o.enc_w.cols() && enc_w == o.enc_w &&
           enc_b == o.enc_b && dec_w == o.dec_w && dec_b == o.dec_b;
}

SaeGradients SaeGradients::zeros_like(const SaeLayer& layer) {
    return {Matrix::Zero(layer.enc_w.rows(), layer.enc_w.cols()), Vector::Zero(layer.enc_b.size()),
            Matrix::Zero(layer.dec_w.rows(), layer.dec_w.cols()), Vector::Zero(layer.dec_b.size())};
}

Vector forward(const SaeLayer& layer, const Eigen::Ref<const Vector>& v_prev) {
    if (static_cast<std::size_t>(v_prev.size()) != layer.in_dim()) {
        throw ShapeError("forward: expected input of length " + std::to_string(layer.in_dim()) +
                         ", got " + std::to_string(v_prev.size()));
    }
    return (layer.enc_w * v_prev + layer.enc_b).array().tanh().matrix();
}

Vector reconstruct(const SaeLayer& layer, const Eigen::Ref<const Vector>& v) {
    if (static_cast<std::size_t>(v.size()) != layer.out_dim()) {
        throw ShapeError("reconstruct: expected code of length " + std::to_string(layer.out_dim()) +
                         ", got " + std::to_string(v.size()));
    }
    return (layer.dec_w * v + layer.dec_b).array().tanh().matrix();
}

RowMatrix forward_batch(const SaeLayer& layer, const RowMatrix& batch) {
    if (static_cast<std::size_t>(batch.cols()) != layer.in_dim()) {
        throw ShapeError("forward: batch width " + std::to_string(batch.cols()) +
                         " does not match layer input " + std::to_string(layer.in_dim()));
    }
    RowMatrix pre = batch * layer.enc_w.transpose();
    pre.rowwise() += layer.enc_b.transpose();
    return pre.array().tanh().matrix();
}

namespace detail {

double balance_penalty(const RowMatrix& outputs, double lambda) {
    if (lambda == 0.0) return 0.0;
    const Vector sum = outputs.colwise().sum().transpose();
    return 0.5 * lambda * sum.squaredNorm();
}

double decorrelation_penalty(const RowMatrix& outputs, double mu, DecorrelationMode mode) {
    if (mu == 0.0) return 0.0;
    const auto n = static_cast<double>(outputs.rows());
    const auto q = outputs.cols();
    if (mode == DecorrelationMode::batch) {
        Matrix c = outputs.transpose() * outputs / n;
        c -= Matrix::Identity(q, q);
        return 0.5 * mu * c.squaredNorm();
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        const Vector v = outputs.row(i).transpose();
        Matrix c = v * v.transpose() / n;
        c -= Matrix::Identity(q, q);
        total += c.squaredNorm();
    }
    return 0.5 * mu * total;
}

RowMatrix penalty_output_gradient(const RowMatrix& outputs, const Regularization& reg) {
    const auto n = static_cast<double>(outputs.rows());
    const auto q = outputs.cols();
    RowMatrix grad = RowMatrix::Zero(outputs.rows(), q);

    if (reg.lambda != 0.0) {
        const Eigen::RowVectorXd sum = outputs.colwise().sum();
        grad.rowwise() += reg.lambda * sum;
    }
    if (reg.mu != 0.0) {
        if (reg.mode == DecorrelationMode::batch) {
            Matrix c = outputs.transpose() * outputs / n;
            c -= Matrix::Identity(q, q);
            grad += (2.0 * reg.mu / n) * (outputs * c);
        } else {
            // (1/N v v^T - I) v = v * (|v|^2 / N - 1)
            for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
                const double sq = outputs.row(i).squaredNorm();
                grad.row(i) += (2.0 * reg.mu / n) * (sq / n - 1.0) * outputs.row(i);
            }
        }
    }
    return grad;
}

} // namespace detail

namespace {

struct ForwardState {
    RowMatrix code;    // v^l, N x q
    RowMatrix recon;   // reconstruction of the input, N x p
};

ForwardState run_forward(const SaeLayer& layer, const RowMatrix& batch) {
    ForwardState s;
    s.code = forward_batch(layer, batch);
    RowMatrix pre = s.code * layer.dec_w.transpose();
    pre.rowwise() += layer.dec_b.transpose();
    s.recon = pre.array().tanh().matrix();
    return s;
}

void check_batch(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg) {
    reg.validate();
    layer.check_shapes();
    if (batch.rows() == 0) throw ShapeError("objective needs at least one sample");
}

SaeObjective terms_from(const ForwardState& s, const RowMatrix& batch, const Regularization& reg) {
    SaeObjective o;
    o.reconstruction = 0.5 * (s.recon - batch).squaredNorm();
    o.balance = detail::balance_penalty(s.code, reg.lambda);
    o.decorrelation = detail::decorrelation_penalty(s.code, reg.mu, reg.mode);
    return o;
}

} // namespace

SaeObjective objective_terms(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg) {
    check_batch(layer, batch, reg);
    return terms_from(run_forward(layer, batch), batch, reg);
}

SaeEvaluation evaluate(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg) {
    check_batch(layer, batch, reg);
    const ForwardState s = run_forward(layer, batch);

    SaeEvaluation out;
    out.objective = terms_from(s, batch, reg);

    // Decoder local gradient: (x~ - x) * f'(u~), with f' = 1 - tanh^2.
    const RowMatrix recon_delta =
        ((s.recon - batch).array() * (1.0 - s.recon.array().square())).matrix();

    // dR/dv: back-propagated reconstruction error plus the penalty terms.
    RowMatrix code_grad = recon_delta * layer.dec_w;
    code_grad += detail::penalty_output_gradient(s.code, reg);
    const RowMatrix code_delta = (code_grad.array() * (1.0 - s.code.array().square())).matrix();

    out.grads.d_enc_w = code_delta.transpose() * batch;
    out.grads.d_enc_b = code_delta.colwise().sum().transpose();
    out.grads.d_dec_w = recon_delta.transpose() * s.code;
    out.grads.d_dec_b = recon_delta.colwise().sum().transpose();
    return out;
}

SaeGradients gradients(const SaeLayer& layer, const RowMatrix& batch, const Regularization& reg) {
    return evaluate(layer, batch, reg).grads;
}

SaeLayer sgd_step(const SaeLayer& layer, const SaeGradients& grads, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("learning rate alpha must be > 0");
    if (grads.d_enc_w.rows() != layer.enc_w.rows() || grads.d_enc_w.cols() != layer.enc_w.cols() ||
        grads.d_enc_b.size() != layer.enc_b.size() || grads.d_dec_w.rows() != layer.dec_w.rows() ||
        grads.d_dec_w.cols() != layer.dec_w.cols() || grads.d_dec_b.size() != layer.dec_b.size()) {
        throw ShapeError("gradient shapes do not match layer");
    }
    SaeLayer out = layer;
    out.enc_w -= alpha * grads.d_enc_w;
    out.enc_b -= alpha * grads.d_enc_b;
    out.dec_w -= alpha * grads.d_dec_w;
    out.dec_b -= alpha * grads.d_dec_b;
    return out;
}

LayerTrainResult train_layer(SaeLayer layer, const std::vector<RowMatrix>& batches,
                             const Regularization& reg, double alpha) {
    LayerTrainResult result;
    result.trace.reserve(batches.size());
    for (const auto& batch : batches) {
        const auto eval = evaluate(layer, batch, reg);
        result.trace.push_back(eval.objective.total());
        layer = sgd_step(layer, eval.grads, alpha);
    }
    result.layer = std::move(layer);
    return result;
}

SaeStack::SaeStack(std::vector<SaeLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("autoencoder stack needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].check_shapes();
        if (l > 0 && layers_[l].in_dim() != layers_[l - 1].out_dim()) {
            throw ShapeError("layer " + std::to_string(l) + " input " + std::to_string(layers_[l].in_dim()) +
                             " does not chain with previous output " +
                             std::to_string(layers_[l - 1].out_dim()));
        }
    }
}

std::vector<std::size_t> SaeStack::dims() const {
    std::vector<std::size_t> d;
    if (layers_.empty()) return d;
    d.push_back(layers_.front().in_dim());
    for (const auto& layer : layers_) d.push_back(layer.out_dim());
    return d;
}

Vector encode_stack(const SaeStack& stack, const Eigen::Ref<const Vector>& x) {
    Vector v = x;
    for (const auto& layer : stack.layers()) v = forward(layer, v);
    return v;
}

RowMatrix encode_stack_batch(const SaeStack& stack, const RowMatrix& x) {
    RowMatrix v = x;
    for (const auto& layer : stack.layers()) v = forward_batch(layer, v);
    return v;
}

BitVector binarize_pm(const Eigen::Ref<const Vector>& v) {
    return (v.array() >= 0.0).cast<double>().matrix();
}

RowMatrix binarize_pm_batch(const RowMatrix& v) {
    return (v.array() >= 0.0).cast<double>().matrix();
}

} // namespace hdh
