#include "hdh/rbm.hpp"

#include "hdh/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

namespace hdh {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Vector sigmoid(const Vector& x) {
    return x.unaryExpr([](double t) { return sigmoid(t); });
}

void check_visible(const Rbm& rbm, const Eigen::Ref<const Vector>& v) {
    if (static_cast<std::size_t>(v.size()) != rbm.visible()) {
        throw ShapeError("visible vector has length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(rbm.visible()));
    }
    require_binary(v, "visible vector");
}

void check_batch(const Rbm& rbm, const RowMatrix& batch) {
    if (batch.rows() == 0) throw ShapeError("RBM batch is empty");
    if (static_cast<std::size_t>(batch.cols()) != rbm.visible()) {
        throw ShapeError("RBM batch width " + std::to_string(batch.cols()) + " does not match " +
                         std::to_string(rbm.visible()) + " visible units");
    }
    for (Eigen::Index i = 0; i < batch.rows(); ++i) require_binary(batch.row(i).transpose(), "batch row");
}

BitVector sample_bits(const Vector& p, Engine& engine) {
    BitVector out(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = unit_uniform(engine) < p[i] ? 1.0 : 0.0;
    return out;
}

RowMatrix hidden_preactivation(const Rbm& rbm, const RowMatrix& batch) {
    RowMatrix pre = batch * rbm.w.transpose();
    pre.rowwise() += rbm.hid_bias.transpose();
    return pre;
}

double log_sum_exp(const std::vector<double>& xs) {
    const double m = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

BitVector state_bits(std::uint64_t state, std::size_t n) {
    BitVector v(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) v[static_cast<Eigen::Index>(j)] = ((state >> j) & 1u) ? 1.0 : 0.0;
    return v;
}

void check_exact_capacity(const Rbm& rbm) {
    if (rbm.visible() + rbm.hidden() > kMaxExactUnits) {
        throw CapacityError("exact enumeration supports at most " + std::to_string(kMaxExactUnits) +
                            " units, RBM has " + std::to_string(rbm.visible() + rbm.hidden()));
    }
}

/// -F(v) for every visible state, indexed by the state's bit pattern.
std::vector<double> neg_free_energies(const Rbm& rbm) {
    const std::uint64_t states = std::uint64_t{1} << rbm.visible();
    std::vector<double> out(states);
    for (std::uint64_t s = 0; s < states; ++s) out[s] = -free_energy(rbm, state_bits(s, rbm.visible()));
    return out;
}

} // namespace

void require_binary(const Eigen::Ref<const Vector>& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0 && v[i] != 1.0) {
            throw DomainError(std::string(what) + " entry " + std::to_string(i) + " is not 0 or 1");
        }
    }
}

Rbm::Rbm(std::size_t visible, std::size_t hidden, double beta_, std::size_t cd_steps_)
    : w(Matrix::Zero(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(visible))),
      vis_bias(Vector::Zero(static_cast<Eigen::Index>(visible))),
      hid_bias(Vector::Zero(static_cast<Eigen::Index>(hidden))),
      beta(beta_),
      cd_steps(cd_steps_) {}

void Rbm::validate() const {
    if (w.rows() == 0 || w.cols() == 0 || vis_bias.size() != w.cols() || hid_bias.size() != w.rows()) {
        throw ShapeError("inconsistent RBM shapes");
    }
    if (!(beta >= 1.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 1");
    if (cd_steps < 1) throw ConfigError("cd_steps must be >= 1");
}

bool Rbm::all_finite() const { return w.allFinite() && vis_bias.allFinite() && hid_bias.allFinite(); }

bool Rbm::operator==(const Rbm& o) const {
    return w.rows() == o.w.rows() && w.cols() == o.w.cols() && w == o.w && vis_bias == o.vis_bias &&
           hid_bias == o.hid_bias && beta == o.beta && cd_steps == o.cd_steps;
}

RbmGradients RbmGradients::zeros_like(const Rbm& rbm) {
    return {Matrix::Zero(rbm.w.rows(), rbm.w.cols()), Vector::Zero(rbm.vis_bias.size()),
            Vector::Zero(rbm.hid_bias.size())};
}

RbmGradients& RbmGradients::operator+=(const RbmGradients& other) {
    d_w += other.d_w;
    d_vis_bias += other.d_vis_bias;
    d_hid_bias += other.d_hid_bias;
    return *this;
}

double energy(const Rbm& rbm, const Eigen::Ref<const BitVector>& v, const Eigen::Ref<const BitVector>& h) {
    check_visible(rbm, v);
    if (static_cast<std::size_t>(h.size()) != rbm.hidden()) throw ShapeError("hidden vector length mismatch");
    require_binary(h, "hidden vector");
    return -rbm.vis_bias.dot(v) - rbm.hid_bias.dot(h) - h.dot(rbm.w * v);
}

Vector prob_h_given_v(const Rbm& rbm, const Eigen::Ref<const BitVector>& v) {
    check_visible(rbm, v);
    return sigmoid(Vector(rbm.w * v + rbm.hid_bias));
}

Vector prob_v_given_h(const Rbm& rbm, const Eigen::Ref<const BitVector>& h) {
    if (static_cast<std::size_t>(h.size()) != rbm.hidden()) throw ShapeError("hidden vector length mismatch");
    require_binary(h, "hidden vector");
    return sigmoid(Vector(rbm.w.transpose() * h + rbm.vis_bias));
}

double free_energy(const Rbm& rbm, const Eigen::Ref<const BitVector>& v) {
    check_visible(rbm, v);
    const Vector pre = rbm.w * v + rbm.hid_bias;
    double f = -rbm.vis_bias.dot(v);
    for (Eigen::Index j = 0; j < pre.size(); ++j) f -= softplus(pre[j]);
    return f;
}

GibbsResult gibbs_chain(const Rbm& rbm, const Eigen::Ref<const BitVector>& v0, Engine& engine) {
    rbm.validate();
    GibbsResult out;
    out.stats.p_h_start = prob_h_given_v(rbm, v0);
    BitVector v = v0;
    Vector p_h = out.stats.p_h_start;
    for (std::size_t step = 0; step < rbm.cd_steps; ++step) {
        const BitVector h = sample_bits(p_h, engine);
        ++out.stats.hidden_samples;
        v = sample_bits(prob_v_given_h(rbm, h), engine);
        ++out.stats.visible_samples;
        p_h = prob_h_given_v(rbm, v);
    }
    out.v_end = std::move(v);
    out.stats.p_h_end = std::move(p_h);
    return out;
}

double surrogate(double x, double beta) { return 0.5 * (std::tanh(beta * x) + 1.0); }

double surrogate_derivative(double x, double beta) {
    const double t = std::tanh(beta * x);
    return 0.5 * beta * (1.0 - t * t);
}

Vector surrogate_hidden(const Rbm& rbm, const Eigen::Ref<const BitVector>& v) {
    check_visible(rbm, v);
    const double beta = rbm.beta;
    return (rbm.w * v + rbm.hid_bias).unaryExpr([beta](double x) { return surrogate(x, beta); });
}

double reg_objective_terms(const Rbm& rbm, const RowMatrix& batch, const Regularization& reg) {
    reg.validate();
    rbm.validate();
    check_batch(rbm, batch);
    const double beta = rbm.beta;
    const RowMatrix h = hidden_preactivation(rbm, batch).unaryExpr([beta](double x) { return surrogate(x, beta); });
    return detail::balance_penalty(h, reg.lambda) + detail::decorrelation_penalty(h, reg.mu, reg.mode);
}

RowMatrix sample_chains(const Rbm& rbm, const RowMatrix& batch, std::uint64_t seed, std::size_t threads) {
    rbm.validate();
    check_batch(rbm, batch);
    RowMatrix out(batch.rows(), batch.cols());
    const auto n = static_cast<std::size_t>(batch.rows());

    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Engine engine(seed ^ static_cast<std::uint64_t>(i));
            const auto idx = static_cast<Eigen::Index>(i);
            out.row(idx) = gibbs_chain(rbm, batch.row(idx).transpose(), engine).v_end.transpose();
        }
    };

    threads = std::clamp<std::size_t>(threads, 1, n);
    if (threads == 1) {
        run(0, n);
        return out;
    }
    std::vector<std::jthread> workers;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        workers.emplace_back(run, begin, std::min(n, begin + chunk));
    }
    workers.clear();
    return out;
}

RbmGradients cd_gradients_from_chain(const Rbm& rbm, const RowMatrix& batch, const RowMatrix& v_end,
                                     const Regularization& reg, CdTerms terms) {
    reg.validate();
    rbm.validate();
    check_batch(rbm, batch);
    if (v_end.rows() != batch.rows() || v_end.cols() != batch.cols()) {
        throw ShapeError("negative-phase samples must match the batch shape");
    }

    RbmGradients g = RbmGradients::zeros_like(rbm);
    const RowMatrix pre_data = hidden_preactivation(rbm, batch);

    if (terms.likelihood) {
        check_batch(rbm, v_end);
        const RowMatrix p_data = pre_data.unaryExpr([](double x) { return sigmoid(x); });
        const RowMatrix p_model = hidden_preactivation(rbm, v_end).unaryExpr([](double x) { return sigmoid(x); });
        // Gradient of -ln L: model statistics minus data statistics.
        g.d_w += p_model.transpose() * v_end - p_data.transpose() * batch;
        g.d_hid_bias += (p_model - p_data).colwise().sum().transpose();
        g.d_vis_bias += (v_end - batch).colwise().sum().transpose();
    }

    if (terms.penalty && (reg.lambda != 0.0 || reg.mu != 0.0)) {
        const double beta = rbm.beta;
        const RowMatrix h = pre_data.unaryExpr([beta](double x) { return surrogate(x, beta); });
        const RowMatrix dh = detail::penalty_output_gradient(h, reg);
        const RowMatrix fprime = pre_data.unaryExpr([beta](double x) { return surrogate_derivative(x, beta); });
        const RowMatrix delta = (dh.array() * fprime.array()).matrix();
        g.d_w += delta.transpose() * batch;
        g.d_hid_bias += delta.colwise().sum().transpose();
    }
    return g;
}

RbmGradients cd_gradients(const Rbm& rbm, const RowMatrix& batch, const Regularization& reg,
                          std::uint64_t seed, CdTerms terms, std::size_t threads) {
    if (!terms.likelihood) return cd_gradients_from_chain(rbm, batch, batch, reg, terms);
    return cd_gradients_from_chain(rbm, batch, sample_chains(rbm, batch, seed, threads), reg, terms);
}

double log_partition(const Rbm& rbm) {
    rbm.validate();
    check_exact_capacity(rbm);
    return log_sum_exp(neg_free_energies(rbm));
}

double exact_log_likelihood(const Rbm& rbm, const RowMatrix& batch) {
    const double log_z = log_partition(rbm);
    check_batch(rbm, batch);
    double total = 0.0;
    for (Eigen::Index i = 0; i < batch.rows(); ++i) total += -free_energy(rbm, batch.row(i).transpose()) - log_z;
    return total;
}

RbmGradients exact_loglik_grad(const Rbm& rbm, const RowMatrix& batch) {
    rbm.validate();
    check_exact_capacity(rbm);
    check_batch(rbm, batch);

    const auto neg_f = neg_free_energies(rbm);
    const double log_z = log_sum_exp(neg_f);

    RbmGradients model = RbmGradients::zeros_like(rbm);
    for (std::uint64_t s = 0; s < neg_f.size(); ++s) {
        const double p = std::exp(neg_f[s] - log_z);
        const BitVector v = state_bits(s, rbm.visible());
        const Vector ph = sigmoid(Vector(rbm.w * v + rbm.hid_bias));
        model.d_w += p * ph * v.transpose();
        model.d_hid_bias += p * ph;
        model.d_vis_bias += p * v;
    }

    RbmGradients g = RbmGradients::zeros_like(rbm);
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        const BitVector v = batch.row(i).transpose();
        const Vector ph = sigmoid(Vector(rbm.w * v + rbm.hid_bias));
        g.d_w += ph * v.transpose() - model.d_w;
        g.d_hid_bias += ph - model.d_hid_bias;
        g.d_vis_bias += v - model.d_vis_bias;
    }
    return g;
}

Rbm update(const Rbm& rbm, const RbmGradients& grads, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("learning rate alpha must be > 0");
    if (grads.d_w.rows() != rbm.w.rows() || grads.d_w.cols() != rbm.w.cols() ||
        grads.d_vis_bias.size() != rbm.vis_bias.size() || grads.d_hid_bias.size() != rbm.hid_bias.size()) {
        throw ShapeError("gradient shapes do not match RBM");
    }
    Rbm out = rbm;
    out.w -= alpha * grads.d_w;
    out.vis_bias -= alpha * grads.d_vis_bias;
    out.hid_bias -= alpha * grads.d_hid_bias;
    return out;
}

HashCode hash(const Rbm& rbm, const Eigen::Ref<const BitVector>& v) {
    check_visible(rbm, v);
    const Vector pre = rbm.w * v + rbm.hid_bias;
    HashCode code(rbm.hidden());
    for (Eigen::Index i = 0; i < pre.size(); ++i) code.set(static_cast<std::size_t>(i), pre[i] >= 0.0);
    return code;
}

} // namespace hdh
