#pragma once

#include "hdh/hash_code.hpp"
#include "hdh/linalg.hpp"
#include "hdh/sae.hpp"

#include <cstdint>

namespace hdh {

/// Binary-binary RBM with energy E(v, h) = -a^T v - b^T h - h^T W v.
struct Rbm {
    Matrix w;         ///< hidden x visible
    Vector vis_bias;  ///< a
    Vector hid_bias;  ///< b
    double beta = 10.0;       ///< sharpness of the smooth sign surrogate
    std::size_t cd_steps = 1; ///< Gibbs steps per contrastive-divergence estimate

    Rbm() = default;
    /// Zero parameters.
    Rbm(std::size_t visible, std::size_t hidden, double beta = 10.0, std::size_t cd_steps = 1);

    std::size_t visible() const { return static_cast<std::size_t>(w.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w.rows()); }

    /// Throws ShapeError / ConfigError on inconsistent fields.
    void validate() const;
    bool all_finite() const;

    bool operator==(const Rbm& other) const;
};

struct RbmGradients {
    Matrix d_w;
    Vector d_vis_bias;
    Vector d_hid_bias;

    static RbmGradients zeros_like(const Rbm& rbm);
    RbmGradients& operator+=(const RbmGradients& other);
};

double energy(const Rbm& rbm, const Eigen::Ref<const BitVector>& v, const Eigen::Ref<const BitVector>& h);

Vector prob_h_given_v(const Rbm& rbm, const Eigen::Ref<const BitVector>& v);
Vector prob_v_given_h(const Rbm& rbm, const Eigen::Ref<const BitVector>& h);

/// F(v) = -a^T v - sum_j softplus(b_j + W_j v); P(v) = exp(-F(v)) / Z.
double free_energy(const Rbm& rbm, const Eigen::Ref<const BitVector>& v);

struct GibbsStats {
    std::size_t hidden_samples = 0;
    std::size_t visible_samples = 0;
    Vector p_h_start;  ///< P(h = 1 | v0)
    Vector p_h_end;    ///< P(h = 1 | v_r)
};

struct GibbsResult {
    BitVector v_end;
    GibbsStats stats;
};

/// Runs rbm.cd_steps alternations h ~ P(h|v), v ~ P(v|h) starting from v0.
GibbsResult gibbs_chain(const Rbm& rbm, const Eigen::Ref<const BitVector>& v0, Engine& engine);

/// (tanh(beta * x) + 1) / 2 applied to x = W v + b.
Vector surrogate_hidden(const Rbm& rbm, const Eigen::Ref<const BitVector>& v);

/// Smooth sign surrogate and its derivative d/dx (tanh(beta x) + 1) / 2 = beta (1 - tanh^2(beta x)) / 2.
double surrogate(double x, double beta);
double surrogate_derivative(double x, double beta);

/// Balance + decorrelation penalties on the surrogate hidden outputs of a binary batch.
double reg_objective_terms(const Rbm& rbm, const RowMatrix& batch, const Regularization& reg);

/// Which parts of the contrastive-divergence gradient to include.
struct CdTerms {
    bool likelihood = true;
    bool penalty = true;
};

/// CD-r estimate of the gradient of (-ln L + penalties). Subtracting alpha * grad ascends
/// the likelihood. Sample n's chain is seeded with `seed ^ n`, so the result does not depend
/// on `threads`.
RbmGradients cd_gradients(const Rbm& rbm, const RowMatrix& batch, const Regularization& reg,
                          std::uint64_t seed, CdTerms terms = {}, std::size_t threads = 1);

/// Same estimate with the negative-phase visible states supplied by the caller.
RbmGradients cd_gradients_from_chain(const Rbm& rbm, const RowMatrix& batch, const RowMatrix& v_end,
                                     const Regularization& reg, CdTerms terms = {});

/// Negative-phase samples for every row of `batch`, one chain per row.
RowMatrix sample_chains(const Rbm& rbm, const RowMatrix& batch, std::uint64_t seed, std::size_t threads = 1);

/// Largest visible + hidden size accepted by the exact enumeration routines.
inline constexpr std::size_t kMaxExactUnits = 20;

/// ln Z by enumerating every visible state (hidden units summed analytically).
double log_partition(const Rbm& rbm);

/// sum_n ln P(v_n), exact.
double exact_log_likelihood(const Rbm& rbm, const RowMatrix& batch);

/// Exact gradient of sum_n ln P(v_n). Note the sign: this is the ascent direction.
RbmGradients exact_loglik_grad(const Rbm& rbm, const RowMatrix& batch);

/// p := p - alpha * grad on W, a and b.
Rbm update(const Rbm& rbm, const RbmGradients& grads, double alpha);

/// Deterministic code: bit_i = 1 iff (W v + b)_i >= 0.
HashCode hash(const Rbm& rbm, const Eigen::Ref<const BitVector>& v);

/// Throws DomainError unless every entry is exactly 0 or 1.
void require_binary(const Eigen::Ref<const Vector>& v, const char* what);

} // namespace hdh
