#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hdh/errors.hpp"
#include "hdh/rbm.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hdh;
using doctest::Approx;

namespace {

// (tanh(10) + 1) / 2, evaluated with mpmath at 50 digits.
constexpr double kSurrogateTen = 0.999999997938846381809796418569;

BitVector bits(std::initializer_list<double> values) {
    BitVector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

Eigen::VectorXd flatten(const RbmGradients& g) {
    Eigen::VectorXd out(g.d_w.size() + g.d_vis_bias.size() + g.d_hid_bias.size());
    out << Eigen::Map<const Eigen::VectorXd>(g.d_w.data(), g.d_w.size()), g.d_vis_bias, g.d_hid_bias;
    return out;
}

double log_sum_exp(const std::vector<double>& xs) {
    double m = -1e300;
    for (double x : xs) m = std::max(m, x);
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

} // namespace

TEST_CASE("energy") {
    const Rbm zero(2, 1);
    CHECK(energy(zero, bits({1, 0}), bits({1})) == 0.0);
    CHECK(energy(zero, bits({1, 1}), bits({0})) == 0.0);

    Rbm rbm(2, 1);
    rbm.vis_bias << 0.1, 0.2;
    rbm.hid_bias << 0.3;
    rbm.w << 0.5, 0.6;
    CHECK(energy(rbm, bits({1, 0}), bits({1})) == Approx(-0.9).epsilon(1e-15));

    CHECK_THROWS_AS(energy(rbm, bits({0.5, 0}), bits({1})), DomainError);
    CHECK_THROWS_AS(energy(rbm, bits({1, 0}), bits({2})), DomainError);
}

TEST_CASE("prob_h_given_v") {
    const Rbm zero(3, 2);
    CHECK(prob_h_given_v(zero, bits({1, 0, 1})) == Vector::Constant(2, 0.5));

    Rbm one(1, 1);
    one.w << std::log(3.0);
    CHECK(prob_h_given_v(one, bits({1}))[0] == Approx(0.75).epsilon(1e-15));

    Engine e(2);
    Rbm rbm = test::random_rbm(e, 3, 2);
    const auto v = bits({1, 1, 0});
    const double p = prob_h_given_v(rbm, v)[1];
    rbm.w.row(1) *= -1.0;
    rbm.hid_bias[1] *= -1.0;
    CHECK(prob_h_given_v(rbm, v)[1] == Approx(1.0 - p).epsilon(1e-14));

    CHECK_THROWS_AS(prob_h_given_v(rbm, bits({1, 0.3, 0})), DomainError);
}

TEST_CASE("prob_v_given_h") {
    const Rbm zero(3, 2);
    CHECK(prob_v_given_h(zero, bits({1, 0})) == Vector::Constant(3, 0.5));
    CHECK_THROWS_AS(prob_v_given_h(zero, bits({1, -1})), DomainError);

    Engine e(4);
    const Rbm rbm = test::random_rbm(e, 1, 1, 2.0);
    const auto table = test::enumerate_joint(rbm);
    for (std::uint64_t h = 0; h < 2; ++h) {
        const double p1 = std::exp(table.log_p[1][h]);
        const double p0 = std::exp(table.log_p[0][h]);
        CHECK(std::abs(prob_v_given_h(rbm, test::bits_of(h, 1))[0] - p1 / (p0 + p1)) <= 1e-12);
    }
}

TEST_CASE("property: conditionals agree with the enumerated joint") {
    Engine e(6);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t nv = test::uniform_int(e, 1, 6);
        const std::size_t nh = test::uniform_int(e, 1, 12 - nv);
        const Rbm rbm = test::random_rbm(e, nv, nh, 1.5);
        const auto table = test::enumerate_joint(rbm);
        const std::uint64_t v_states = std::uint64_t{1} << nv;
        const std::uint64_t h_states = std::uint64_t{1} << nh;

        for (std::uint64_t a = 0; a < v_states; ++a) {
            const auto ph = prob_h_given_v(rbm, test::bits_of(a, nv));
            const double log_pv = log_sum_exp(table.log_p[a]);
            for (std::size_t i = 0; i < nh; ++i) {
                std::vector<double> on;
                for (std::uint64_t b = 0; b < h_states; ++b)
                    if ((b >> i) & 1u) on.push_back(table.log_p[a][b]);
                CHECK(std::abs(ph[static_cast<Eigen::Index>(i)] - std::exp(log_sum_exp(on) - log_pv)) <= 1e-10);
            }
        }
        for (std::uint64_t b = 0; b < h_states; ++b) {
            const auto pv = prob_v_given_h(rbm, test::bits_of(b, nh));
            std::vector<double> column;
            for (std::uint64_t a = 0; a < v_states; ++a) column.push_back(table.log_p[a][b]);
            const double log_ph = log_sum_exp(column);
            for (std::size_t j = 0; j < nv; ++j) {
                std::vector<double> on;
                for (std::uint64_t a = 0; a < v_states; ++a)
                    if ((a >> j) & 1u) on.push_back(table.log_p[a][b]);
                CHECK(std::abs(pv[static_cast<Eigen::Index>(j)] - std::exp(log_sum_exp(on) - log_ph)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("free energy matches the enumerated marginal") {
    Engine e(8);
    const Rbm rbm = test::random_rbm(e, 4, 3, 1.0);
    const auto table = test::enumerate_joint(rbm);
    const double log_z = log_partition(rbm);
    for (std::uint64_t a = 0; a < 16; ++a) {
        CHECK(std::abs(-free_energy(rbm, test::bits_of(a, 4)) - log_z - log_sum_exp(table.log_p[a])) <= 1e-10);
    }
}

TEST_CASE("gibbs_chain") {
    const Rbm zero(16, 4);
    const BitVector v0 = BitVector::Zero(16);
    Engine a(99);
    Engine b(99);
    const auto first = gibbs_chain(zero, v0, a);
    const auto second = gibbs_chain(zero, v0, b);
    CHECK(first.v_end == second.v_end);
    CHECK(first.stats.hidden_samples == 1);
    CHECK(first.stats.visible_samples == 1);
    CHECK(first.stats.p_h_start == Vector::Constant(4, 0.5));

    Rbm three(2, 2, 10.0, 3);
    Engine c(1);
    const auto run = gibbs_chain(three, BitVector::Zero(2), c);
    CHECK(run.stats.hidden_samples == 3);
    CHECK(run.stats.visible_samples == 3);

    Rbm hot(5, 3);
    hot.vis_bias.setConstant(20.0);
    hot.hid_bias.setConstant(20.0);
    int all_ones = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        Engine engine(s);
        if (gibbs_chain(hot, BitVector::Zero(5), engine).v_end == BitVector::Ones(5)) ++all_ones;
    }
    CHECK(all_ones >= 990);
}

TEST_CASE("surrogate") {
    CHECK(surrogate(0.0, 10.0) == 0.5);
    CHECK(surrogate(1.0, 10.0) == Approx(kSurrogateTen).epsilon(1e-15));

    for (double x : {-0.7, -0.05, 0.05, 0.3}) {
        const double target = x > 0 ? 1.0 : 0.0;
        const double g1 = std::abs(surrogate(x, 1.0) - target);
        const double g10 = std::abs(surrogate(x, 10.0) - target);
        const double g100 = std::abs(surrogate(x, 100.0) - target);
        CHECK(g10 < g1);
        CHECK(g100 < g10);
    }

    for (double x : {-0.4, 0.0, 0.02, 0.3}) {
        for (double beta : {1.0, 10.0}) {
            const double h = 1e-6;
            const double numeric = (surrogate(x + h, beta) - surrogate(x - h, beta)) / (2 * h);
            CHECK(surrogate_derivative(x, beta) == Approx(numeric).epsilon(1e-6));
        }
    }

    const Rbm zero(3, 2);
    CHECK(surrogate_hidden(zero, bits({1, 0, 1})) == Vector::Constant(2, 0.5));
}

TEST_CASE("reg_objective_terms") {
    Engine e(12);
    const Rbm rbm = test::random_rbm(e, 4, 3);
    const RowMatrix batch = test::random_binary_batch(e, 5, 4);
    CHECK(reg_objective_terms(rbm, batch, {0.0, 0.0, DecorrelationMode::batch}) == 0.0);

    const Rbm zero(4, 3);
    const double lambda = 0.6;
    const double n = 5;
    CHECK(reg_objective_terms(zero, batch, {lambda, 0.0, DecorrelationMode::batch}) ==
          Approx(0.5 * lambda * (n * 0.5) * (n * 0.5) * 3));

    for (int trial = 0; trial < 10; ++trial) {
        const Rbm r = test::random_rbm(e, 5, 4, 0.3, 3.0);
        const RowMatrix b = test::random_binary_batch(e, 6, 5);
        for (auto mode : {DecorrelationMode::batch, DecorrelationMode::per_sample}) {
            const double got = reg_objective_terms(r, b, {0.4, 0.7, mode});
            CHECK(std::abs(got - test::brute_force_rbm_penalty(r, b, 0.4, 0.7, mode)) <= 1e-10);
        }
    }

    CHECK_THROWS_AS(reg_objective_terms(rbm, batch, {-0.1, 0.0, DecorrelationMode::batch}), ConfigError);
    RowMatrix fractional = batch;
    fractional(0, 0) = 0.5;
    CHECK_THROWS_AS(reg_objective_terms(rbm, fractional, {0.1, 0.1, DecorrelationMode::batch}), DomainError);
}

TEST_CASE("cd_gradients with matched phases is zero") {
    Engine e(14);
    const Rbm rbm = test::random_rbm(e, 4, 3);
    const RowMatrix batch = test::random_binary_batch(e, 6, 4);
    const auto g = cd_gradients_from_chain(rbm, batch, batch, {0.0, 0.0, DecorrelationMode::batch});
    CHECK(flatten(g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("penalty gradients match finite differences") {
    Engine e(16);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t nv = test::uniform_int(e, 2, 6);
        const std::size_t nh = test::uniform_int(e, 1, 4);
        Rbm rbm = test::random_rbm(e, nv, nh, 0.3, test::uniform(e, 1.0, 4.0));
        const RowMatrix batch = test::random_binary_batch(e, static_cast<Eigen::Index>(test::uniform_int(e, 1, 6)),
                                                          static_cast<Eigen::Index>(nv));
        for (auto mode : {DecorrelationMode::batch, DecorrelationMode::per_sample}) {
            const Regularization reg{0.5, 0.8, mode};
            const auto analytic = cd_gradients(rbm, batch, reg, 0, {false, true});
            CHECK(analytic.d_vis_bias == Vector::Zero(static_cast<Eigen::Index>(nv)));
            test::GradCheck check;
            auto f = [&] { return reg_objective_terms(rbm, batch, reg); };
            test::check_block(check, rbm.w, analytic.d_w, f, 1e-5, 1e-4, 1e-8);
            test::check_block(check, rbm.hid_bias, analytic.d_hid_bias, f, 1e-5, 1e-4, 1e-8);
            CHECK_MESSAGE(check.failures == 0, "trial ", trial, " worst ", check.worst_relative);
        }
    }
}

TEST_CASE("CD-1 points along the exact likelihood gradient") {
    Engine e(18);
    const Rbm rbm = test::random_rbm(e, 4, 3, 1.0);
    const RowMatrix patterns = test::random_binary_batch(e, 4, 4);
    RowMatrix batch(2000, 4);
    for (Eigen::Index i = 0; i < batch.rows(); ++i) batch.row(i) = patterns.row(i % 4);

    const auto cd = flatten(cd_gradients(rbm, batch, {0.0, 0.0, DecorrelationMode::batch}, 5, {true, false}));
    const auto exact = flatten(exact_loglik_grad(rbm, batch));
    // cd is a descent direction for -ln L, exact is the ascent direction of ln L.
    const double cosine = (-cd).dot(exact) / (cd.norm() * exact.norm());
    CHECK(cosine > 0.5);
}

TEST_CASE("exact_loglik_grad") {
    const Rbm zero(3, 2);
    const auto g = exact_loglik_grad(zero, RowMatrix::Zero(4, 3));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(g.d_vis_bias[j] == Approx(4 * -0.5).epsilon(1e-12));

    Engine e(20);
    for (int trial = 0; trial < 5; ++trial) {
        Rbm rbm = test::random_rbm(e, 4, 3, 1.0);
        const RowMatrix batch = test::random_binary_batch(e, 5, 4);
        const double ll = exact_log_likelihood(rbm, batch);
        CHECK(std::abs(ll / 5 - test::enumerated_mean_loglik(rbm, batch)) <= 1e-10);

        const auto analytic = exact_loglik_grad(rbm, batch);
        auto f = [&] { return exact_log_likelihood(rbm, batch); };
        auto worst = [&](auto& params, const auto& grad) {
            double w = 0.0;
            for (Eigen::Index i = 0; i < params.size(); ++i)
                w = std::max(w, std::abs(test::central_difference(params.data()[i], f, 1e-5) - grad.data()[i]));
            return w;
        };
        CHECK(worst(rbm.w, analytic.d_w) <= 1e-6);
        CHECK(worst(rbm.vis_bias, analytic.d_vis_bias) <= 1e-6);
        CHECK(worst(rbm.hid_bias, analytic.d_hid_bias) <= 1e-6);
    }

    CHECK_THROWS_AS(exact_loglik_grad(Rbm(12, 12), RowMatrix::Zero(1, 12)), CapacityError);
    CHECK_THROWS_AS(log_partition(Rbm(20, 1)), CapacityError);
}

TEST_CASE("update") {
    Engine e(22);
    const Rbm rbm = test::random_rbm(e, 3, 2);
    CHECK(update(rbm, RbmGradients::zeros_like(rbm), 0.1) == rbm);

    Rbm one(1, 1);
    one.vis_bias << 1.0;
    auto grads = RbmGradients::zeros_like(one);
    grads.d_vis_bias << 2.0;
    CHECK(update(one, grads, 0.25).vis_bias[0] == 0.5);
    CHECK_THROWS_AS(update(one, grads, 0.0), ConfigError);
}

TEST_CASE("hash") {
    const Rbm zero(4, 5);
    const auto all = hash(zero, bits({0, 1, 0, 1}));
    CHECK(all.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(all.test(i));

    Rbm two(3, 2);
    two.hid_bias << -5, 5;
    const auto code = hash(two, bits({1, 1, 1}));
    CHECK_FALSE(code.test(0));
    CHECK(code.test(1));

    CHECK_THROWS_AS(hash(two, bits({1, 0.5, 1})), DomainError);

    Engine e(24);
    for (int trial = 0; trial < 20; ++trial) {
        const Rbm rbm = test::random_rbm(e, 6, 7);
        Rbm scaled = rbm;
        const double c = test::uniform(e, 0.01, 100.0);
        scaled.w *= c;
        scaled.hid_bias *= c;
        const BitVector v = test::random_binary_batch(e, 1, 6).row(0).transpose();
        CHECK(hash(rbm, v) == hash(scaled, v));
    }
}

TEST_CASE("property: CD-1 training raises the exact likelihood") {
    Engine e(26);
    Rbm rbm = test::random_rbm(e, 6, 4, 0.1);
    RowMatrix batch(10, 6);
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        batch.row(i) = (i % 2 == 0) ? bits({1, 1, 1, 0, 0, 0}).transpose() : bits({0, 0, 1, 1, 0, 1}).transpose();
    }
    const Regularization none{0.0, 0.0, DecorrelationMode::batch};
    const double before = test::enumerated_mean_loglik(rbm, batch);
    for (std::uint64_t step = 0; step < 500; ++step) {
        rbm = update(rbm, cd_gradients(rbm, batch, none, step * 7919), 0.05);
    }
    const double after = test::enumerated_mean_loglik(rbm, batch);
    CHECK(after > before);
}

TEST_CASE("determinism and thread independence") {
    Engine e(28);
    const Rbm rbm = test::random_rbm(e, 5, 3);
    const RowMatrix batch = test::random_binary_batch(e, 17, 5);
    const Regularization reg{0.1, 0.1, DecorrelationMode::batch};
    const auto a = cd_gradients(rbm, batch, reg, 77);
    const auto b = cd_gradients(rbm, batch, reg, 77);
    const auto c = cd_gradients(rbm, batch, reg, 77, {}, 4);
    CHECK(flatten(a) == flatten(b));
    CHECK(flatten(a) == flatten(c));
    CHECK(sample_chains(rbm, batch, 3, 1) == sample_chains(rbm, batch, 3, 3));
}
