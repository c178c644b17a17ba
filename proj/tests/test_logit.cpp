#include <doctest.h>

#include <cmath>

#include "eoslab/logit.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/sharpness.hpp"
#include "test_util.hpp"

using namespace eoslab;
using namespace eoslab::logit;

namespace {

// flattens (w_tilde, b) so the finite-difference helpers apply
AffineClassifier unflatten(const ParamVector& theta) {
    AffineClassifier c;
    c.w_tilde.assign(theta.begin(), theta.end() - 1);
    c.b = theta.back();
    return c;
}

}  // namespace

TEST_CASE("logistic values and derivative identities") {
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic_prime(0.0) == 0.25);
    CHECK(logistic_prime(1.0) == doctest::Approx(0.196612).epsilon(1e-5));

    SplitMix64 rng(8);
    for (int k = 0; k < 100; ++k) {
        const double z = rng.next_uniform(-30.0, 30.0);
        CHECK(logistic(z) + logistic(-z) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(logistic_prime(z) > 0.0);
        CHECK(logistic_prime(z) <= 0.25);
    }
    // saturation without overflow
    CHECK(logistic(800.0) == 1.0);
    CHECK(logistic(-800.0) == 0.0);
    CHECK(logistic_prime(800.0) == 0.0);
    CHECK(std::isfinite(logistic(-1e308)));
}

TEST_CASE("two-point loss value on the unit example") {
    const auto data = make_data({1.0});
    const AffineClassifier c{{1.0}, 0.0};
    const auto lh = loss_and_hessian(c, data);
    // 1/2 (log 2 + log(1 + 1/e))
    CHECK(lh.loss == doctest::Approx(0.5032045).epsilon(1e-6));

    ParamVector grad;
    CHECK(loss_and_grad(c, data, grad) == doctest::Approx(lh.loss).epsilon(1e-15));
}

TEST_CASE("data validation enforces the unit-norm contract") {
    CHECK_THROWS_AS(make_data({1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(make_data({}), InvalidArgument);
    const auto d = sample_data(7, 99);
    CHECK(std::abs(norm2(d.x2_tilde) - 1.0) <= 1e-12);
    CHECK(sample_data(7, 99).x2_tilde == d.x2_tilde);
}

TEST_CASE("hessian is psd with rank at most two") {
    SplitMix64 rng(44);
    for (int rep = 0; rep < 10; ++rep) {
        const auto data = sample_data(4, rng.next_u64());
        AffineClassifier c;
        c.w_tilde.resize(4);
        for (double& v : c.w_tilde) v = rng.next_gaussian();
        c.b = rng.next_gaussian();
        const auto lh = loss_and_hessian(c, data);
        const auto evals = sharpness::dense_sym_eigen(lh.hessian, 5);
        for (double lam : evals) CHECK(lam >= -1e-12);
        for (std::size_t i = 2; i < evals.size(); ++i) CHECK(std::abs(evals[i]) < 1e-12);
    }
}

TEST_CASE("gradient and hessian match finite differences") {
    SplitMix64 rng(77);
    for (std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{5}}) {
        for (int rep = 0; rep < 8; ++rep) {
            const auto data = sample_data(d, rng.next_u64());
            ParamVector theta(d + 1);
            for (double& v : theta) v = rng.next_uniform(-2.0, 2.0);

            auto loss_at = [&](const ParamVector& t) {
                ParamVector g;
                return loss_and_grad(unflatten(t), data, g);
            };
            ParamVector grad;
            loss_and_grad(unflatten(theta), data, grad);
            CHECK(testutil::rel_err_vec(grad, testutil::fd_gradient(loss_at, theta, 1e-6)) < 1e-7);

            const auto lh = loss_and_hessian(unflatten(theta), data);
            for (std::size_t j = 0; j <= d; ++j) {
                const auto col = testutil::fd_gradient(
                    [&](const ParamVector& t) {
                        ParamVector g;
                        loss_and_grad(unflatten(t), data, g);
                        return g[j];
                    },
                    theta, 1e-6);
                ParamVector hcol(d + 1);
                for (std::size_t i = 0; i <= d; ++i) hcol[i] = lh.hessian[i * (d + 1) + j];
                CHECK(testutil::rel_err_vec(hcol, col) < 1e-6);
            }
        }
    }
}

TEST_CASE("closed-form sharpness equals the eigensolver across the grid") {
    const auto data = sample_data(2, 5);
    for (double z = -5.0; z <= 5.0 + 1e-9; z += 0.5) {
        for (double b = -5.0; b <= 5.0 + 1e-9; b += 0.5) {
            AffineClassifier c;
            c.w_tilde = data.x2_tilde;
            scale(c.w_tilde, z);
            c.b = b;
            const double closed = sharpness_closed_form(c, data);
            const auto lh = loss_and_hessian(c, data);
            const auto evals = sharpness::dense_sym_eigen(lh.hessian, 3);
            double top = 0.0;
            for (double lam : evals) top = std::max(top, std::abs(lam));
            CHECK(testutil::rel_err(closed, top) < 1e-10);
        }
    }

    // a component orthogonal to the data direction changes nothing
    const auto d3 = make_data({1.0, 0.0, 0.0});
    const AffineClassifier plain{{0.7, 0.0, 0.0}, -0.3};
    const AffineClassifier skew{{0.7, 2.0, -1.0}, -0.3};
    CHECK(sharpness_closed_form(plain, d3) ==
          doctest::Approx(sharpness_closed_form(skew, d3)).epsilon(1e-15));
}

TEST_CASE("sharpness at the reference point and in the flat tail") {
    const auto data = make_data({1.0});
    CHECK(sharpness_closed_form({{1.0}, 0.0}, data) ==
          doctest::Approx(0.27730).epsilon(1e-4));
    CHECK(sharpness_closed_form({{1.0}, -40.0}, data) < 1e-15);
}

TEST_CASE("max-margin classifier splits the points with equal margins") {
    SplitMix64 rng(3);
    const auto data = sample_data(3, rng.next_u64());
    const auto c = max_margin_params(data);
    CHECK(c.w_tilde == data.x2_tilde);
    CHECK(c.b == -0.5);
    const double pos = dot(c.w_tilde, data.x2_tilde) + c.b;
    CHECK(pos == doctest::Approx(0.5).epsilon(1e-12));  // equal and opposite
    CHECK(c.b == doctest::Approx(-pos).epsilon(1e-12));
    // positive rescaling preserves both decisions
    AffineClassifier scaled{c.w_tilde, c.b * 3.0};
    scale(scaled.w_tilde, 3.0);
    CHECK(dot(scaled.w_tilde, data.x2_tilde) + scaled.b > 0.0);
    CHECK(scaled.b < 0.0);

    const auto d1 = make_data({1.0});
    const auto c1 = max_margin_params(d1);
    // decision boundary at the midpoint of the two examples
    CHECK(c1.w_tilde[0] * 0.5 + c1.b == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("sharpness minimization lands on the corner of the margin box") {
    const auto data = sample_data(3, 12);
    const auto got = min_sharpness_params(data, 150);
    CHECK(got.z == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(got.b) < 1e-9);
    CHECK(got.value == doctest::Approx(0.27730).epsilon(1e-3));
    CHECK(got.b > -got.z);  // feasible-set contract
    // classifier encodes w_tilde = z * x2_tilde
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(got.classifier.w_tilde[i] ==
              doctest::Approx(got.z * data.x2_tilde[i]).epsilon(1e-12));

    const auto fine = min_sharpness_params(data, 300);
    CHECK(std::abs(fine.value - got.value) < 1e-6);

    CHECK_THROWS_AS(min_sharpness_params(data, 99), InvalidArgument);
}

TEST_CASE("both canonical classifiers separate the training points") {
    const auto data = sample_data(4, 21);
    for (const auto& c : {max_margin_params(data), min_sharpness_params(data).classifier}) {
        ParamVector g;
        const double loss = loss_and_grad(c, data, g);
        CHECK(loss < std::log(2.0));  // better than the uninformative classifier
        CHECK(dot(c.w_tilde, data.x2_tilde) + c.b > 0.0);
        CHECK(c.b <= 0.0);
    }
}

TEST_CASE("generalization error of an unbiased classifier is one half") {
    const auto data = sample_data(3, 6);
    const AffineClassifier c{data.x2_tilde, 0.0};
    const ParamVector mu(3, 0.0);
    const auto got = expected_gen_error_mc(c, mu, 100000, 17);
    CHECK(std::abs(got.estimate - 0.5) <= 3.0 * got.std_error);
}

TEST_CASE("equal-margin classifiers misclassify the cluster in high dimension") {
    const std::size_t d = 50;
    const ParamVector mu(d, 0.0);
    SplitMix64 rng(31);
    double total = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        ParamVector w(d);
        for (double& v : w) v = rng.next_gaussian();
        scale(w, 1.0 / norm2(w));
        const AffineClassifier c{w, -0.5};
        total += expected_gen_error_mc(c, mu, 10000, rng.next_u64()).estimate;
    }
    CHECK(total / 20.0 >= 0.95);
}

TEST_CASE("a well-aligned classifier on a far cluster rarely errs") {
    const std::size_t d = 5;
    ParamVector mu(d, 0.0);
    mu[0] = 10.0;
    ParamVector w(d, 0.0);
    w[0] = 1.0;
    const auto got = expected_gen_error_mc({w, 0.0}, mu, 100000, 4);
    CHECK(got.estimate <= 0.01);
}

TEST_CASE("generalization error runs are deterministic and validated") {
    const ParamVector mu = {0.3, -0.2};
    const AffineClassifier c{{0.6, 0.8}, -0.1};
    const auto a = expected_gen_error_mc(c, mu, 5000, 123);
    const auto b = expected_gen_error_mc(c, mu, 5000, 123);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
    CHECK_THROWS_AS(expected_gen_error_mc(c, {1.0}, 1000, 1), DimensionMismatch);
    CHECK_THROWS_AS(expected_gen_error_mc(c, mu, 99, 1), InvalidArgument);
}
