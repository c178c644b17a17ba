#include <doctest.h>

#include <cmath>

#include "eoslab/network.hpp"
#include "eoslab/rng.hpp"
#include "test_util.hpp"

using namespace eoslab;
using namespace eoslab::network;

namespace {

// Independent straight-line forward pass used as an oracle against the
// library's fused implementation. Returns per-sample pre-activations too so
// relu configurations can be screened away from the kink.
struct OracleForward {
    double loss = 0.0;
    double min_abs_preact = std::numeric_limits<double>::infinity();
};

double oracle_act(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        default: return z;
    }
}

OracleForward oracle_forward(const MLPSpec& spec, const ParamVector& theta,
                             const Matrix& X, const Matrix& T) {
    OracleForward out;
    const std::size_t L = spec.num_layers();
    for (std::size_t s = 0; s < X.rows; ++s) {
        std::vector<double> a(X.row(s).begin(), X.row(s).end());
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t nin = spec.layer_dims[l], nout = spec.layer_dims[l + 1];
            std::vector<double> z(nout);
            for (std::size_t i = 0; i < nout; ++i) {
                double v = theta[spec.bias_offset(l) + i];
                for (std::size_t j = 0; j < nin; ++j)
                    v += theta[spec.weight_offset(l) + i * nin + j] * a[j];
                z[i] = v;
                if (l + 1 < L) out.min_abs_preact = std::min(out.min_abs_preact, std::abs(v));
            }
            if (l + 1 < L)
                for (std::size_t i = 0; i < nout; ++i) z[i] = oracle_act(spec.activation, z[i]);
            a = z;
        }
        if (spec.loss_kind == LossKind::Mse) {
            for (std::size_t i = 0; i < a.size(); ++i)
                out.loss += 0.5 * (a[i] - T.at(s, i)) * (a[i] - T.at(s, i));
        } else {
            double m = a[0];
            for (double v : a) m = std::max(m, v);
            double lse = 0.0;
            for (double v : a) lse += std::exp(v - m);
            lse = m + std::log(lse);
            for (std::size_t i = 0; i < a.size(); ++i) out.loss -= T.at(s, i) * (a[i] - lse);
        }
    }
    out.loss /= static_cast<double>(X.rows);
    return out;
}

Dataset random_dataset(const MLPSpec& spec, std::size_t n, SplitMix64& rng) {
    Dataset d;
    d.inputs = Matrix(n, spec.layer_dims.front());
    d.targets = Matrix(n, spec.layer_dims.back());
    for (double& v : d.inputs.data) v = rng.next_gaussian();
    if (spec.loss_kind == LossKind::Mse) {
        for (double& v : d.targets.data) v = rng.next_gaussian();
    } else {
        for (std::size_t r = 0; r < n; ++r)
            d.targets.at(r, rng.next_u64() % spec.layer_dims.back()) = 1.0;
    }
    return d;
}

MLPSpec random_spec(Activation act, LossKind kind, SplitMix64& rng) {
    MLPSpec spec;
    const std::size_t depth = 1 + rng.next_u64() % 3;
    spec.layer_dims.push_back(1 + rng.next_u64() % 4);
    for (std::size_t l = 0; l < depth; ++l) spec.layer_dims.push_back(2 + rng.next_u64() % 5);
    if (kind == LossKind::Ce && spec.layer_dims.back() < 2) spec.layer_dims.back() = 2;
    spec.activation = act;
    spec.loss_kind = kind;
    return spec;
}

}  // namespace

TEST_CASE("initialization respects the open range and zero biases") {
    MLPSpec spec{{100, 1000}, Activation::Tanh, LossKind::Mse};
    const auto theta = init_lecun_uniform(spec, 1234);
    const double bound = 1.0 / std::sqrt(100.0);
    double mean = 0.0, var = 0.0;
    const std::size_t nw = 1000 * 100;
    for (std::size_t i = 0; i < nw; ++i) {
        CHECK(std::abs(theta[i]) < bound);
        mean += theta[i];
    }
    mean /= static_cast<double>(nw);
    for (std::size_t i = 0; i < nw; ++i) var += (theta[i] - mean) * (theta[i] - mean);
    var /= static_cast<double>(nw);
    CHECK(std::abs(var - bound * bound / 3.0) < 0.05 * bound * bound / 3.0);
    for (std::size_t i = nw; i < theta.size(); ++i) CHECK(theta[i] == 0.0);

    // determinism and the scaling variant
    const auto again = init_lecun_uniform(spec, 1234);
    CHECK(theta == again);
    const auto scaled = init_lecun_uniform(spec, 1234, 5.0);
    for (std::size_t i = 0; i < nw; ++i) CHECK(scaled[i] == 5.0 * theta[i]);
}

TEST_CASE("single linear layer reproduces least-squares loss and gradient") {
    SplitMix64 rng(55);
    MLPSpec spec{{3, 2}, Activation::Identity, LossKind::Mse};
    const auto data = random_dataset(spec, 16, rng);
    auto theta = init_lecun_uniform(spec, 77);

    ParamVector grad;
    const double got = loss_value_and_grad(spec, theta, data, grad);

    // closed-form: L = (1/n) sum_s 1/2 ||W x_s + b - y_s||^2
    double want = 0.0;
    ParamVector want_grad(theta.size(), 0.0);
    const std::size_t n = data.inputs.rows;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < 2; ++i) {
            double o = theta[spec.bias_offset(0) + i];
            for (std::size_t j = 0; j < 3; ++j)
                o += theta[i * 3 + j] * data.inputs.at(s, j);
            const double r = o - data.targets.at(s, i);
            want += 0.5 * r * r;
            want_grad[spec.bias_offset(0) + i] += r / static_cast<double>(n);
            for (std::size_t j = 0; j < 3; ++j)
                want_grad[i * 3 + j] += r * data.inputs.at(s, j) / static_cast<double>(n);
        }
    }
    want /= static_cast<double>(n);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(testutil::rel_err_vec(grad, want_grad) < 1e-12);
}

TEST_CASE("cross entropy at uniform logits is log k") {
    MLPSpec spec{{2, 4}, Activation::Identity, LossKind::Ce};
    SplitMix64 rng(3);
    const auto data = random_dataset(spec, 10, rng);
    ParamVector theta(spec.param_count(), 0.0);
    ParamVector grad;
    const double got = loss_value_and_grad(spec, theta, data, grad);
    CHECK(got == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy is invariant to a common logit shift") {
    SplitMix64 rng(999);
    MLPSpec spec{{3, 5, 4}, Activation::Tanh, LossKind::Ce};
    const auto data = random_dataset(spec, 12, rng);
    auto theta = init_lecun_uniform(spec, 1);
    ParamVector grad;
    const double base = loss_value_and_grad(spec, theta, data, grad);
    // shifting every output bias by a constant shifts all logits equally
    for (std::size_t i = 0; i < 4; ++i) theta[spec.bias_offset(1) + i] += 17.5;
    const double shifted = loss_value_and_grad(spec, theta, data, grad);
    CHECK(std::abs(shifted - base) < 1e-12);
}

TEST_CASE("perfect interpolation gives exactly zero mse") {
    SplitMix64 rng(31);
    MLPSpec spec{{2, 3}, Activation::Identity, LossKind::Mse};
    auto theta = init_lecun_uniform(spec, 8);
    Dataset data;
    data.inputs = Matrix(6, 2);
    for (double& v : data.inputs.data) v = rng.next_gaussian();
    data.targets = Matrix(6, 3);
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t i = 0; i < 3; ++i) {
            double o = theta[spec.bias_offset(0) + i];
            for (std::size_t j = 0; j < 2; ++j) o += theta[i * 2 + j] * data.inputs.at(s, j);
            data.targets.at(s, i) = o;
        }
    ParamVector grad;
    CHECK(loss_value_and_grad(spec, theta, data, grad) == 0.0);
}

TEST_CASE("library loss equals the independent oracle forward pass") {
    SplitMix64 rng(2718);
    for (auto act : {Activation::Relu, Activation::Tanh, Activation::Identity}) {
        for (auto kind : {LossKind::Mse, LossKind::Ce}) {
            for (int rep = 0; rep < 10; ++rep) {
                const auto spec = random_spec(act, kind, rng);
                const auto data = random_dataset(spec, 5, rng);
                const auto theta = init_lecun_uniform(spec, rng.next_u64());
                ParamVector grad;
                const double got = loss_value_and_grad(spec, theta, data, grad);
                const auto oracle = oracle_forward(spec, theta, data.inputs, data.targets);
                CHECK(testutil::rel_err(got, oracle.loss) < 1e-12);
            }
        }
    }
}

TEST_CASE("gradient matches finite differences across activations and losses") {
    SplitMix64 rng(161803);
    for (auto act : {Activation::Relu, Activation::Tanh, Activation::Identity}) {
        for (auto kind : {LossKind::Mse, LossKind::Ce}) {
            int accepted = 0;
            while (accepted < 21) {
                const auto spec = random_spec(act, kind, rng);
                const auto data = random_dataset(spec, 4, rng);
                const auto theta = init_lecun_uniform(spec, rng.next_u64());
                if (act == Activation::Relu &&
                    oracle_forward(spec, theta, data.inputs, data.targets).min_abs_preact < 1e-3)
                    continue;  // keep finite differences away from the kink
                ++accepted;
                ParamVector grad;
                loss_value_and_grad(spec, theta, data, grad);
                const auto want = testutil::fd_gradient(
                    [&](const ParamVector& u) {
                        ParamVector g;
                        return loss_value_and_grad(spec, u, data, g);
                    },
                    theta, 1e-6);
                CHECK(testutil::rel_err_vec(grad, want) < 1e-6);
            }
        }
    }
}

TEST_CASE("gradient on the reference 2-8-2 tanh net matches finite differences") {
    SplitMix64 rng(515);
    MLPSpec spec{{2, 8, 2}, Activation::Tanh, LossKind::Mse};
    const auto data = random_dataset(spec, 8, rng);
    const auto theta = init_lecun_uniform(spec, 100);
    ParamVector grad;
    loss_value_and_grad(spec, theta, data, grad);
    const auto want = testutil::fd_gradient(
        [&](const ParamVector& u) {
            ParamVector g;
            return loss_value_and_grad(spec, u, data, g);
        },
        theta, 1e-6);
    CHECK(testutil::rel_err_vec(grad, want) < 1e-6);
}

TEST_CASE("hessian action is linear, symmetric, and matches gradient differences") {
    SplitMix64 rng(8128);
    for (auto act : {Activation::Relu, Activation::Tanh, Activation::Identity}) {
        for (auto kind : {LossKind::Mse, LossKind::Ce}) {
            int accepted = 0;
            while (accepted < 20) {
                const auto spec = random_spec(act, kind, rng);
                const auto data = random_dataset(spec, 4, rng);
                const auto theta = init_lecun_uniform(spec, rng.next_u64());
                if (act == Activation::Relu &&
                    oracle_forward(spec, theta, data.inputs, data.targets).min_abs_preact < 1e-3)
                    continue;
                ++accepted;
                const std::size_t p = spec.param_count();

                ParamVector zero(p, 0.0), out(p);
                hessian_vector_product(spec, theta, zero, data, out);
                CHECK(norm2(out) == 0.0);

                ParamVector u(p), v(p), Hu(p), Hv(p);
                for (double& e : u) e = rng.next_gaussian();
                for (double& e : v) e = rng.next_gaussian();
                hessian_vector_product(spec, theta, u, data, Hu);
                hessian_vector_product(spec, theta, v, data, Hv);
                const double uhv = dot(u, Hv), vhu = dot(v, Hu);
                CHECK(testutil::rel_err(uhv, vhu) < 1e-8);

                // central difference of the gradient along v
                const double eps = 1e-4 * std::max(norm2(theta), 1e-3) / norm2(v);
                ParamVector tp(theta), tm(theta), gp, gm;
                axpy(eps, v, tp);
                axpy(-eps, v, tm);
                loss_value_and_grad(spec, tp, data, gp);
                loss_value_and_grad(spec, tm, data, gm);
                ParamVector want(p);
                for (std::size_t i = 0; i < p; ++i) want[i] = (gp[i] - gm[i]) / (2.0 * eps);
                CHECK(testutil::rel_err_vec(Hv, want) < 1e-4);
            }
        }
    }
}

TEST_CASE("dense hessian is symmetric and constant for a linear model") {
    SplitMix64 rng(600);
    MLPSpec spec{{2, 4, 1}, Activation::Tanh, LossKind::Mse};
    const auto data = random_dataset(spec, 6, rng);
    const auto theta = init_lecun_uniform(spec, 4);
    const std::size_t p = spec.param_count();

    // columns alone are already symmetric to HVP tolerance
    ParamVector e(p, 0.0), col(p);
    std::vector<double> raw(p * p);
    for (std::size_t j = 0; j < p; ++j) {
        e[j] = 1.0;
        hessian_vector_product(spec, theta, e, data, col);
        for (std::size_t i = 0; i < p; ++i) raw[i * p + j] = col[i];
        e[j] = 0.0;
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            CHECK(std::abs(raw[i * p + j] - raw[j * p + i]) < 1e-9);

    // identity single layer: the weight-block Hessian is the input Gram matrix / n
    MLPSpec lin{{3, 1}, Activation::Identity, LossKind::Mse};
    const auto ldata = random_dataset(lin, 9, rng);
    const auto h1 = dense_hessian(lin, init_lecun_uniform(lin, 1), ldata);
    const auto h2 = dense_hessian(lin, init_lecun_uniform(lin, 2), ldata);
    for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1[i] == doctest::Approx(h2[i]).epsilon(1e-12));
    const std::size_t n = ldata.inputs.rows;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
            double gram = 0.0;
            for (std::size_t s = 0; s < n; ++s)
                gram += ldata.inputs.at(s, a) * ldata.inputs.at(s, b);
            CHECK(h1[a * 4 + b] == doctest::Approx(gram / static_cast<double>(n)).epsilon(1e-10));
        }

    // smallest net: compare against scalar finite differences
    MLPSpec tiny{{1, 1}, Activation::Identity, LossKind::Mse};
    const auto tdata = random_dataset(tiny, 3, rng);
    const auto ttheta = init_lecun_uniform(tiny, 9);
    const auto th = dense_hessian(tiny, ttheta, tdata);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto col_fd = testutil::fd_gradient(
            [&](const ParamVector& u) {
                ParamVector g;
                loss_value_and_grad(tiny, u, tdata, g);
                return g[j];
            },
            ttheta, 1e-6);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(std::abs(th[i * 2 + j] - col_fd[i]) < 1e-7);
    }
}

TEST_CASE("oversized dense hessian and bad dimensions are rejected") {
    MLPSpec big{{100, 100, 100}, Activation::Tanh, LossKind::Mse};
    ParamVector theta(big.param_count(), 0.0);
    Dataset d;
    d.inputs = Matrix(1, 100);
    d.targets = Matrix(1, 100);
    CHECK_THROWS_AS(dense_hessian(big, theta, d), InvalidArgument);

    MLPSpec spec{{2, 2}, Activation::Tanh, LossKind::Mse};
    Dataset bad;
    bad.inputs = Matrix(3, 2);
    bad.targets = Matrix(2, 2);
    ParamVector g;
    CHECK_THROWS_AS(loss_value_and_grad(spec, ParamVector(spec.param_count(), 0.0), bad, g),
                    DimensionMismatch);
}

TEST_CASE("runaway activations raise the overflow error") {
    MLPSpec spec{{1, 1}, Activation::Identity, LossKind::Mse};
    Dataset d;
    d.inputs = Matrix(1, 1);
    d.inputs.at(0, 0) = 1e200;
    d.targets = Matrix(1, 1);
    ParamVector theta = {1e200, 0.0};
    ParamVector g;
    CHECK_THROWS_AS(loss_value_and_grad(spec, theta, d, g), NumericalOverflow);
}

TEST_CASE("ce target rows must sum to one") {
    MLPSpec spec{{2, 3}, Activation::Identity, LossKind::Ce};
    Dataset d;
    d.inputs = Matrix(2, 2);
    d.targets = Matrix(2, 3);
    d.targets.at(0, 0) = 1.0;
    d.targets.at(1, 1) = 0.5;  // not one-hot
    ParamVector g;
    CHECK_THROWS_AS(loss_value_and_grad(spec, ParamVector(spec.param_count(), 0.0), d, g),
                    InvalidArgument);
}
