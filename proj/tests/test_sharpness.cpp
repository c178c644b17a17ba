#include <doctest.h>

#include <cmath>

#include "eoslab/rng.hpp"
#include "eoslab/sharpness.hpp"
#include "test_util.hpp"

using namespace eoslab;
using namespace eoslab::sharpness;

namespace {

HvpOperator matrix_op(const std::vector<double>& A, std::size_t n) {
    return [A, n](std::span<const double> v, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * v[j];
            out[i] = s;
        }
    };
}

std::vector<double> random_symmetric(std::size_t n, SplitMix64& rng) {
    std::vector<double> A(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) A[i * n + j] = A[j * n + i] = rng.next_gaussian();
    return A;
}

// orthogonal conjugation of a known spectrum by random Givens rotations
std::vector<double> matrix_with_spectrum(const std::vector<double>& evals, SplitMix64& rng,
                                         int rotations) {
    const std::size_t n = evals.size();
    std::vector<double> A(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) A[i * n + i] = evals[i];
    for (int r = 0; r < rotations; ++r) {
        const std::size_t p = rng.next_u64() % n;
        std::size_t q = rng.next_u64() % n;
        if (p == q) continue;
        const double ang = rng.next_uniform(0.0, 6.283185307179586);
        const double c = std::cos(ang), s = std::sin(ang);
        for (std::size_t k = 0; k < n; ++k) {
            const double akp = A[k * n + p], akq = A[k * n + q];
            A[k * n + p] = c * akp - s * akq;
            A[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
            const double apk = A[p * n + k], aqk = A[q * n + k];
            A[p * n + k] = c * apk - s * aqk;
            A[q * n + k] = s * apk + c * aqk;
        }
    }
    return A;
}

}  // namespace

TEST_CASE("power iteration finds the dominant magnitude on a known diagonal") {
    const std::vector<double> A = {1, 0, 0, 0, -3, 0, 0, 0, 2};
    PowerIterOptions opts;
    opts.seed = 7;
    const auto est = top_abs_eigenvalue(matrix_op(A, 3), 3, opts);
    CHECK(est.converged);
    CHECK(est.value == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(est.lambda_signed == doctest::Approx(-3.0).epsilon(1e-9));
    CHECK(est.residual <= opts.tol * 3.0 * (1 + 1e-12));
}

TEST_CASE("power iteration on a rank-one outer product") {
    // 4 (x.w)(x.w)^T has single nonzero eigenvalue 4 ||x.w||^2
    const std::vector<double> x = {1.0, 2.0, 0.5};
    const std::vector<double> w = {0.3, -0.7, 1.1};
    std::vector<double> u(3);
    for (int i = 0; i < 3; ++i) u[i] = x[i] * w[i];
    std::vector<double> A(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A[i * 3 + j] = 4.0 * u[i] * u[j];
    double want = 0.0;
    for (int i = 0; i < 3; ++i) want += u[i] * u[i];
    want *= 4.0;

    PowerIterOptions opts;
    opts.seed = 11;
    const auto est = top_abs_eigenvalue(matrix_op(A, 3), 3, opts);
    CHECK(est.converged);
    CHECK(testutil::rel_err(est.value, want) < 1e-8);
}

TEST_CASE("power iteration matches the dense eigensolver on random matrices") {
    SplitMix64 rng(42);
    const std::size_t n = 50;
    auto A = random_symmetric(n, rng);
    // shift the spectrum so the dominant magnitude is not a near +/- tie
    for (std::size_t i = 0; i < n; ++i) A[i * n + i] += 3.0;
    const auto evals = dense_sym_eigen(A, n);
    const double want = std::max(std::abs(evals.front()), std::abs(evals.back()));

    PowerIterOptions opts;
    opts.seed = 3;
    opts.tol = 1e-9;
    const auto est = top_abs_eigenvalue(matrix_op(A, n), n, opts);
    CHECK(est.converged);
    CHECK(testutil::rel_err(est.value, want) < 1e-8);
}

TEST_CASE("power iteration warm start converges immediately at a fixed point") {
    const std::vector<double> A = {5, 0, 0, 1};
    PowerIterOptions opts;
    opts.seed = 1;
    opts.initial = {1.0, 0.0};
    const auto est = top_abs_eigenvalue(matrix_op(A, 2), 2, opts);
    CHECK(est.converged);
    CHECK(est.iterations == 1);
    CHECK(est.value == doctest::Approx(5.0));
}

TEST_CASE("power iteration reports non-convergence on an exact +/- pair") {
    const std::vector<double> A = {2, 0, 0, -2};
    PowerIterOptions opts;
    opts.seed = 5;
    opts.max_iter = 400;
    const auto est = top_abs_eigenvalue(matrix_op(A, 2), 2, opts);
    CHECK_FALSE(est.converged);
    CHECK(est.value <= 2.0 + 1e-9);  // best estimate is still bounded by the spectrum
}

TEST_CASE("dense eigensolver handles hand-checkable matrices") {
    const std::vector<double> I3 = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    auto e = dense_sym_eigen(I3, 3);
    for (double v : e) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> B = {2, 1, 1, 2};
    e = dense_sym_eigen(B, 2);
    CHECK(e[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense eigensolver preserves the trace and is sorted") {
    SplitMix64 rng(99);
    const std::size_t n = 20;
    const auto A = random_symmetric(n, rng);
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += A[i * n + i];
    const auto e = dense_sym_eigen(A, n);
    double sum = 0.0;
    for (double v : e) sum += v;
    CHECK(std::abs(sum - trace) < 1e-10);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(e[i] >= e[i + 1]);
}

TEST_CASE("dense eigensolver recovers a planted spectrum") {
    SplitMix64 rng(123);
    std::vector<double> want = {9.5, 4.0, 1.25, 0.0, -2.5, -7.75};
    const auto A = matrix_with_spectrum(want, rng, 60);
    const auto e = dense_sym_eigen(A, want.size());
    std::sort(want.begin(), want.end(), std::greater<double>());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(e[i] - want[i]) < 1e-10);
}

TEST_CASE("dense eigensolver rejects non-symmetric input") {
    const std::vector<double> A = {1, 2, 3, 4};
    CHECK_THROWS_AS(dense_sym_eigen(A, 2), InvalidArgument);
}

TEST_CASE("eigenvector accumulation gives residual-free eigenpairs") {
    SplitMix64 rng(7);
    const std::size_t n = 12;
    const auto A = random_symmetric(n, rng);
    std::vector<double> evals, V;
    dense_sym_eigen_full(A, n, evals, V);
    for (std::size_t j = 0; j < n; ++j) {
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double av = 0.0;
            for (std::size_t k = 0; k < n; ++k) av += A[i * n + k] * V[k * n + j];
            const double r = av - evals[j] * V[i * n + j];
            res += r * r;
        }
        CHECK(std::sqrt(res) < 1e-9);
    }
}

TEST_CASE("singular values satisfy determinant and Frobenius identities") {
    // [[1,2],[3,4]]: sigma1*sigma2 = |det| = 2, sigma1^2+sigma2^2 = 30
    const std::vector<double> A = {1, 2, 3, 4};
    const auto s = singular_values(A, 2, 2);
    CHECK(s.size() == 2);
    CHECK(s[0] * s[1] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(s[0] * s[0] + s[1] * s[1] == doctest::Approx(30.0).epsilon(1e-10));

    // wide and tall shapes agree with each other
    const std::vector<double> W = {1, 0, 2, -1, 1, 0};
    const auto sw = singular_values(W, 2, 3);
    std::vector<double> Wt = {1, -1, 0, 1, 2, 0};
    const auto st = singular_values(Wt, 3, 2);
    REQUIRE(sw.size() == 2);
    REQUIRE(st.size() == 2);
    CHECK(sw[0] == doctest::Approx(st[0]).epsilon(1e-10));
    CHECK(sw[1] == doctest::Approx(st[1]).epsilon(1e-10));
}

TEST_CASE("parameter norms split l1/l2 over everything, nuclear over weights") {
    LayerLayout layout;
    layout.blocks.push_back({2, 2, 2});
    const ParamVector theta = {1, 2, 3, 4, 5, -6};
    const auto n = param_norms(theta, layout);
    CHECK(n.l1 == doctest::Approx(21.0));
    CHECK(n.l2 == doctest::Approx(std::sqrt(91.0)));
    // nuclear of [[1,2],[3,4]]: nuclear^2 = ||A||_F^2 + 2|det| = 34
    CHECK(n.nuclear == doctest::Approx(std::sqrt(34.0)).epsilon(1e-10));

    CHECK_THROWS_AS(param_norms(ParamVector(5, 0.0), layout), DimensionMismatch);
}

TEST_CASE("l1 distance") {
    const ParamVector a = {1, -2, 3};
    const ParamVector b = {0, 1, 3};
    CHECK(sharpness::l1_distance(a, b) == doctest::Approx(4.0));
}
