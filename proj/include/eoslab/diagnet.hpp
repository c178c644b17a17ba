#pragma once

#include <cstddef>
#include <vector>

#include "eoslab/common.hpp"
#include "eoslab/rng.hpp"

namespace eoslab::diagnet {

// Single-sample regression task for the shared-weight diagonal network
// predicting <w^(.L), z>. The solution manifold M is {w : <x, w^(.L)> = y}.
struct Problem {
    std::vector<double> x;  // features
    double y = 0.0;         // target
    int depth = 2;          // Hadamard power L >= 2
};

void validate(const Problem& p);

double predict(const Problem& p, std::span<const double> w, std::span<const double> z);

// residual <x, w^(.L)> - y
double residual(const Problem& p, std::span<const double> w);

double loss(const Problem& p, std::span<const double> w);

ParamVector gradient(const Problem& p, std::span<const double> w);

// depth 2 only: diag(2*r*x) + 4(x.w)(x.w)^T with r the residual
std::vector<double> hessian(const Problem& p, std::span<const double> w);

void hessian_vec(const Problem& p, std::span<const double> w, std::span<const double> v,
                 std::span<double> out);

// 4*||x.w||_2^2, valid on the manifold (loss <= tol_manifold), depth 2
double sharpness_closed_form(const Problem& p, std::span<const double> w,
                             double tol_manifold = 1e-9);

struct MinimizerSet {
    std::vector<std::size_t> support;  // 0-based indices of the extreme entries of x
    double radius_sq = 0.0;            // common ||w||_2^2 over the set
    double objective_value = 0.0;
    ParamVector canonical;  // nonnegative, lowest support index carries all mass
};

// minimizers of ||w^(.2)||_1 over M: support in argmax x, ||w||_2^2 = y/x_max
MinimizerSet l1_minimizer_set(const Problem& p);

// minimizers of sharpness over M: support in argmin x, value 4*y*x_min
MinimizerSet sharpness_minimizer_set(const Problem& p);

enum class ManifoldObjective {
    L1,        // f(w) = 1/2 ||w||_2^2, the squared-weight l1 norm up to scale
    Sharpness  // f(w) = 1/2 ||x.w||_2^2, sharpness up to the constant 8
};

// projection onto the tangent space (x . w^(.L-1))^perp; w must be nonzero
ParamVector tangent_project(const Problem& p, std::span<const double> w,
                            std::span<const double> v);

// projected Euclidean gradient of the chosen objective; depth 2
ParamVector riemannian_grad(const Problem& p, std::span<const double> w,
                            ManifoldObjective objective);

// Hessian quadratic form of the restricted objective at a critical point w,
// evaluated on a tangent vector u; depth 2
double riemannian_hess_quadform(const Problem& p, std::span<const double> w,
                                std::span<const double> u, ManifoldObjective objective);

// Random manifold point, depth 2: d-1 coordinates drawn freely, the remaining
// one solved; rejection-samples until the solved square is nonnegative.
ParamVector sample_manifold_point(const Problem& p, SplitMix64& rng);

}  // namespace eoslab::diagnet
