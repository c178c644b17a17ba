#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eoslab/common.hpp"

namespace eoslab::sharpness {

// symmetric linear operator v -> H v
using HvpOperator = std::function<void(std::span<const double> v, std::span<double> out)>;

struct SpectralEstimate {
    double value = 0.0;          // |lambda| of the dominant eigenvalue
    double lambda_signed = 0.0;  // Rayleigh quotient at the returned vector
    std::vector<double> vector;  // unit eigenvector estimate
    int iterations = 0;
    double residual = 0.0;  // ||Hv - lambda v|| at the returned vector
    bool converged = false;
};

struct PowerIterOptions {
    double tol = 1e-6;  // relative Rayleigh residual: ||Hv - lambda v|| <= tol*|lambda|
    int max_iter = 10000;
    std::uint64_t seed = 0;
    // warm start; used instead of the seeded random vector when non-empty
    std::vector<double> initial;
};

// Power iteration for the largest-|lambda| eigenvalue of a symmetric operator.
// Plain power iteration stalls on +/-lambda pairs of equal magnitude, so the
// budget is split across up to 4 attempts with fresh seeded start vectors.
// converged=false carries the best estimate found (no exception).
SpectralEstimate top_abs_eigenvalue(const HvpOperator& hvp, std::size_t dim,
                                    const PowerIterOptions& opts = {});

// Dense symmetric matrix, row-major n*n. Cyclic Jacobi driven until the
// off-diagonal Frobenius norm falls below off_tol. Eigenvalues sorted
// descending. Throws on non-symmetric input.
std::vector<double> dense_sym_eigen(const std::vector<double>& mat, std::size_t n,
                                    double off_tol = 1e-12);

// Same decomposition but also accumulates eigenvectors (columns of V, row-major).
void dense_sym_eigen_full(const std::vector<double>& mat, std::size_t n,
                          std::vector<double>& eigenvalues, std::vector<double>& V,
                          double off_tol = 1e-12);

// singular values of a rows x cols row-major matrix, descending
std::vector<double> singular_values(const std::vector<double>& mat, std::size_t rows,
                                    std::size_t cols);

struct ParamNorms {
    double l1 = 0.0;
    double l2 = 0.0;
    double nuclear = 0.0;
};

// Flat-parameter layout: alternating weight matrices and bias blocks,
// matching the order the blocks occupy in the parameter vector.
struct LayerLayout {
    struct Block {
        std::size_t rows = 0;
        std::size_t cols = 0;   // weight block is rows*cols
        std::size_t biases = 0; // bias block following the weights (may be 0)
    };
    std::vector<Block> blocks;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.rows * b.cols + b.biases;
        return n;
    }
};

// l1/l2 run over the full flat vector; nuclear sums singular values of the
// weight matrices only (biases excluded).
ParamNorms param_norms(std::span<const double> theta, const LayerLayout& layout);

double l1_distance(std::span<const double> a, std::span<const double> b);

}  // namespace eoslab::sharpness
