#include "eoslab/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eoslab/rng.hpp"

namespace eoslab::sharpness {

namespace {

void random_unit_vector(std::vector<double>& v, SplitMix64& rng) {
    double n = 0.0;
    while (n == 0.0) {
        for (double& x : v) x = rng.next_gaussian();
        n = norm2(v);
    }
    scale(v, 1.0 / n);
}

}  // namespace

SpectralEstimate top_abs_eigenvalue(const HvpOperator& hvp, std::size_t dim,
                                    const PowerIterOptions& opts) {
    if (dim == 0) throw InvalidArgument("top_abs_eigenvalue: dim == 0");

    constexpr int kAttempts = 4;
    const int per_attempt = std::max(1, opts.max_iter / kAttempts);

    SpectralEstimate best;
    best.residual = std::numeric_limits<double>::infinity();

    SplitMix64 rng(opts.seed);
    std::vector<double> v(dim), w(dim);
    int total_iters = 0;

    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        if (attempt == 0 && opts.initial.size() == dim && all_finite(opts.initial) &&
            norm2(opts.initial) > 0.0) {
            v = opts.initial;
            scale(v, 1.0 / norm2(v));
        } else {
            random_unit_vector(v, rng);
        }

        for (int it = 0; it < per_attempt; ++it) {
            ++total_iters;
            hvp(v, w);
            const double lambda = dot(v, w);
            double res = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double r = w[i] - lambda * v[i];
                res += r * r;
            }
            res = std::sqrt(res);

            if (res < best.residual) {
                best.value = std::abs(lambda);
                best.lambda_signed = lambda;
                best.vector = v;
                best.residual = res;
                best.iterations = total_iters;
            }
            if (res <= opts.tol * std::max(std::abs(lambda), 1e-300)) {
                best.converged = true;
                return best;
            }

            const double wn = norm2(w);
            if (wn == 0.0) {
                // v is in the kernel; the iteration cannot leave it
                break;
            }
            for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
        }
    }
    best.converged = false;
    return best;
}

namespace {

double off_diag_frobenius(const std::vector<double>& a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
}

void jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& evals,
                  std::vector<double>* V, double off_tol) {
    if (V) {
        V->assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) (*V)[i * n + i] = 1.0;
    }
    double fro = 0.0;
    for (double v : a) fro += v * v;
    fro = std::sqrt(fro);
    // requested tolerance, floored at attainable double precision
    const double eff_tol = std::max(off_tol, 8.0 * 2.220446049250313e-16 * fro);
    const int max_sweeps = 100;
    double prev_off = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double off = off_diag_frobenius(a, n);
        if (off < eff_tol || off >= prev_off) break;
        prev_off = off;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                // rotation angle zeroing a[p][q]
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                if (V) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = (*V)[k * n + p];
                        const double vkq = (*V)[k * n + q];
                        (*V)[k * n + p] = c * vkp - s * vkq;
                        (*V)[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    evals.resize(n);
    for (std::size_t i = 0; i < n; ++i) evals[i] = a[i * n + i];
}

void check_symmetric(const std::vector<double>& mat, std::size_t n) {
    if (mat.size() != n * n) throw DimensionMismatch("dense_sym_eigen: size != n*n");
    double scale = 0.0;
    for (double v : mat) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * std::max(1.0, scale);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(mat[i * n + j] - mat[j * n + i]) > tol)
                throw InvalidArgument("dense_sym_eigen: non-symmetric input");
}

}  // namespace

std::vector<double> dense_sym_eigen(const std::vector<double>& mat, std::size_t n,
                                    double off_tol) {
    check_symmetric(mat, n);
    std::vector<double> evals;
    jacobi_eigen(mat, n, evals, nullptr, off_tol);
    std::sort(evals.begin(), evals.end(), std::greater<double>());
    return evals;
}

void dense_sym_eigen_full(const std::vector<double>& mat, std::size_t n,
                          std::vector<double>& eigenvalues, std::vector<double>& V,
                          double off_tol) {
    check_symmetric(mat, n);
    std::vector<double> evals, vecs;
    jacobi_eigen(mat, n, evals, &vecs, off_tol);
    // sort eigenpairs descending by eigenvalue
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return evals[a] > evals[b]; });
    eigenvalues.resize(n);
    V.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        eigenvalues[j] = evals[idx[j]];
        for (std::size_t i = 0; i < n; ++i) V[i * n + j] = vecs[i * n + idx[j]];
    }
}

std::vector<double> singular_values(const std::vector<double>& mat, std::size_t rows,
                                    std::size_t cols) {
    if (mat.size() != rows * cols) throw DimensionMismatch("singular_values: bad size");
    // eigenvalues of the smaller Gram matrix; sigma_i = sqrt(max(lambda_i, 0))
    const bool use_mtm = cols <= rows;
    const std::size_t n = use_mtm ? cols : rows;
    std::vector<double> gram(n * n, 0.0);
    if (use_mtm) {
        for (std::size_t i = 0; i < cols; ++i)
            for (std::size_t j = i; j < cols; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < rows; ++k) s += mat[k * cols + i] * mat[k * cols + j];
                gram[i * n + j] = gram[j * n + i] = s;
            }
    } else {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = i; j < rows; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < cols; ++k) s += mat[i * cols + k] * mat[j * cols + k];
                gram[i * n + j] = gram[j * n + i] = s;
            }
    }
    // absolute Jacobi threshold scaled to the Gram matrix so tiny layers do not
    // spin on an unreachable 1e-12 when entries are O(1e+2)
    double fro = 0.0;
    for (double v : gram) fro += v * v;
    const double off_tol = 1e-12 * std::max(1.0, std::sqrt(fro));
    std::vector<double> evals = dense_sym_eigen(gram, n, off_tol);
    for (double& v : evals) v = std::sqrt(std::max(v, 0.0));
    return evals;
}

ParamNorms param_norms(std::span<const double> theta, const LayerLayout& layout) {
    if (theta.size() != layout.total())
        throw DimensionMismatch("param_norms: theta size does not match layout");
    ParamNorms out;
    out.l1 = norm1(theta);
    out.l2 = norm2(theta);
    std::size_t off = 0;
    for (const auto& b : layout.blocks) {
        const std::size_t wn = b.rows * b.cols;
        if (wn > 0) {
            std::vector<double> w(theta.begin() + off, theta.begin() + off + wn);
            for (double s : singular_values(w, b.rows, b.cols)) out.nuclear += s;
        }
        off += wn + b.biases;
    }
    return out;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace eoslab::sharpness
