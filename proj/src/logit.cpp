#include "eoslab/logit.hpp"

#include <cmath>
#include <functional>

#include "eoslab/rng.hpp"

namespace eoslab::logit {

namespace {

void check_pair(const AffineClassifier& c, const TwoPointData& data) {
    if (c.w_tilde.size() != data.x2_tilde.size())
        throw DimensionMismatch("logit: classifier and data dimensions differ");
}

// log(1 + e^t) without overflow on either tail
double softplus(double t) {
    return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0);
}

double margin(const AffineClassifier& c, const TwoPointData& data) {
    return dot(c.w_tilde, data.x2_tilde) + c.b;
}

// sharpness as a function of the reduced coordinates (z, b)
double sharp_zb(double z, double b) {
    const double a = logistic_prime(b);
    const double c = logistic_prime(z + b);
    return 0.25 * (a + 2.0 * c + std::sqrt(a * a + 4.0 * c * c));
}

// golden-section minimization on [lo, hi]; the minimizer may sit on either end
double golden_min(double lo, double hi, const std::function<double(double)>& f) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // compare interior estimate against both ends so boundary minima survive
    double best = 0.5 * (a + b);
    double fbest = f(best);
    if (f(lo) < fbest) {
        best = lo;
        fbest = f(lo);
    }
    if (f(hi) < fbest) best = hi;
    return best;
}

}  // namespace

TwoPointData make_data(ParamVector x2_tilde) {
    if (x2_tilde.empty()) throw InvalidArgument("logit data: empty feature vector");
    if (std::abs(norm2(x2_tilde) - 1.0) > 1e-12)
        throw InvalidArgument("logit data: positive example must have unit norm");
    return {std::move(x2_tilde)};
}

TwoPointData sample_data(std::size_t d, std::uint64_t seed) {
    if (d == 0) throw InvalidArgument("logit data: dimension must be positive");
    SplitMix64 rng(seed);
    ParamVector v(d);
    double n = 0.0;
    do {
        for (double& e : v) e = rng.next_gaussian();
        n = norm2(v);
    } while (n < 1e-8);
    scale(v, 1.0 / n);
    // rounding after the divide can leave the norm a few ulp off; renormalize
    scale(v, 1.0 / norm2(v));
    return {std::move(v)};
}

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logistic_prime(double z) {
    const double g = logistic(z);
    return g * (1.0 - g);
}

LossHessian loss_and_hessian(const AffineClassifier& c, const TwoPointData& data) {
    check_pair(c, data);
    const std::size_t d = data.x2_tilde.size();
    const double zb = margin(c, data);

    LossHessian out;
    // -log(1 - g(b)) = softplus(b); -log g(zb) = softplus(-zb)
    out.loss = 0.5 * (softplus(c.b) + softplus(-zb));

    // x1 = e_{d+1}, x2 = (x2_tilde, 1)
    const double a = logistic_prime(c.b);
    const double cc = logistic_prime(zb);
    ParamVector x2(d + 1, 1.0);
    for (std::size_t i = 0; i < d; ++i) x2[i] = data.x2_tilde[i];

    out.hessian.assign((d + 1) * (d + 1), 0.0);
    for (std::size_t i = 0; i <= d; ++i)
        for (std::size_t j = 0; j <= d; ++j)
            out.hessian[i * (d + 1) + j] = 0.5 * cc * x2[i] * x2[j];
    out.hessian[d * (d + 1) + d] += 0.5 * a;
    return out;
}

double loss_and_grad(const AffineClassifier& c, const TwoPointData& data, ParamVector& grad) {
    check_pair(c, data);
    const std::size_t d = data.x2_tilde.size();
    const double zb = margin(c, data);

    // gradient of the average of -log(1-g(<w,x1>)) and -log g(<w,x2>)
    const double r1 = logistic(c.b);        // toward the negative example
    const double r2 = logistic(zb) - 1.0;   // toward the positive example
    grad.assign(d + 1, 0.0);
    for (std::size_t i = 0; i < d; ++i) grad[i] = 0.5 * r2 * data.x2_tilde[i];
    grad[d] = 0.5 * (r1 + r2);
    return 0.5 * (softplus(c.b) + softplus(-zb));
}

double sharpness_closed_form(const AffineClassifier& c, const TwoPointData& data) {
    check_pair(c, data);
    return sharp_zb(dot(c.w_tilde, data.x2_tilde), c.b);
}

AffineClassifier max_margin_params(const TwoPointData& data) {
    return {data.x2_tilde, -0.5};
}

MinSharpness min_sharpness_params(const TwoPointData& data, int grid_resolution) {
    if (grid_resolution < 100)
        throw InvalidArgument("min_sharpness_params: grid resolution must be at least 100");
    const double res = static_cast<double>(grid_resolution);

    // coarse scan of the open box z in (0,1], b in (-z, 0]
    double best_z = 1.0, best_b = 0.0;
    double best = sharp_zb(1.0, 0.0);
    for (int i = 1; i <= grid_resolution; ++i) {
        const double z = static_cast<double>(i) / res;
        for (int j = 0; j < grid_resolution; ++j) {
            const double b = -z * static_cast<double>(j) / res;
            const double v = sharp_zb(z, b);
            if (v < best) {
                best = v;
                best_z = z;
                best_b = b;
            }
        }
    }

    // coordinate-wise golden-section refinement around the grid winner,
    // clamped inside the feasible box (b stays strictly above -z)
    for (int pass = 0; pass < 3; ++pass) {
        const double zlo = std::max(best_z - 1.0 / res, std::max(1.0 / (2.0 * res), -best_b));
        const double zhi = std::min(best_z + 1.0 / res, 1.0);
        best_z = golden_min(zlo, zhi, [&](double z) { return sharp_zb(z, best_b); });
        const double blo = std::max(best_b - best_z / res, -best_z * (1.0 - 1e-9));
        const double bhi = std::min(best_b + best_z / res, 0.0);
        best_b = golden_min(blo, bhi, [&](double b) { return sharp_zb(best_z, b); });
    }
    best = sharp_zb(best_z, best_b);

    MinSharpness out;
    out.z = best_z;
    out.b = best_b;
    out.value = best;
    out.classifier.w_tilde = data.x2_tilde;
    scale(out.classifier.w_tilde, best_z);
    out.classifier.b = best_b;
    return out;
}

GenError expected_gen_error_mc(const AffineClassifier& c, const ParamVector& mu,
                               long n_samples, std::uint64_t seed) {
    if (mu.size() != c.w_tilde.size())
        throw DimensionMismatch("expected_gen_error_mc: mu dimension mismatch");
    if (n_samples < 100)
        throw InvalidArgument("expected_gen_error_mc: need at least 100 samples");

    SplitMix64 rng(seed);
    const std::size_t d = mu.size();
    ParamVector g(d);
    long errors = 0;
    for (long k = 0; k < n_samples; ++k) {
        for (std::size_t i = 0; i < d; ++i) g[i] = mu[i] + rng.next_gaussian();
        const double n = norm2(g);
        // a zero draw has probability zero; count it as the boundary case
        const double s = n > 0.0 ? dot(c.w_tilde, g) / n + c.b : c.b;
        if (s <= 0.0) ++errors;
    }
    GenError out;
    const double n = static_cast<double>(n_samples);
    out.estimate = static_cast<double>(errors) / n;
    out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / n);
    return out;
}

}  // namespace eoslab::logit
