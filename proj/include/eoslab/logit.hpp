#pragma once

#include <cstdint>
#include <vector>

#include "eoslab/common.hpp"

namespace eoslab::logit {

// Two-point binary classification: the negative example sits at the origin
// and the positive example is a unit feature vector. Appending a constant 1
// to each feature absorbs the bias, so parameters live in d+1 dimensions.
struct TwoPointData {
    ParamVector x2_tilde;  // unit norm within 1e-12
};

TwoPointData make_data(ParamVector x2_tilde);
TwoPointData sample_data(std::size_t d, std::uint64_t seed);

struct AffineClassifier {
    ParamVector w_tilde;
    double b = 0.0;
};

// numerically stable sigmoid and its derivative g' = g (1 - g)
double logistic(double z);
double logistic_prime(double z);

struct LossHessian {
    double loss = 0.0;
    std::vector<double> hessian;  // (d+1) x (d+1) row-major
};

// Average negative log-likelihood of the two points (minimized, so the
// Hessian is positive semidefinite with rank at most 2) and that Hessian.
LossHessian loss_and_hessian(const AffineClassifier& c, const TwoPointData& data);

// same objective with its gradient over (w_tilde, b)
double loss_and_grad(const AffineClassifier& c, const TwoPointData& data, ParamVector& grad);

// Largest Hessian eigenvalue without assembling the matrix. With
// a = g'(b) and c = g'(<w_tilde, x2_tilde> + b):
//   S = (a + 2c + sqrt(a^2 + 4 c^2)) / 4.
double sharpness_closed_form(const AffineClassifier& c, const TwoPointData& data);

// the equal-margin separator (x2_tilde, -1/2), unit weight normalization
AffineClassifier max_margin_params(const TwoPointData& data);

struct MinSharpness {
    AffineClassifier classifier;  // w_tilde = z * x2_tilde
    double z = 0.0;
    double b = 0.0;
    double value = 0.0;
};

// Minimizes the closed-form sharpness over the margin box z in (0,1],
// b in (-z, 0]: coarse grid of grid_resolution points per axis, then
// coordinate-wise golden-section refinement. grid_resolution >= 100.
MinSharpness min_sharpness_params(const TwoPointData& data, int grid_resolution = 200);

struct GenError {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo probability of misclassifying the positive class under the
// sphere-projected Gaussian x = g/||g||, g ~ N(mu, I): the event
// <w_tilde, x> + b <= 0. One sequential stream; deterministic per seed.
GenError expected_gen_error_mc(const AffineClassifier& c, const ParamVector& mu,
                               long n_samples, std::uint64_t seed);

}  // namespace eoslab::logit
