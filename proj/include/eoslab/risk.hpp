#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eoslab/common.hpp"

namespace eoslab::risk {

// The quadratic risk is an expectation over a data distribution; a model
// carries the second-moment data the formula needs plus a sampler tag for
// Monte-Carlo work. Sampler::None marks a purely analytic model.
enum class Sampler {
    None,
    FoldedSum,       // x = |N(0, I_d)|, y = <1, x>
    FoldedSumNoise,  // x = |N(0, I_d)|, y = <1, x> + N(0, 1)
};

struct DataModel {
    std::vector<double> sigma;  // d x d row-major, E(x x^T)
    ParamVector mu;             // E(y x)
    double sigma2 = 0.0;        // E(y^2)
    Sampler sampler = Sampler::None;

    std::size_t d() const { return mu.size(); }
};

struct Sample {
    ParamVector x0;
    double y0 = 0.0;
};

// Thrown by alg_opt when the optimal squared weights have negative entries;
// the offending coordinates are kept so callers can report them.
class NonRealizableWeights : public Error {
public:
    NonRealizableWeights(std::vector<std::size_t> idx, std::vector<double> vals);
    std::vector<std::size_t> indices;
    std::vector<double> values;
};

class SingularModel : public Error {
public:
    explicit SingularModel(const std::string& what) : Error(what) {}
};

// Population risk of the squared-weight predictor:
//   1/2 ((w^2)^T Sigma w^2 - 2 mu^T w^2 + sigma2).
double risk(std::span<const double> w, const DataModel& m);

// Isotropic reference model: Sigma = I, mu = all-ones, sigma2 = d + 1, no
// sampler. The closed form below is exact on this model for 1-sparse w.
DataModel isotropic_model(std::size_t d);

// 1/2 (||w^2||_2 - 1)^2 + d/2. Agrees with risk() under isotropic_model only
// when w^2 is 1-sparse; it is exposed as that documented special case, not as
// a general evaluator.
double isotropic_risk_closed_form(std::span<const double> w, std::size_t d);

// Folded-Gaussian features with the exact noiseless moments:
//   Sigma_ii = 1, Sigma_ij = 2/pi, mu_i = 1 + 2(d-1)/pi,
//   sigma2 = d + 2 d (d-1)/pi.
DataModel folded_gaussian_model(std::size_t d);

// Same features with unit label noise; sigma2 gains the noise variance so the
// analytic risk still equals the sampled loss average.
DataModel folded_gaussian_noise_model(std::size_t d);

// Interpolating solutions for a single anchor point, each the minimizer of a
// different implicit bias over the solution manifold {<x0, w^2> = y0}:
// smallest l1 mass of the squared weights (all mass on the heaviest feature)
// and smallest curvature (all mass on the lightest feature). Ties break to
// the lowest index. Both require x0 > 0 entrywise and y0 > 0.
ParamVector alg_l1(const Sample& s);
ParamVector alg_sharp(const Sample& s);

// Risk minimizer over the manifold, computed exactly from the stationarity
// conditions in whitened coordinates: with x_S = Sigma^{-1/2} x0 and
// mu_S = Sigma^{-1/2} mu, the optimal squared weights are
//   Sigma^{-1/2} ((I - x_S x_S^T/||x_S||^2) mu_S + y0 x_S / ||x_S||^2).
// Negative entries are never clipped; they raise NonRealizableWeights.
// An eigenvalue of Sigma below 1e-12 raises SingularModel.
ParamVector alg_opt(const Sample& s, const DataModel& m);

enum class Algorithm { L1, Sharp, Opt };

std::string to_string(Algorithm a);

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
    long n_used = 0;
    long nonrealizable = 0;  // skipped draws: y0 <= 0, or infeasible alg_opt
};

// Mean and standard error of risk(alg(sample), m) over n_samples fresh draws
// from the model's sampler. One sequential stream per call, so a fixed seed
// reproduces the result bit for bit. Draws the algorithm cannot consume are
// counted in nonrealizable and excluded from the mean.
McResult expected_risk_mc(Algorithm alg, const DataModel& m, long n_samples,
                          std::uint64_t seed);

// Running Monte-Carlo estimates of E[<1,x> / x_min] over folded-Gaussian
// draws, reported at each count of the (strictly increasing) schedule using
// nested prefixes of one stream. x_min is clipped below at 1e-12. The
// expectation diverges for d >= 2, so the sequence should drift upward.
std::vector<double> divergence_probe(std::size_t d, const std::vector<long>& n_schedule,
                                     std::uint64_t seed);

}  // namespace eoslab::risk
