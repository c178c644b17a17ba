#include "eoslab/risk.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "eoslab/rng.hpp"
#include "eoslab/sharpness.hpp"

namespace eoslab::risk {

namespace {

void check_model(const DataModel& m) {
    const std::size_t d = m.d();
    if (d == 0) throw InvalidArgument("risk: empty model");
    if (m.sigma.size() != d * d)
        throw DimensionMismatch("risk: sigma must be d x d to match mu");
    if (m.sigma2 < 0.0) throw InvalidArgument("risk: sigma2 must be nonnegative");
}

ParamVector squared(std::span<const double> w) {
    ParamVector u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) u[i] = w[i] * w[i];
    return u;
}

void check_sample(const Sample& s) {
    if (s.x0.empty()) throw InvalidArgument("algorithm input: empty feature vector");
    if (!all_finite(s.x0) || !std::isfinite(s.y0))
        throw InvalidArgument("algorithm input: non-finite sample");
    for (double v : s.x0)
        if (v <= 0.0) throw InvalidArgument("algorithm input: features must be positive");
    if (s.y0 <= 0.0) throw InvalidArgument("algorithm input: label must be positive");
}

ParamVector spike(std::size_t d, std::size_t k, double radius_sq) {
    ParamVector w(d, 0.0);
    w[k] = std::sqrt(radius_sq);
    return w;
}

// applies Sigma^{-1/2} through the eigendecomposition built by make_whitener
struct Whitener {
    std::size_t d = 0;
    std::vector<double> eigenvalues;
    std::vector<double> vectors;  // columns are eigenvectors, row-major d x d

    ParamVector apply(std::span<const double> v) const {
        ParamVector tmp(d, 0.0), out(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < d; ++i) c += vectors[i * d + j] * v[i];
            tmp[j] = c / std::sqrt(eigenvalues[j]);
        }
        for (std::size_t i = 0; i < d; ++i) {
            double c = 0.0;
            for (std::size_t j = 0; j < d; ++j) c += vectors[i * d + j] * tmp[j];
            out[i] = c;
        }
        return out;
    }
};

Whitener make_whitener(const DataModel& m) {
    Whitener w;
    w.d = m.d();
    sharpness::dense_sym_eigen_full(m.sigma, w.d, w.eigenvalues, w.vectors);
    for (double lam : w.eigenvalues)
        if (lam < 1e-12)
            throw SingularModel("alg_opt: second-moment matrix has an eigenvalue below 1e-12");
    return w;
}

struct FoldedDraw {
    ParamVector x;
    double xsum = 0.0;
    double xmin = 0.0;
};

FoldedDraw draw_folded(SplitMix64& rng, std::size_t d) {
    FoldedDraw out;
    out.x.resize(d);
    out.xmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < d; ++i) {
        out.x[i] = std::abs(rng.next_gaussian());
        out.xsum += out.x[i];
        out.xmin = std::min(out.xmin, out.x[i]);
    }
    return out;
}

}  // namespace

NonRealizableWeights::NonRealizableWeights(std::vector<std::size_t> idx,
                                           std::vector<double> vals)
    : Error([&] {
          std::ostringstream os;
          os << "alg_opt: optimal squared weights have negative entries at";
          for (std::size_t i = 0; i < idx.size(); ++i)
              os << " [" << idx[i] << "]=" << vals[i];
          return os.str();
      }()),
      indices(std::move(idx)),
      values(std::move(vals)) {}

double risk(std::span<const double> w, const DataModel& m) {
    check_model(m);
    const std::size_t d = m.d();
    if (w.size() != d) throw DimensionMismatch("risk: weight dimension must match model");
    const ParamVector u = squared(w);
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < d; ++j) row += m.sigma[i * d + j] * u[j];
        quad += u[i] * row;
    }
    return 0.5 * (quad - 2.0 * dot(m.mu, u) + m.sigma2);
}

DataModel isotropic_model(std::size_t d) {
    if (d < 1) throw InvalidArgument("isotropic_model: d must be at least 1");
    DataModel m;
    m.sigma.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) m.sigma[i * d + i] = 1.0;
    m.mu.assign(d, 1.0);
    m.sigma2 = static_cast<double>(d) + 1.0;
    m.sampler = Sampler::None;
    return m;
}

double isotropic_risk_closed_form(std::span<const double> w, std::size_t d) {
    const ParamVector u = squared(w);
    const double r = norm2(u) - 1.0;
    return 0.5 * r * r + 0.5 * static_cast<double>(d);
}

DataModel folded_gaussian_model(std::size_t d) {
    if (d < 1) throw InvalidArgument("folded_gaussian_model: d must be at least 1");
    const double off = 2.0 / std::numbers::pi;
    DataModel m;
    m.sigma.assign(d * d, off);
    for (std::size_t i = 0; i < d; ++i) m.sigma[i * d + i] = 1.0;
    m.mu.assign(d, 1.0 + off * static_cast<double>(d - 1));
    m.sigma2 = static_cast<double>(d) + off * static_cast<double>(d) * static_cast<double>(d - 1);
    m.sampler = Sampler::FoldedSum;
    return m;
}

DataModel folded_gaussian_noise_model(std::size_t d) {
    DataModel m = folded_gaussian_model(d);
    m.sigma2 += 1.0;  // independent unit label noise leaves Sigma and mu alone
    m.sampler = Sampler::FoldedSumNoise;
    return m;
}

ParamVector alg_l1(const Sample& s) {
    check_sample(s);
    std::size_t k = 0;
    for (std::size_t i = 1; i < s.x0.size(); ++i)
        if (s.x0[i] > s.x0[k]) k = i;
    return spike(s.x0.size(), k, s.y0 / s.x0[k]);
}

ParamVector alg_sharp(const Sample& s) {
    check_sample(s);
    std::size_t k = 0;
    for (std::size_t i = 1; i < s.x0.size(); ++i)
        if (s.x0[i] < s.x0[k]) k = i;
    return spike(s.x0.size(), k, s.y0 / s.x0[k]);
}

ParamVector alg_opt(const Sample& s, const DataModel& m) {
    check_model(m);
    const std::size_t d = m.d();
    if (s.x0.size() != d) throw DimensionMismatch("alg_opt: sample dimension must match model");
    if (!all_finite(s.x0) || !std::isfinite(s.y0))
        throw InvalidArgument("alg_opt: non-finite sample");

    const Whitener wh = make_whitener(m);
    const ParamVector xs = wh.apply(s.x0);
    const ParamVector ms = wh.apply(m.mu);
    const double xs_sq = dot(xs, xs);
    if (xs_sq <= 0.0) throw InvalidArgument("alg_opt: anchor features are all zero");

    // stationarity in whitened coordinates: project mu off the constraint
    // direction, then restore the constraint value
    const double coef = (s.y0 - dot(xs, ms)) / xs_sq;
    ParamVector wtilde = ms;
    axpy(coef, xs, wtilde);

    const ParamVector u = wh.apply(wtilde);
    std::vector<std::size_t> bad_idx;
    std::vector<double> bad_val;
    for (std::size_t i = 0; i < d; ++i)
        if (u[i] < 0.0) {
            bad_idx.push_back(i);
            bad_val.push_back(u[i]);
        }
    if (!bad_idx.empty()) throw NonRealizableWeights(std::move(bad_idx), std::move(bad_val));

    ParamVector w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = std::sqrt(u[i]);
    return w;
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::L1: return "l1";
        case Algorithm::Sharp: return "sharp";
        default: return "opt";
    }
}

McResult expected_risk_mc(Algorithm alg, const DataModel& m, long n_samples,
                          std::uint64_t seed) {
    check_model(m);
    if (n_samples < 100) throw InvalidArgument("expected_risk_mc: need at least 100 samples");
    if (m.sampler == Sampler::None)
        throw InvalidArgument("expected_risk_mc: model has no sampler attached");

    SplitMix64 rng(seed);
    McResult out;
    double sum = 0.0, sum_sq = 0.0;
    for (long k = 0; k < n_samples; ++k) {
        const FoldedDraw draw = draw_folded(rng, m.d());
        double y0 = draw.xsum;
        if (m.sampler == Sampler::FoldedSumNoise) y0 += rng.next_gaussian();
        if (y0 <= 0.0) {
            ++out.nonrealizable;  // outside every algorithm's domain
            continue;
        }
        const Sample s{draw.x, y0};
        ParamVector w;
        try {
            switch (alg) {
                case Algorithm::L1: w = alg_l1(s); break;
                case Algorithm::Sharp: w = alg_sharp(s); break;
                default: w = alg_opt(s, m); break;
            }
        } catch (const NonRealizableWeights&) {
            ++out.nonrealizable;
            continue;
        }
        const double r = risk(w, m);
        sum += r;
        sum_sq += r * r;
        ++out.n_used;
    }
    if (out.n_used == 0) throw Error("expected_risk_mc: every draw was nonrealizable");
    const double n = static_cast<double>(out.n_used);
    out.estimate = sum / n;
    if (out.n_used > 1) {
        const double var = std::max(0.0, (sum_sq - n * out.estimate * out.estimate) / (n - 1.0));
        out.std_error = std::sqrt(var / n);
    }
    return out;
}

std::vector<double> divergence_probe(std::size_t d, const std::vector<long>& n_schedule,
                                     std::uint64_t seed) {
    if (d < 2) throw InvalidArgument("divergence_probe: requires d >= 2");
    if (n_schedule.empty()) throw InvalidArgument("divergence_probe: empty schedule");
    for (std::size_t i = 0; i < n_schedule.size(); ++i) {
        if (n_schedule[i] <= 0) throw InvalidArgument("divergence_probe: counts must be positive");
        if (i > 0 && n_schedule[i] <= n_schedule[i - 1])
            throw InvalidArgument("divergence_probe: schedule must be strictly increasing");
    }

    SplitMix64 rng(seed);
    std::vector<double> estimates;
    double sum = 0.0;
    long count = 0;
    for (long target : n_schedule) {
        for (; count < target; ++count) {
            const FoldedDraw draw = draw_folded(rng, d);
            sum += draw.xsum / std::max(draw.xmin, 1e-12);
        }
        estimates.push_back(sum / static_cast<double>(count));
    }
    return estimates;
}

}  // namespace eoslab::risk
