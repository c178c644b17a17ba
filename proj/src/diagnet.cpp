#include "eoslab/diagnet.hpp"

#include <algorithm>
#include <cmath>

namespace eoslab::diagnet {

namespace {

void require_dim(const Problem& p, std::span<const double> w) {
    if (w.size() != p.x.size()) throw DimensionMismatch("diagnet: weight/feature dim mismatch");
}

void require_depth2(const Problem& p, const char* op) {
    if (p.depth != 2) throw InvalidArgument(std::string(op) + ": defined for depth 2 only");
}

void require_nonzero_features(const Problem& p, const char* op) {
    for (double xi : p.x)
        if (xi == 0.0)
            throw InvalidArgument(std::string(op) +
                                  ": zero feature entry; drop that coordinate first");
}

void require_positive_problem(const Problem& p, const char* op) {
    for (double xi : p.x)
        if (xi <= 0.0) throw InvalidArgument(std::string(op) + ": requires x > 0 entrywise");
    if (p.y <= 0.0) throw InvalidArgument(std::string(op) + ": requires y > 0");
}

}  // namespace

void validate(const Problem& p) {
    if (p.x.empty()) throw InvalidArgument("diagnet: empty feature vector");
    if (p.depth < 2) throw InvalidArgument("diagnet: depth must be >= 2");
    if (!all_finite(p.x) || !std::isfinite(p.y))
        throw InvalidArgument("diagnet: non-finite problem data");
}

double predict(const Problem& p, std::span<const double> w, std::span<const double> z) {
    require_dim(p, w);
    if (z.size() != w.size()) throw DimensionMismatch("predict: data dim mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double wp = 1.0;
        for (int k = 0; k < p.depth; ++k) wp *= w[i];
        s += wp * z[i];
    }
    return s;
}

double residual(const Problem& p, std::span<const double> w) {
    require_dim(p, w);
    return predict(p, w, p.x) - p.y;
}

double loss(const Problem& p, std::span<const double> w) {
    const double r = residual(p, w);
    return 0.5 * r * r;
}

ParamVector gradient(const Problem& p, std::span<const double> w) {
    const double r = residual(p, w);
    ParamVector g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double wp = 1.0;
        for (int k = 0; k < p.depth - 1; ++k) wp *= w[i];
        g[i] = p.depth * r * p.x[i] * wp;
    }
    return g;
}

std::vector<double> hessian(const Problem& p, std::span<const double> w) {
    require_depth2(p, "hessian");
    require_dim(p, w);
    const double r = residual(p, w);
    const std::size_t d = w.size();
    std::vector<double> h(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        h[i * d + i] = 2.0 * r * p.x[i];
        for (std::size_t j = 0; j < d; ++j)
            h[i * d + j] += 4.0 * (p.x[i] * w[i]) * (p.x[j] * w[j]);
    }
    return h;
}

void hessian_vec(const Problem& p, std::span<const double> w, std::span<const double> v,
                 std::span<double> out) {
    require_depth2(p, "hessian_vec");
    require_dim(p, w);
    if (v.size() != w.size() || out.size() != w.size())
        throw DimensionMismatch("hessian_vec: dim mismatch");
    const double r = residual(p, w);
    double xwv = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) xwv += p.x[i] * w[i] * v[i];
    for (std::size_t i = 0; i < w.size(); ++i)
        out[i] = 2.0 * r * p.x[i] * v[i] + 4.0 * xwv * p.x[i] * w[i];
}

double sharpness_closed_form(const Problem& p, std::span<const double> w,
                             double tol_manifold) {
    require_depth2(p, "sharpness_closed_form");
    if (loss(p, w) > tol_manifold)
        throw InvalidArgument("sharpness_closed_form: w not on the manifold");
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double xw = p.x[i] * w[i];
        s += xw * xw;
    }
    return 4.0 * s;
}

namespace {

MinimizerSet extreme_set(const Problem& p, bool take_max) {
    const char* op = take_max ? "l1_minimizer_set" : "sharpness_minimizer_set";
    require_depth2(p, op);
    require_positive_problem(p, op);
    const double ext = take_max ? *std::max_element(p.x.begin(), p.x.end())
                                : *std::min_element(p.x.begin(), p.x.end());
    MinimizerSet set;
    for (std::size_t i = 0; i < p.x.size(); ++i)
        if (p.x[i] == ext) set.support.push_back(i);
    set.radius_sq = p.y / ext;
    set.canonical.assign(p.x.size(), 0.0);
    set.canonical[set.support.front()] = std::sqrt(set.radius_sq);
    return set;
}

}  // namespace

MinimizerSet l1_minimizer_set(const Problem& p) {
    MinimizerSet set = extreme_set(p, true);
    set.objective_value = set.radius_sq;  // ||w^(.2)||_1 = ||w||_2^2
    return set;
}

MinimizerSet sharpness_minimizer_set(const Problem& p) {
    MinimizerSet set = extreme_set(p, false);
    const double x_min = p.x[set.support.front()];
    set.objective_value = 4.0 * p.y * x_min;
    return set;
}

namespace {

// normal direction x . w^(.L-1)
ParamVector normal_direction(const Problem& p, std::span<const double> w) {
    ParamVector n(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double wp = 1.0;
        for (int k = 0; k < p.depth - 1; ++k) wp *= w[i];
        n[i] = p.x[i] * wp;
    }
    return n;
}

ParamVector euclidean_objective_grad(const Problem& p, std::span<const double> w,
                                     ManifoldObjective objective) {
    ParamVector g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        g[i] = (objective == ManifoldObjective::L1) ? w[i] : p.x[i] * p.x[i] * w[i];
    return g;
}

}  // namespace

ParamVector tangent_project(const Problem& p, std::span<const double> w,
                            std::span<const double> v) {
    require_dim(p, w);
    if (v.size() != w.size()) throw DimensionMismatch("tangent_project: dim mismatch");
    require_nonzero_features(p, "tangent_project");
    const ParamVector n = normal_direction(p, w);
    const double nn = dot(n, n);
    if (nn == 0.0) throw InvalidArgument("tangent_project: normal undefined at w = 0");
    ParamVector out(v.begin(), v.end());
    axpy(-dot(v, n) / nn, n, out);
    return out;
}

ParamVector riemannian_grad(const Problem& p, std::span<const double> w,
                            ManifoldObjective objective) {
    require_depth2(p, "riemannian_grad");
    return tangent_project(p, w, euclidean_objective_grad(p, w, objective));
}

double riemannian_hess_quadform(const Problem& p, std::span<const double> w,
                                std::span<const double> u, ManifoldObjective objective) {
    require_depth2(p, "riemannian_hess_quadform");
    require_dim(p, w);
    if (u.size() != w.size()) throw DimensionMismatch("riemannian_hess_quadform: dim mismatch");

    const ParamVector rg = riemannian_grad(p, w, objective);
    const ParamVector eg = euclidean_objective_grad(p, w, objective);
    if (norm2(rg) > 1e-8 * std::max(1.0, norm2(eg)))
        throw InvalidArgument("riemannian_hess_quadform: w is not a critical point");

    const ParamVector n = normal_direction(p, w);
    if (std::abs(dot(u, n)) > 1e-8 * std::max(1e-300, norm2(u) * norm2(n)))
        throw InvalidArgument("riemannian_hess_quadform: u is not tangent");

    // common feature value on the support, read at the heaviest coordinate
    std::size_t k = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (std::abs(w[i]) > std::abs(w[k])) k = i;
    const double x0 = p.x[k];
    if (x0 == 0.0) throw InvalidArgument("riemannian_hess_quadform: zero feature on support");

    double q = 0.0;
    if (objective == ManifoldObjective::L1) {
        for (std::size_t i = 0; i < u.size(); ++i)
            q += u[i] * u[i] * (1.0 - p.x[i] / x0);
    } else {
        for (std::size_t i = 0; i < u.size(); ++i)
            q += u[i] * u[i] * (p.x[i] * p.x[i] - x0 * p.x[i]);
    }
    return q;
}

ParamVector sample_manifold_point(const Problem& p, SplitMix64& rng) {
    require_depth2(p, "sample_manifold_point");
    require_positive_problem(p, "sample_manifold_point");
    const std::size_t d = p.x.size();
    ParamVector w(d);
    for (int tries = 0; tries < 10000; ++tries) {
        const std::size_t k = static_cast<std::size_t>(rng.next_u64() % d);
        double partial = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            if (i == k) continue;
            const double bound = std::sqrt(p.y / p.x[i]);
            w[i] = rng.next_uniform(-bound, bound);
            partial += p.x[i] * w[i] * w[i];
        }
        const double rest = p.y - partial;
        if (rest < 0.0) continue;
        const double mag = std::sqrt(rest / p.x[k]);
        w[k] = (rng.next_u64() & 1ull) ? mag : -mag;
        return w;
    }
    throw Error("sample_manifold_point: rejection sampling failed");
}

}  // namespace eoslab::diagnet
