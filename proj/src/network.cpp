#include "eoslab/network.hpp"

#include <cmath>

#include "eoslab/rng.hpp"

namespace eoslab::network {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw InvalidArgument("unknown activation: " + s);
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::Mse;
    if (s == "ce") return LossKind::Ce;
    throw InvalidArgument("unknown loss: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        default: return "identity";
    }
}

std::string to_string(LossKind k) { return k == LossKind::Mse ? "mse" : "ce"; }

std::size_t MLPSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        n += layer_dims[l + 1] * layer_dims[l] + layer_dims[l + 1];
    return n;
}

std::size_t MLPSpec::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
        off += layer_dims[l + 1] * layer_dims[l] + layer_dims[l + 1];
    return off;
}

std::size_t MLPSpec::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layer_dims[layer + 1] * layer_dims[layer];
}

sharpness::LayerLayout MLPSpec::layout() const {
    sharpness::LayerLayout lay;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        lay.blocks.push_back({layer_dims[l + 1], layer_dims[l], layer_dims[l + 1]});
    return lay;
}

std::string MLPSpec::describe() const {
    std::string s = "mlp ";
    for (std::size_t i = 0; i < layer_dims.size(); ++i) {
        if (i) s += "-";
        s += std::to_string(layer_dims[i]);
    }
    s += " " + to_string(activation) + " " + to_string(loss_kind);
    return s;
}

void validate(const MLPSpec& spec) {
    if (spec.layer_dims.size() < 2) throw InvalidArgument("mlp: need at least 2 layer dims");
    for (std::size_t d : spec.layer_dims)
        if (d == 0) throw InvalidArgument("mlp: zero-width layer");
    if (spec.loss_kind == LossKind::Ce && spec.layer_dims.back() < 2)
        throw InvalidArgument("mlp: ce needs output dim >= 2");
}

void validate_dataset(const MLPSpec& spec, const Dataset& data) {
    if (data.inputs.rows != data.targets.rows)
        throw DimensionMismatch("dataset: input/target row counts differ");
    if (data.inputs.cols != spec.layer_dims.front())
        throw DimensionMismatch("dataset: input dim does not match spec");
    if (data.targets.cols != spec.layer_dims.back())
        throw DimensionMismatch("dataset: target dim does not match spec");
    if (data.has_test()) {
        if (data.test_inputs.rows != data.test_targets.rows)
            throw DimensionMismatch("dataset: test row counts differ");
        if (data.test_inputs.cols != spec.layer_dims.front() ||
            data.test_targets.cols != spec.layer_dims.back())
            throw DimensionMismatch("dataset: test dims do not match spec");
    }
    if (spec.loss_kind == LossKind::Ce) {
        for (std::size_t r = 0; r < data.targets.rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < data.targets.cols; ++c) s += data.targets.at(r, c);
            if (std::abs(s - 1.0) > 1e-9)
                throw InvalidArgument("dataset: ce target rows must sum to 1");
        }
    }
}

ParamVector init_lecun_uniform(const MLPSpec& spec, std::uint64_t seed, double scale) {
    validate(spec);
    SplitMix64 rng(seed);
    ParamVector theta(spec.param_count(), 0.0);
    for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_dims[l]));
        const std::size_t off = spec.weight_offset(l);
        const std::size_t count = spec.layer_dims[l + 1] * spec.layer_dims[l];
        for (std::size_t i = 0; i < count; ++i) {
            double e;
            do {
                e = bound * (2.0 * rng.next_unit() - 1.0);
            } while (std::abs(e) >= bound);  // open interval
            theta[off + i] = scale * e;
        }
    }
    return theta;
}

namespace {

struct ActFuns {
    double (*f)(double);
    double (*d1)(double);
    double (*d2)(double);
};

double relu_f(double z) { return z > 0.0 ? z : 0.0; }
double relu_d1(double z) { return z > 0.0 ? 1.0 : 0.0; }  // subgradient 0 at the kink
double relu_d2(double) { return 0.0; }
double tanh_f(double z) { return std::tanh(z); }
double tanh_d1(double z) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
}
double tanh_d2(double z) {
    const double t = std::tanh(z);
    return -2.0 * t * (1.0 - t * t);
}
double id_f(double z) { return z; }
double id_d1(double) { return 1.0; }
double id_d2(double) { return 0.0; }

ActFuns act_funs(Activation a) {
    switch (a) {
        case Activation::Relu: return {relu_f, relu_d1, relu_d2};
        case Activation::Tanh: return {tanh_f, tanh_d1, tanh_d2};
        default: return {id_f, id_d1, id_d2};
    }
}

// per-layer views into the flat parameter vector
struct LayerView {
    const double* W;
    const double* b;
    std::size_t out_dim, in_dim;
};

std::vector<LayerView> layer_views(const MLPSpec& spec, std::span<const double> theta) {
    if (theta.size() != spec.param_count())
        throw DimensionMismatch("mlp: parameter vector length does not match spec");
    std::vector<LayerView> v;
    for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l)
        v.push_back({theta.data() + spec.weight_offset(l), theta.data() + spec.bias_offset(l),
                     spec.layer_dims[l + 1], spec.layer_dims[l]});
    return v;
}

// z = W a + b
void affine(const LayerView& lv, const double* a, double* z) {
    for (std::size_t i = 0; i < lv.out_dim; ++i) {
        double s = lv.b[i];
        const double* wrow = lv.W + i * lv.in_dim;
        for (std::size_t j = 0; j < lv.in_dim; ++j) s += wrow[j] * a[j];
        z[i] = s;
    }
}

// out += W^T d
void add_wt_times(const LayerView& lv, const double* d, double* out) {
    for (std::size_t i = 0; i < lv.out_dim; ++i) {
        const double* wrow = lv.W + i * lv.in_dim;
        const double di = d[i];
        for (std::size_t j = 0; j < lv.in_dim; ++j) out[j] += wrow[j] * di;
    }
}

double softmax_nll(std::span<const double> logits, std::span<const double> target,
                   std::vector<double>& probs) {
    const std::size_t k = logits.size();
    double m = logits[0];
    for (double z : logits) m = std::max(m, z);
    double sum = 0.0;
    probs.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    const double log_sum = std::log(sum);
    double nll = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        nll -= target[i] * (logits[i] - m - log_sum);
        probs[i] /= sum;
    }
    return nll;
}

struct Workspace {
    // per-layer buffers; index 0 holds the input copy
    std::vector<std::vector<double>> a, z, da, dz, delta, ddelta;

    explicit Workspace(const MLPSpec& spec) {
        const std::size_t L = spec.num_layers();
        a.resize(L + 1);
        z.resize(L + 1);
        da.resize(L + 1);
        dz.resize(L + 1);
        delta.resize(L + 1);
        ddelta.resize(L + 1);
        for (std::size_t l = 0; l <= L; ++l) {
            const std::size_t n = spec.layer_dims[l];
            a[l].resize(n);
            z[l].resize(n);
            da[l].resize(n);
            dz[l].resize(n);
            delta[l].resize(n);
            ddelta[l].resize(n);
        }
    }
};

}  // namespace

double loss_value(const MLPSpec& spec, std::span<const double> theta, const Matrix& X,
                  const Matrix& T) {
    const auto layers = layer_views(spec, theta);
    const ActFuns act = act_funs(spec.activation);
    const std::size_t L = spec.num_layers();
    Workspace ws(spec);
    std::vector<double> probs;

    double total = 0.0;
    for (std::size_t s = 0; s < X.rows; ++s) {
        auto xin = X.row(s);
        std::copy(xin.begin(), xin.end(), ws.a[0].begin());
        for (std::size_t l = 0; l < L; ++l) {
            affine(layers[l], ws.a[l].data(), ws.z[l + 1].data());
            if (l + 1 < L)
                for (std::size_t i = 0; i < ws.z[l + 1].size(); ++i)
                    ws.a[l + 1][i] = act.f(ws.z[l + 1][i]);
            else
                ws.a[L] = ws.z[L];
        }
        if (spec.loss_kind == LossKind::Mse) {
            auto t = T.row(s);
            double e = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double d = ws.a[L][i] - t[i];
                e += d * d;
            }
            total += 0.5 * e;
        } else {
            total += softmax_nll(ws.a[L], T.row(s), probs);
        }
    }
    total /= static_cast<double>(X.rows);
    if (!std::isfinite(total)) throw NumericalOverflow("mlp: non-finite loss");
    return total;
}

double loss_value_and_grad(const MLPSpec& spec, std::span<const double> theta,
                           const Dataset& data, ParamVector& grad) {
    validate_dataset(spec, data);
    const auto layers = layer_views(spec, theta);
    const ActFuns act = act_funs(spec.activation);
    const std::size_t L = spec.num_layers();
    const std::size_t n = data.inputs.rows;
    const double inv_n = 1.0 / static_cast<double>(n);
    Workspace ws(spec);
    std::vector<double> probs;

    grad.assign(theta.size(), 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        auto xin = data.inputs.row(s);
        std::copy(xin.begin(), xin.end(), ws.a[0].begin());
        for (std::size_t l = 0; l < L; ++l) {
            affine(layers[l], ws.a[l].data(), ws.z[l + 1].data());
            if (l + 1 < L)
                for (std::size_t i = 0; i < ws.z[l + 1].size(); ++i)
                    ws.a[l + 1][i] = act.f(ws.z[l + 1][i]);
            else
                ws.a[L] = ws.z[L];
        }

        auto t = data.targets.row(s);
        if (spec.loss_kind == LossKind::Mse) {
            double e = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double d = ws.a[L][i] - t[i];
                e += d * d;
                ws.delta[L][i] = d * inv_n;
            }
            total += 0.5 * e * inv_n;
        } else {
            total += softmax_nll(ws.a[L], t, probs) * inv_n;
            for (std::size_t i = 0; i < t.size(); ++i)
                ws.delta[L][i] = (probs[i] - t[i]) * inv_n;
        }

        for (std::size_t l = L; l-- > 0;) {
            double* gW = grad.data() + spec.weight_offset(l);
            double* gb = grad.data() + spec.bias_offset(l);
            const auto& d = ws.delta[l + 1];
            const auto& ain = ws.a[l];
            for (std::size_t i = 0; i < layers[l].out_dim; ++i) {
                gb[i] += d[i];
                double* grow = gW + i * layers[l].in_dim;
                for (std::size_t j = 0; j < layers[l].in_dim; ++j) grow[j] += d[i] * ain[j];
            }
            if (l > 0) {
                std::fill(ws.delta[l].begin(), ws.delta[l].end(), 0.0);
                add_wt_times(layers[l], d.data(), ws.delta[l].data());
                for (std::size_t j = 0; j < ws.delta[l].size(); ++j)
                    ws.delta[l][j] *= act.d1(ws.z[l][j]);
            }
        }
    }
    if (!std::isfinite(total) || !all_finite(grad))
        throw NumericalOverflow("mlp: non-finite loss or gradient");
    return total;
}

void hessian_vector_product(const MLPSpec& spec, std::span<const double> theta,
                            std::span<const double> v, const Dataset& data,
                            std::span<double> out) {
    validate_dataset(spec, data);
    if (v.size() != theta.size() || out.size() != theta.size())
        throw DimensionMismatch("hvp: vector length does not match spec");
    const auto layers = layer_views(spec, theta);
    const auto vlayers = layer_views(spec, v);  // same layout over the direction
    const ActFuns act = act_funs(spec.activation);
    const std::size_t L = spec.num_layers();
    const std::size_t n = data.inputs.rows;
    const double inv_n = 1.0 / static_cast<double>(n);
    Workspace ws(spec);
    std::vector<double> probs, back, dback;

    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        auto xin = data.inputs.row(s);
        std::copy(xin.begin(), xin.end(), ws.a[0].begin());
        std::fill(ws.da[0].begin(), ws.da[0].end(), 0.0);

        for (std::size_t l = 0; l < L; ++l) {
            affine(layers[l], ws.a[l].data(), ws.z[l + 1].data());
            affine(vlayers[l], ws.a[l].data(), ws.dz[l + 1].data());  // dW a + db
            // + W da
            for (std::size_t i = 0; i < layers[l].out_dim; ++i) {
                const double* wrow = layers[l].W + i * layers[l].in_dim;
                double sdot = 0.0;
                for (std::size_t j = 0; j < layers[l].in_dim; ++j)
                    sdot += wrow[j] * ws.da[l][j];
                ws.dz[l + 1][i] += sdot;
            }
            if (l + 1 < L) {
                for (std::size_t i = 0; i < ws.z[l + 1].size(); ++i) {
                    ws.a[l + 1][i] = act.f(ws.z[l + 1][i]);
                    ws.da[l + 1][i] = act.d1(ws.z[l + 1][i]) * ws.dz[l + 1][i];
                }
            } else {
                ws.a[L] = ws.z[L];
                ws.da[L] = ws.dz[L];
            }
        }

        auto t = data.targets.row(s);
        if (spec.loss_kind == LossKind::Mse) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                ws.delta[L][i] = (ws.a[L][i] - t[i]) * inv_n;
                ws.ddelta[L][i] = ws.da[L][i] * inv_n;
            }
        } else {
            softmax_nll(ws.a[L], t, probs);
            double sdz = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) sdz += probs[i] * ws.dz[L][i];
            for (std::size_t i = 0; i < t.size(); ++i) {
                ws.delta[L][i] = (probs[i] - t[i]) * inv_n;
                ws.ddelta[L][i] = probs[i] * (ws.dz[L][i] - sdz) * inv_n;
            }
        }

        for (std::size_t l = L; l-- > 0;) {
            double* hW = out.data() + spec.weight_offset(l);
            double* hb = out.data() + spec.bias_offset(l);
            const auto& d = ws.delta[l + 1];
            const auto& dd = ws.ddelta[l + 1];
            for (std::size_t i = 0; i < layers[l].out_dim; ++i) {
                hb[i] += dd[i];
                double* hrow = hW + i * layers[l].in_dim;
                for (std::size_t j = 0; j < layers[l].in_dim; ++j)
                    hrow[j] += dd[i] * ws.a[l][j] + d[i] * ws.da[l][j];
            }
            if (l > 0) {
                back.assign(layers[l].in_dim, 0.0);
                dback.assign(layers[l].in_dim, 0.0);
                add_wt_times(layers[l], d.data(), back.data());
                add_wt_times(vlayers[l], d.data(), dback.data());
                add_wt_times(layers[l], dd.data(), dback.data());
                for (std::size_t j = 0; j < layers[l].in_dim; ++j) {
                    const double zj = ws.z[l][j];
                    ws.delta[l][j] = act.d1(zj) * back[j];
                    ws.ddelta[l][j] =
                        act.d2(zj) * ws.dz[l][j] * back[j] + act.d1(zj) * dback[j];
                }
            }
        }
    }
    if (!all_finite(out)) throw NumericalOverflow("mlp: non-finite hessian action");
}

std::vector<double> dense_hessian(const MLPSpec& spec, std::span<const double> theta,
                                  const Dataset& data) {
    const std::size_t p = spec.param_count();
    if (p > 4000) throw InvalidArgument("dense_hessian: parameter count above 4000");
    std::vector<double> H(p * p, 0.0);
    ParamVector e(p, 0.0), col(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        e[j] = 1.0;
        hessian_vector_product(spec, theta, e, data, col);
        for (std::size_t i = 0; i < p; ++i) H[i * p + j] = col[i];
        e[j] = 0.0;
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j) {
            const double m = 0.5 * (H[i * p + j] + H[j * p + i]);
            H[i * p + j] = H[j * p + i] = m;
        }
    return H;
}

}  // namespace eoslab::network
