#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "eoslab/common.hpp"
#include "eoslab/sharpness.hpp"

namespace eoslab::network {

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }
    bool empty() const { return rows == 0; }
};

enum class Activation { Relu, Tanh, Identity };
enum class LossKind { Mse, Ce };

Activation activation_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);
std::string to_string(Activation a);
std::string to_string(LossKind k);

// Fully connected feedforward net. Hidden layers apply the activation, the
// output layer is linear; CE applies softmax inside the loss.
//
// Flat parameter layout, layer-major: for each layer l = 1..L the weight
// matrix W_l (n_l x n_{l-1}, row-major) followed by the bias vector b_l.
struct MLPSpec {
    std::vector<std::size_t> layer_dims;  // input, hidden..., output
    Activation activation = Activation::Tanh;
    LossKind loss_kind = LossKind::Mse;

    std::size_t num_layers() const { return layer_dims.size() - 1; }
    std::size_t param_count() const;
    std::size_t weight_offset(std::size_t layer) const;  // layer in [0, num_layers)
    std::size_t bias_offset(std::size_t layer) const;
    sharpness::LayerLayout layout() const;
    std::string describe() const;  // e.g. "mlp 2-16-16-1 tanh mse"
};

void validate(const MLPSpec& spec);

struct Dataset {
    Matrix inputs;   // n x d_in
    Matrix targets;  // n x d_out, one-hot rows for ce
    Matrix test_inputs;
    Matrix test_targets;

    bool has_test() const { return test_inputs.rows > 0; }
};

void validate_dataset(const MLPSpec& spec, const Dataset& data);

// Weights uniform on (-1/sqrt(n_{l-1}), 1/sqrt(n_{l-1})), exclusive, then
// multiplied by scale; biases zero.
ParamVector init_lecun_uniform(const MLPSpec& spec, std::uint64_t seed, double scale = 1.0);

double loss_value(const MLPSpec& spec, std::span<const double> theta, const Matrix& X,
                  const Matrix& T);

// training-split loss and exact gradient by reverse accumulation
double loss_value_and_grad(const MLPSpec& spec, std::span<const double> theta,
                           const Dataset& data, ParamVector& grad);

// exact Hessian action (forward-over-reverse); linear and symmetric in v
void hessian_vector_product(const MLPSpec& spec, std::span<const double> theta,
                            std::span<const double> v, const Dataset& data,
                            std::span<double> out);

// columns assembled from hessian_vector_product on basis vectors, then
// symmetrized; parameter count capped at 4000
std::vector<double> dense_hessian(const MLPSpec& spec, std::span<const double> theta,
                                  const Dataset& data);

}  // namespace eoslab::network
