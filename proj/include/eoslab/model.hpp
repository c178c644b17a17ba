#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>

#include "eoslab/common.hpp"
#include "eoslab/diagnet.hpp"
#include "eoslab/network.hpp"
#include "eoslab/sharpness.hpp"

namespace eoslab {

// Differentiable training objective plus the instrumentation hooks the
// optimizers record (sharpness via Hessian action, parameter norms).
class TrainModel {
public:
    virtual ~TrainModel() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string describe() const = 0;
    virtual double loss(std::span<const double> theta) const = 0;
    virtual double loss_and_grad(std::span<const double> theta, ParamVector& grad) const = 0;
    virtual bool has_hessian() const { return true; }
    virtual void hessian_vec(std::span<const double> theta, std::span<const double> v,
                             std::span<double> out) const = 0;
    virtual sharpness::ParamNorms norms(std::span<const double> theta) const = 0;
    // held-out metric; NaN when the model has no test split
    virtual double test_metric(std::span<const double>) const {
        return std::numeric_limits<double>::quiet_NaN();
    }
};

class DiagNetModel final : public TrainModel {
public:
    explicit DiagNetModel(diagnet::Problem p);

    std::size_t dim() const override { return problem_.x.size(); }
    std::string describe() const override;
    double loss(std::span<const double> theta) const override;
    double loss_and_grad(std::span<const double> theta, ParamVector& grad) const override;
    bool has_hessian() const override { return problem_.depth == 2; }
    void hessian_vec(std::span<const double> theta, std::span<const double> v,
                     std::span<double> out) const override;
    sharpness::ParamNorms norms(std::span<const double> theta) const override;

    const diagnet::Problem& problem() const { return problem_; }

private:
    diagnet::Problem problem_;
    sharpness::LayerLayout layout_;  // single 1 x d weight matrix, no biases
};

class MlpModel final : public TrainModel {
public:
    MlpModel(network::MLPSpec spec, network::Dataset data);

    std::size_t dim() const override { return spec_.param_count(); }
    std::string describe() const override { return spec_.describe(); }
    double loss(std::span<const double> theta) const override;
    double loss_and_grad(std::span<const double> theta, ParamVector& grad) const override;
    void hessian_vec(std::span<const double> theta, std::span<const double> v,
                     std::span<double> out) const override;
    sharpness::ParamNorms norms(std::span<const double> theta) const override;
    double test_metric(std::span<const double> theta) const override;

    const network::MLPSpec& spec() const { return spec_; }
    const network::Dataset& data() const { return data_; }

private:
    network::MLPSpec spec_;
    network::Dataset data_;
    sharpness::LayerLayout layout_;
};

// Largest-|lambda| Hessian eigenvalue of the model at theta. NaN when the
// model exposes no Hessian action (deep diagnets).
sharpness::SpectralEstimate model_sharpness(const TrainModel& model,
                                            std::span<const double> theta,
                                            std::uint64_t seed,
                                            const std::vector<double>& warm_start = {});

}  // namespace eoslab
