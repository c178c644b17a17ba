#include "eoslab/model.hpp"

namespace eoslab {

DiagNetModel::DiagNetModel(diagnet::Problem p) : problem_(std::move(p)) {
    diagnet::validate(problem_);
    layout_.blocks.push_back({1, problem_.x.size(), 0});
}

std::string DiagNetModel::describe() const {
    return "diagnet d=" + std::to_string(problem_.x.size()) +
           " depth=" + std::to_string(problem_.depth);
}

double DiagNetModel::loss(std::span<const double> theta) const {
    return diagnet::loss(problem_, theta);
}

double DiagNetModel::loss_and_grad(std::span<const double> theta, ParamVector& grad) const {
    grad = diagnet::gradient(problem_, theta);
    return diagnet::loss(problem_, theta);
}

void DiagNetModel::hessian_vec(std::span<const double> theta, std::span<const double> v,
                               std::span<double> out) const {
    diagnet::hessian_vec(problem_, theta, v, out);
}

sharpness::ParamNorms DiagNetModel::norms(std::span<const double> theta) const {
    return sharpness::param_norms(theta, layout_);
}

MlpModel::MlpModel(network::MLPSpec spec, network::Dataset data)
    : spec_(std::move(spec)), data_(std::move(data)) {
    network::validate(spec_);
    network::validate_dataset(spec_, data_);
    layout_ = spec_.layout();
}

double MlpModel::loss(std::span<const double> theta) const {
    return network::loss_value(spec_, theta, data_.inputs, data_.targets);
}

double MlpModel::loss_and_grad(std::span<const double> theta, ParamVector& grad) const {
    return network::loss_value_and_grad(spec_, theta, data_, grad);
}

void MlpModel::hessian_vec(std::span<const double> theta, std::span<const double> v,
                           std::span<double> out) const {
    network::hessian_vector_product(spec_, theta, v, data_, out);
}

sharpness::ParamNorms MlpModel::norms(std::span<const double> theta) const {
    return sharpness::param_norms(theta, layout_);
}

double MlpModel::test_metric(std::span<const double> theta) const {
    if (!data_.has_test()) return std::numeric_limits<double>::quiet_NaN();
    return network::loss_value(spec_, theta, data_.test_inputs, data_.test_targets);
}

sharpness::SpectralEstimate model_sharpness(const TrainModel& model,
                                            std::span<const double> theta,
                                            std::uint64_t seed,
                                            const std::vector<double>& warm_start) {
    sharpness::SpectralEstimate est;
    if (!model.has_hessian()) {
        est.value = std::numeric_limits<double>::quiet_NaN();
        return est;
    }
    sharpness::PowerIterOptions opts;
    opts.seed = seed;
    opts.initial = warm_start;
    return sharpness::top_abs_eigenvalue(
        [&](std::span<const double> v, std::span<double> out) {
            model.hessian_vec(theta, v, out);
        },
        model.dim(), opts);
}

}  // namespace eoslab
