#include "wadapt/adam.hpp"

#include <cmath>

#include "wadapt/errors.hpp"

namespace wadapt {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    first_.reserve(params_.size());
    second_.reserve(params_.size());
    for (const Parameter* p : params_) {
        first_.emplace_back(p->value.rows(), p->value.cols());
        second_.emplace_back(p->value.rows(), p->value.cols());
    }
}

void Adam::step() {
    for (const Parameter* p : params_) {
        if (!p->grad.same_shape(p->value)) {
            throw DimensionError("adam: gradient of '" + p->name + "' has shape " +
                                 p->grad.shape_string() + ", parameter is " +
                                 p->value.shape_string());
        }
        if (!p->grad.all_finite()) {
            throw TrainingError("adam: non-finite gradient for parameter '" + p->name + "'");
        }
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& w = params_[k]->value.data();
        const auto& g = params_[k]->grad.data();
        auto& m = first_[k].data();
        auto& v = second_[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
        }
    }
}

}  // namespace wadapt
