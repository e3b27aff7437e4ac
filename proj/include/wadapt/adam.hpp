#pragma once

#include <cstddef>
#include <vector>

#include "wadapt/autodiff.hpp"

namespace wadapt {

struct AdamOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction over a fixed set of parameters. Reads each
/// parameter's `grad` as filled in by Tape::backward.
class Adam {
   public:
    Adam(std::vector<Parameter*> params, AdamOptions options);

    // Throws TrainingError naming the parameter if any gradient is non-finite;
    // in that case no parameter is modified.
    void step();

    std::size_t step_count() const { return step_count_; }
    const AdamOptions& options() const { return options_; }
    void set_learning_rate(double lr) { options_.learning_rate = lr; }

    const Matrix& first_moment(std::size_t i) const { return first_[i]; }
    const Matrix& second_moment(std::size_t i) const { return second_[i]; }

   private:
    std::vector<Parameter*> params_;
    AdamOptions options_;
    std::size_t step_count_ = 0;
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
};

}  // namespace wadapt
