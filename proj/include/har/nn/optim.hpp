#pragma once

#include <functional>
#include <span>
#include <string>

#include "har/nn/tensor.hpp"

namespace har::nn {

// Momentum SGD: buf <- momentum*buf + grad; value <- value - lr*buf.
// Gradients are zeroed afterwards.
void sgd_step(std::span<Parameter* const> params, double lr, double momentum);

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

// Compares analytic gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h for every element of every parameter.
//
// `run(true)` must execute forward + backward (gradients accumulate into
// the parameters) and return the loss; `run(false)` is forward-only. The
// forward pass must be deterministic.
GradCheckReport finite_diff_check(const std::function<double(bool)>& run,
                                  std::span<Parameter* const> params, double h = 1e-5);

} // namespace har::nn
