#include "har/nn/optim.hpp"

#include <cmath>
#include <vector>

namespace har::nn {

void sgd_step(std::span<Parameter* const> params, double lr, double momentum) {
    for (Parameter* p : params) {
        double* v = p->value.data();
        double* g = p->grad.data();
        double* m = p->momentum.data();
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            m[i] = momentum * m[i] + g[i];
            v[i] -= lr * m[i];
            g[i] = 0.0;
        }
    }
}

GradCheckReport finite_diff_check(const std::function<double(bool)>& run,
                                  std::span<Parameter* const> params, double h) {
    for (Parameter* p : params) p->zero_grad();
    run(true);

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double fp = run(false);
            p->value[i] = orig - h;
            const double fm = run(false);
            p->value[i] = orig;

            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[pi][i];
            // Near-zero gradients are compared on an absolute scale: the
            // central difference carries ~eps*|f|/h of roundoff even when
            // the true derivative is exactly zero (dead relu paths).
            const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_param = p->name;
                report.worst_index = i;
            }
        }
    }
    for (Parameter* p : params) p->zero_grad();
    return report;
}

} // namespace har::nn
