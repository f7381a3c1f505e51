#pragma once

#include <functional>
#include <span>
#include <vector>

#include "har/nn/tensor.hpp"

namespace har::nn {

enum class Mode { Train, Infer };
enum class Activation { None, Relu, Tanh };

// Per-side zero padding for 2D convolution.
struct Padding2d {
    std::size_t top = 0, bottom = 0, left = 0, right = 0;

    // Padding that keeps the spatial size unchanged for an odd PxQ kernel
    // at stride 1.
    static Padding2d same(std::size_t kernel_h, std::size_t kernel_w) {
        Padding2d p;
        p.top = (kernel_h - 1) / 2;
        p.bottom = kernel_h - 1 - p.top;
        p.left = (kernel_w - 1) / 2;
        p.right = kernel_w - 1 - p.left;
        return p;
    }
};

// Running statistics of a batch-normalized feature channel, updated in
// train mode and consumed in infer mode.
struct BatchNormState {
    Tensor mean; // per channel
    Tensor var;  // per channel, starts at 1

    explicit BatchNormState(std::size_t channels = 0)
        : mean(Shape{channels}), var(Tensor::full(Shape{channels}, 1.0)) {}
};

// Records every executed op with the inputs saved for its backward pass.
// backward() replays the record in exact reverse execution order; at
// fan-out the incoming gradients accumulate additively.
class Tape {
public:
    using ValueId = std::size_t;
    static constexpr ValueId kInvalid = static_cast<ValueId>(-1);

    // Leaf holding a plain value. Its gradient is retained and can be read
    // back after backward() (used by the activation-map visualizer).
    ValueId input(Tensor v);

    // Leaf bound to a Parameter: backward adds the node gradient into
    // p.grad. Repeated registration of the same parameter (weight sharing)
    // accumulates correctly because each leaf adds its own contribution.
    ValueId param(Parameter& p);

    // 2D cross-correlation over [N,Cin,H,W] with kernels [Cout,Cin,P,Q]
    // plus per-output-channel bias [Cout], stride 1.
    ValueId conv2d(ValueId x, ValueId kernels, ValueId bias, Padding2d pad);

    // Normalizes per feature channel (axis 1); reduces over all other axes.
    // Train mode uses batch statistics (population variance, eps 1e-5) and
    // updates `state` with momentum 0.9; infer mode uses `state`.
    ValueId batch_norm(ValueId x, ValueId gamma, ValueId beta, BatchNormState& state, Mode mode);

    ValueId relu(ValueId x);
    ValueId tanh(ValueId x);

    // 2x2 max pooling with stride 2; a spatial dim of size 1 is pooled
    // with window 1 so degenerate inputs survive. Ties take the first max.
    ValueId max_pool2x2(ValueId x);

    // Concatenate [N,Ci,H,W] tensors along the channel axis.
    ValueId concat_channels(std::span<const ValueId> xs);

    ValueId reshape(ValueId x, Shape new_shape);

    // y = g(x W^T + b); x [N,K], w [J,K], b [J].
    ValueId dense(ValueId x, ValueId w, ValueId b, Activation act);

    // Row-wise softmax of [N,M], computed with max subtraction.
    ValueId softmax_rows(ValueId x);

    // y[n,s] = sum_l F[n,s,l] * w[l];  F [N,S,L], w [L] -> [N,S].
    ValueId rows_dot(ValueId f, ValueId w);

    // out[n,s,l] = F[n,s,l] * a[n,s];  broadcasted row scaling.
    ValueId row_scale(ValueId f, ValueId a);

    // Stack S tensors of shape [N,L] into [N,S,L].
    ValueId stack_rows(std::span<const ValueId> xs);

    ValueId add(ValueId a, ValueId b);
    ValueId scale(ValueId x, double c);

    // Scalar view of one entry of a [N,M] tensor (class-score probe).
    ValueId select(ValueId x, std::size_t row, std::size_t col);

    // Mean over the batch of -log p[n, label_n], plus lambda * sum of
    // squared values over parameters flagged weight_decay. The penalty
    // gradient (2*lambda*theta) is written straight into each parameter.
    ValueId cross_entropy_l2(ValueId probs, const std::vector<int>& labels,
                             std::span<Parameter* const> params, double lambda);

    const Tensor& value(ValueId id) const { return nodes_[id].value; }
    const Tensor& grad(ValueId id) const { return nodes_[id].grad; }

    // Seeds d(root)/d(root) = 1 and propagates to every node and parameter
    // recorded before `root`. Root must be scalar.
    void backward(ValueId root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad; // allocated by backward()
        std::function<void(Tape&)> back;
    };

    ValueId push(Tensor value, std::function<void(Tape&)> back = nullptr);
    Tensor& grad_mut(ValueId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

} // namespace har::nn
