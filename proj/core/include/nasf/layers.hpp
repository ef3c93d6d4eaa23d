#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nasf/rng.hpp"
#include "nasf/tensor.hpp"

namespace nasf {

enum class LayerType {
    Conv2d,
    Dense,
    ReLU,
    Flatten,
    SoftmaxCrossEntropy,
};

std::string layer_type_name(LayerType type);
LayerType layer_type_from_name(const std::string& name);

/// Layer vocabulary. Conv2d always uses "same" zero padding with stride 1;
/// Dense and Conv2d may leave their input size 0, which means "infer from
/// the incoming shape at compile time".
struct LayerKind {
    LayerType type = LayerType::ReLU;
    int in_channels = 0;   // Conv2d
    int out_channels = 0;  // Conv2d
    int kernel = 0;        // Conv2d
    int in_features = 0;   // Dense
    int out_features = 0;  // Dense

    static LayerKind conv2d(int in_channels, int out_channels, int kernel);
    static LayerKind dense(int in_features, int out_features);
    static LayerKind relu();
    static LayerKind flatten();
    static LayerKind softmax_cross_entropy();

    bool has_parameters() const {
        return type == LayerType::Conv2d || type == LayerType::Dense;
    }

    bool operator==(const LayerKind&) const = default;
};

/// Parameters and gradient buffers of one layer. Parameterless layers hold
/// empty tensors. Gradient shapes always mirror parameter shapes; backward
/// passes accumulate into the gradient buffers and sgd_step zeroes them.
struct LayerState {
    Tensor weights;
    Tensor biases;
    Tensor weight_gradients;
    Tensor bias_gradients;

    std::size_t parameter_count() const {
        return weights.size() + biases.size();
    }
    void zero_gradients();
};

/// Initializes weights uniformly in [-sqrt(1/fan_in), +sqrt(1/fan_in)] with
/// one draw per element in row-major order; biases start at zero. The kind
/// must be fully resolved (no zero input sizes).
LayerState make_layer_state(const LayerKind& kind, Rng& rng);

/// Same-padding convolution, stride 1. Padding is asymmetric for even
/// kernels: (k-1)/2 on the top/left, the remainder on the bottom/right, so
/// output spatial dims always equal input spatial dims, for any kernel size.
/// input [N,C,H,W] -> output [N,out_channels,H,W].
Tensor conv2d_forward(const Tensor& input, const LayerState& state, int kernel);

/// Accumulates weight/bias gradients into `state` and returns the gradient
/// with respect to the forward input.
Tensor conv2d_backward(const Tensor& upstream_grad, const Tensor& cached_input,
                       LayerState& state, int kernel);

/// input [N,F] -> output [N,out_features]; output = input * W^T + bias.
Tensor dense_forward(const Tensor& input, const LayerState& state);

Tensor dense_backward(const Tensor& upstream_grad, const Tensor& cached_input,
                      LayerState& state);

Tensor relu_forward(const Tensor& input);

/// Masks the upstream gradient where the forward input was <= 0.
Tensor relu_backward(const Tensor& upstream_grad, const Tensor& cached_input);

struct SoftmaxCrossEntropyResult {
    double loss = 0.0;        // mean over the batch
    Tensor logit_gradient;    // (softmax - onehot) / N
};

/// Numerically stable softmax cross entropy over logits [N,C] with integer
/// labels in [0, C).
SoftmaxCrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                                const std::vector<int>& labels);

/// Plain SGD: p <- p - learning_rate * grad(p) for every parameter of every
/// state, then all gradients are zeroed.
void sgd_step(std::vector<LayerState*>& states, double learning_rate);

} // namespace nasf
