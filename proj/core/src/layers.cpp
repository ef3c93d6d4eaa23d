#include "nasf/layers.hpp"

#include <algorithm>
#include <cmath>

#include "nasf/errors.hpp"

namespace nasf {

std::string layer_type_name(LayerType type) {
    switch (type) {
        case LayerType::Conv2d: return "conv2d";
        case LayerType::Dense: return "dense";
        case LayerType::ReLU: return "relu";
        case LayerType::Flatten: return "flatten";
        case LayerType::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    }
    throw UsageError("unknown layer type");
}

LayerType layer_type_from_name(const std::string& name) {
    if (name == "conv2d") return LayerType::Conv2d;
    if (name == "dense") return LayerType::Dense;
    if (name == "relu") return LayerType::ReLU;
    if (name == "flatten") return LayerType::Flatten;
    if (name == "softmax_cross_entropy") return LayerType::SoftmaxCrossEntropy;
    throw DeclarationError("unknown layer kind \"" + name + "\"");
}

LayerKind LayerKind::conv2d(int in_channels, int out_channels, int kernel) {
    if (kernel < 1 || out_channels < 1 || in_channels < 0) {
        throw DeclarationError("conv2d requires kernel >= 1 and out_channels >= 1");
    }
    LayerKind k;
    k.type = LayerType::Conv2d;
    k.in_channels = in_channels;
    k.out_channels = out_channels;
    k.kernel = kernel;
    return k;
}

LayerKind LayerKind::dense(int in_features, int out_features) {
    if (out_features < 1 || in_features < 0) {
        throw DeclarationError("dense requires out_features >= 1");
    }
    LayerKind k;
    k.type = LayerType::Dense;
    k.in_features = in_features;
    k.out_features = out_features;
    return k;
}

LayerKind LayerKind::relu() {
    LayerKind k;
    k.type = LayerType::ReLU;
    return k;
}

LayerKind LayerKind::flatten() {
    LayerKind k;
    k.type = LayerType::Flatten;
    return k;
}

LayerKind LayerKind::softmax_cross_entropy() {
    LayerKind k;
    k.type = LayerType::SoftmaxCrossEntropy;
    return k;
}

void LayerState::zero_gradients() {
    weight_gradients.fill(0.0);
    bias_gradients.fill(0.0);
}

LayerState make_layer_state(const LayerKind& kind, Rng& rng) {
    LayerState state;
    if (kind.type == LayerType::Conv2d) {
        if (kind.in_channels < 1) {
            throw CompileError("conv2d in_channels unresolved");
        }
        const int fan_in = kind.in_channels * kind.kernel * kind.kernel;
        const double bound = std::sqrt(1.0 / fan_in);
        state.weights = Tensor({kind.out_channels, kind.in_channels,
                                kind.kernel, kind.kernel});
        for (std::size_t i = 0; i < state.weights.size(); ++i) {
            state.weights[i] = rng.uniform_real(-bound, bound);
        }
        state.biases = Tensor({kind.out_channels});
        state.weight_gradients = Tensor(state.weights.shape());
        state.bias_gradients = Tensor(state.biases.shape());
    } else if (kind.type == LayerType::Dense) {
        if (kind.in_features < 1) {
            throw CompileError("dense in_features unresolved");
        }
        const double bound = std::sqrt(1.0 / kind.in_features);
        state.weights = Tensor({kind.out_features, kind.in_features});
        for (std::size_t i = 0; i < state.weights.size(); ++i) {
            state.weights[i] = rng.uniform_real(-bound, bound);
        }
        state.biases = Tensor({kind.out_features});
        state.weight_gradients = Tensor(state.weights.shape());
        state.bias_gradients = Tensor(state.biases.shape());
    }
    return state;
}

namespace {

void check_conv_input(const Tensor& input, const LayerState& state, int kernel) {
    if (input.rank() != 4) {
        throw ShapeError("conv2d expects a rank-4 input [N,C,H,W], got " +
                         input.shape_str());
    }
    if (state.weights.rank() != 4) {
        throw UsageError("conv2d state has no initialized weights");
    }
    if (state.weights.dim(2) != kernel || state.weights.dim(3) != kernel) {
        throw ShapeError("conv2d kernel argument " + std::to_string(kernel) +
                         " does not match weight shape " + state.weights.shape_str());
    }
    if (input.dim(1) != state.weights.dim(1)) {
        throw ShapeError("conv2d input has " + std::to_string(input.dim(1)) +
                         " channels but weights expect " +
                         std::to_string(state.weights.dim(1)));
    }
}

} // namespace

Tensor conv2d_forward(const Tensor& input, const LayerState& state, int kernel) {
    check_conv_input(input, state, kernel);
    const int n_batch = input.dim(0);
    const int channels = input.dim(1);
    const int height = input.dim(2);
    const int width = input.dim(3);
    const int out_channels = state.weights.dim(0);
    const int pad_top = (kernel - 1) / 2;
    const int pad_left = pad_top;

    Tensor output({n_batch, out_channels, height, width});

    // Kernel positions that land entirely in the zero padding are skipped,
    // so cost scales with min(kernel, spatial) rather than kernel^2.
    const int dx_lo = std::max(0, pad_left - (width - 1));
    const int dx_hi = std::min(kernel, pad_left + width);

    for (int n = 0; n < n_batch; ++n) {
        for (int o = 0; o < out_channels; ++o) {
            const double bias = state.biases[o];
            for (int y = 0; y < height; ++y) {
                double* out_row = &output.at(n, o, y, 0);
                for (int x = 0; x < width; ++x) {
                    out_row[x] = bias;
                }
                const int dy_lo = std::max(0, pad_top - y);
                const int dy_hi = std::min(kernel, pad_top - y + height);
                for (int c = 0; c < channels; ++c) {
                    for (int dy = dy_lo; dy < dy_hi; ++dy) {
                        const int iy = y + dy - pad_top;
                        const double* in_row = &input.at(n, c, iy, 0);
                        const double* w_row = &state.weights.at(o, c, dy, 0);
                        for (int dx = dx_lo; dx < dx_hi; ++dx) {
                            const double w = w_row[dx];
                            const int x_lo = std::max(0, pad_left - dx);
                            const int x_hi = std::min(width, width + pad_left - dx);
                            const int shift = dx - pad_left;
                            for (int x = x_lo; x < x_hi; ++x) {
                                out_row[x] += w * in_row[x + shift];
                            }
                        }
                    }
                }
            }
        }
    }
    return output;
}

Tensor conv2d_backward(const Tensor& upstream_grad, const Tensor& cached_input,
                       LayerState& state, int kernel) {
    check_conv_input(cached_input, state, kernel);
    const int n_batch = cached_input.dim(0);
    const int channels = cached_input.dim(1);
    const int height = cached_input.dim(2);
    const int width = cached_input.dim(3);
    const int out_channels = state.weights.dim(0);
    if (upstream_grad.shape() !=
        std::vector<int>{n_batch, out_channels, height, width}) {
        throw ShapeError("conv2d upstream gradient shape " +
                         upstream_grad.shape_str() + " does not match output");
    }
    const int pad_top = (kernel - 1) / 2;
    const int pad_left = pad_top;
    const int dx_lo = std::max(0, pad_left - (width - 1));
    const int dx_hi = std::min(kernel, pad_left + width);

    Tensor input_grad(cached_input.shape());

    for (int n = 0; n < n_batch; ++n) {
        for (int o = 0; o < out_channels; ++o) {
            double bias_sum = 0.0;
            for (int y = 0; y < height; ++y) {
                const double* up_row = &upstream_grad.at(n, o, y, 0);
                for (int x = 0; x < width; ++x) {
                    bias_sum += up_row[x];
                }
                const int dy_lo = std::max(0, pad_top - y);
                const int dy_hi = std::min(kernel, pad_top - y + height);
                for (int c = 0; c < channels; ++c) {
                    for (int dy = dy_lo; dy < dy_hi; ++dy) {
                        const int iy = y + dy - pad_top;
                        const double* in_row = &cached_input.at(n, c, iy, 0);
                        double* ig_row = &input_grad.at(n, c, iy, 0);
                        const double* w_row = &state.weights.at(o, c, dy, 0);
                        double* wg_row = &state.weight_gradients.at(o, c, dy, 0);
                        for (int dx = dx_lo; dx < dx_hi; ++dx) {
                            const double w = w_row[dx];
                            const int x_lo = std::max(0, pad_left - dx);
                            const int x_hi = std::min(width, width + pad_left - dx);
                            const int shift = dx - pad_left;
                            double wg = 0.0;
                            for (int x = x_lo; x < x_hi; ++x) {
                                ig_row[x + shift] += up_row[x] * w;
                                wg += up_row[x] * in_row[x + shift];
                            }
                            wg_row[dx] += wg;
                        }
                    }
                }
            }
            state.bias_gradients[o] += bias_sum;
        }
    }
    return input_grad;
}

Tensor dense_forward(const Tensor& input, const LayerState& state) {
    if (input.rank() != 2) {
        throw ShapeError("dense expects a rank-2 input [N,F], got " +
                         input.shape_str());
    }
    if (state.weights.rank() != 2) {
        throw UsageError("dense state has no initialized weights");
    }
    const int n_batch = input.dim(0);
    const int in_features = input.dim(1);
    const int out_features = state.weights.dim(0);
    if (in_features != state.weights.dim(1)) {
        throw ShapeError("dense input has " + std::to_string(in_features) +
                         " features but weights expect " +
                         std::to_string(state.weights.dim(1)));
    }

    Tensor output({n_batch, out_features});
    for (int n = 0; n < n_batch; ++n) {
        const double* in_row = &input.at(n, 0);
        double* out_row = &output.at(n, 0);
        for (int j = 0; j < out_features; ++j) {
            const double* w_row = &state.weights.at(j, 0);
            double acc = state.biases[j];
            for (int i = 0; i < in_features; ++i) {
                acc += in_row[i] * w_row[i];
            }
            out_row[j] = acc;
        }
    }
    return output;
}

Tensor dense_backward(const Tensor& upstream_grad, const Tensor& cached_input,
                      LayerState& state) {
    const int n_batch = cached_input.dim(0);
    const int in_features = cached_input.dim(1);
    const int out_features = state.weights.dim(0);
    if (upstream_grad.shape() != std::vector<int>{n_batch, out_features}) {
        throw ShapeError("dense upstream gradient shape " +
                         upstream_grad.shape_str() + " does not match output");
    }

    Tensor input_grad(cached_input.shape());
    for (int n = 0; n < n_batch; ++n) {
        const double* up_row = &upstream_grad.at(n, 0);
        const double* in_row = &cached_input.at(n, 0);
        double* ig_row = &input_grad.at(n, 0);
        for (int j = 0; j < out_features; ++j) {
            const double up = up_row[j];
            const double* w_row = &state.weights.at(j, 0);
            double* wg_row = &state.weight_gradients.at(j, 0);
            for (int i = 0; i < in_features; ++i) {
                ig_row[i] += up * w_row[i];
                wg_row[i] += up * in_row[i];
            }
            state.bias_gradients[j] += up;
        }
    }
    return input_grad;
}

Tensor relu_forward(const Tensor& input) {
    Tensor output(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        output[i] = input[i] > 0.0 ? input[i] : 0.0;
    }
    return output;
}

Tensor relu_backward(const Tensor& upstream_grad, const Tensor& cached_input) {
    check_same_shape(upstream_grad, cached_input, "relu backward");
    Tensor input_grad(cached_input.shape());
    for (std::size_t i = 0; i < cached_input.size(); ++i) {
        input_grad[i] = cached_input[i] > 0.0 ? upstream_grad[i] : 0.0;
    }
    return input_grad;
}

SoftmaxCrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                                const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax_cross_entropy expects logits [N,C], got " +
                         logits.shape_str());
    }
    const int n_batch = logits.dim(0);
    const int classes = logits.dim(1);
    if (static_cast<int>(labels.size()) != n_batch) {
        throw ShapeError("softmax_cross_entropy got " +
                         std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(n_batch));
    }

    SoftmaxCrossEntropyResult result;
    result.logit_gradient = Tensor(logits.shape());
    double loss_sum = 0.0;
    const double inv_n = 1.0 / n_batch;

    for (int n = 0; n < n_batch; ++n) {
        const int label = labels[n];
        if (label < 0 || label >= classes) {
            throw UsageError("label " + std::to_string(label) +
                             " out of range [0, " + std::to_string(classes) + ")");
        }
        const double* row = &logits.at(n, 0);
        double max_logit = row[0];
        for (int c = 1; c < classes; ++c) {
            max_logit = std::max(max_logit, row[c]);
        }
        double exp_sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            exp_sum += std::exp(row[c] - max_logit);
        }
        const double log_sum = max_logit + std::log(exp_sum);
        loss_sum += log_sum - row[label];

        double* grad_row = &result.logit_gradient.at(n, 0);
        for (int c = 0; c < classes; ++c) {
            const double softmax = std::exp(row[c] - max_logit) / exp_sum;
            grad_row[c] = (softmax - (c == label ? 1.0 : 0.0)) * inv_n;
        }
    }
    result.loss = loss_sum * inv_n;
    return result;
}

void sgd_step(std::vector<LayerState*>& states, double learning_rate) {
    for (LayerState* state : states) {
        for (std::size_t i = 0; i < state->weights.size(); ++i) {
            state->weights[i] -= learning_rate * state->weight_gradients[i];
        }
        for (std::size_t i = 0; i < state->biases.size(); ++i) {
            state->biases[i] -= learning_rate * state->bias_gradients[i];
        }
        state->zero_gradients();
    }
}

} // namespace nasf
