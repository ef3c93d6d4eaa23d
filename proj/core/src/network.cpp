#include "nasf/network.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "nasf/errors.hpp"

namespace nasf {

namespace {

struct InferredGraph {
    std::vector<LayerKind> resolved;            // by layer index
    std::vector<std::vector<int>> out_shapes;   // without batch axis
    std::vector<std::vector<std::size_t>> preds;
    std::vector<std::size_t> topo;
    std::size_t source = 0;
    std::size_t sink = 0;
};

std::vector<int> merge_shapes(const std::vector<std::vector<int>>& inputs,
                              const std::string& at) {
    if (inputs.size() == 1) {
        return inputs[0];
    }
    std::vector<int> shape = inputs[0];
    for (std::size_t i = 1; i < inputs.size(); ++i) {
        const auto& s = inputs[i];
        if (s.size() != shape.size()) {
            throw CompileError("merge at \"" + at +
                               "\": inputs of different rank");
        }
        if (shape.size() == 3) {
            if (s[1] != shape[1] || s[2] != shape[2]) {
                throw CompileError("merge at \"" + at +
                                   "\": spatial dimensions mismatch");
            }
            shape[0] += s[0];
        } else if (shape.size() == 1) {
            shape[0] += s[0];
        } else {
            throw CompileError("merge at \"" + at + "\": unsupported rank");
        }
    }
    return shape;
}

InferredGraph infer_shapes(const Descriptor& desc,
                           const std::vector<int>& input_shape) {
    if (input_shape.size() != 3 ||
        *std::min_element(input_shape.begin(), input_shape.end()) < 1) {
        throw CompileError("input shape must be [C,H,W] with positive dims");
    }
    const ValidationReport report = desc.validate();
    if (!report.valid) {
        throw CompileError("descriptor invalid: " + report.failure_summary());
    }

    const std::size_t n = desc.layers().size();
    InferredGraph graph;
    graph.resolved.resize(n);
    graph.out_shapes.resize(n);
    graph.preds.resize(n);
    for (const auto& [from, to] : desc.connections()) {
        graph.preds[desc.layer_index(to)].push_back(desc.layer_index(from));
    }
    graph.topo.reserve(n);
    for (const auto& name : report.topological_order) {
        graph.topo.push_back(desc.layer_index(name));
    }
    graph.source = desc.layer_index(report.source);
    graph.sink = desc.layer_index(report.sink);

    for (std::size_t id : graph.topo) {
        const LayerSpec& spec = desc.layers()[id];

        std::vector<int> in_shape;
        if (id == graph.source) {
            in_shape = input_shape;
        } else {
            std::vector<std::vector<int>> pred_shapes;
            pred_shapes.reserve(graph.preds[id].size());
            for (std::size_t p : graph.preds[id]) {
                pred_shapes.push_back(graph.out_shapes[p]);
            }
            in_shape = merge_shapes(pred_shapes, spec.name);
        }

        LayerKind kind = spec.kind;
        switch (kind.type) {
            case LayerType::Conv2d: {
                if (in_shape.size() != 3) {
                    throw CompileError("conv2d layer \"" + spec.name +
                                       "\" fed non-spatial input");
                }
                if (kind.in_channels == 0) {
                    kind.in_channels = in_shape[0];
                } else if (kind.in_channels != in_shape[0]) {
                    throw CompileError(
                        "conv2d layer \"" + spec.name + "\" declares " +
                        std::to_string(kind.in_channels) +
                        " input channels but receives " +
                        std::to_string(in_shape[0]));
                }
                graph.out_shapes[id] = {kind.out_channels, in_shape[1],
                                        in_shape[2]};
                break;
            }
            case LayerType::Dense: {
                if (in_shape.size() != 1) {
                    throw CompileError("dense layer \"" + spec.name +
                                       "\" fed non-flattened input " +
                                       "(insert a flatten layer)");
                }
                if (kind.in_features == 0) {
                    kind.in_features = in_shape[0];
                } else if (kind.in_features != in_shape[0]) {
                    throw CompileError(
                        "dense layer \"" + spec.name + "\" declares " +
                        std::to_string(kind.in_features) +
                        " input features but receives " +
                        std::to_string(in_shape[0]));
                }
                graph.out_shapes[id] = {kind.out_features};
                break;
            }
            case LayerType::Flatten: {
                int features = 1;
                for (int d : in_shape) features *= d;
                graph.out_shapes[id] = {features};
                break;
            }
            case LayerType::ReLU:
            case LayerType::SoftmaxCrossEntropy:
                graph.out_shapes[id] = in_shape;
                break;
        }
        graph.resolved[id] = kind;
    }
    return graph;
}

std::int64_t kind_parameter_count(const LayerKind& kind) {
    switch (kind.type) {
        case LayerType::Conv2d:
            return static_cast<std::int64_t>(kind.out_channels) *
                   (static_cast<std::int64_t>(kind.in_channels) * kind.kernel *
                        kind.kernel +
                    1);
        case LayerType::Dense:
            return static_cast<std::int64_t>(kind.out_features) *
                   (static_cast<std::int64_t>(kind.in_features) + 1);
        default:
            return 0;
    }
}

/// Concatenates along the channel/feature axis; every part shares the batch
/// size and each example occupies one contiguous block per part.
Tensor concat_parts(const std::vector<const Tensor*>& parts) {
    if (parts.size() == 1) {
        return *parts[0];
    }
    const int n_batch = parts[0]->dim(0);
    std::size_t example_total = 0;
    for (const Tensor* p : parts) {
        example_total += p->size() / n_batch;
    }

    std::vector<int> shape = parts[0]->shape();
    int channels = 0;
    for (const Tensor* p : parts) {
        channels += p->dim(1);
    }
    shape[1] = channels;

    Tensor out(shape);
    std::size_t offset = 0;
    for (const Tensor* p : parts) {
        const std::size_t block = p->size() / n_batch;
        for (int n = 0; n < n_batch; ++n) {
            std::memcpy(out.data() + n * example_total + offset,
                        p->data() + n * block, block * sizeof(double));
        }
        offset += block;
    }
    return out;
}

} // namespace

std::int64_t count_parameters(const Descriptor& desc,
                              const std::vector<int>& input_shape) {
    const InferredGraph graph = infer_shapes(desc, input_shape);
    std::int64_t total = 0;
    for (const LayerKind& kind : graph.resolved) {
        total += kind_parameter_count(kind);
    }
    return total;
}

Network compile(const Descriptor& desc, const std::vector<int>& input_shape,
                std::uint64_t seed) {
    const InferredGraph graph = infer_shapes(desc, input_shape);

    Network net;
    net.descriptor_ = desc;
    net.input_shape_ = input_shape;
    net.topo_ = graph.topo;
    net.source_ = graph.source;
    net.sink_ = graph.sink;
    net.nodes_.resize(desc.layers().size());

    Rng rng(seed);
    for (std::size_t id : graph.topo) {
        Network::Node& node = net.nodes_[id];
        node.kind = graph.resolved[id];
        node.preds = graph.preds[id];
        node.out_shape = graph.out_shapes[id];
        node.state = make_layer_state(node.kind, rng);
    }
    return net;
}

Tensor Network::merged_input(std::size_t node_id,
                             const std::vector<Tensor>& outputs,
                             const Tensor& network_input) const {
    if (node_id == source_) {
        return network_input;
    }
    std::vector<const Tensor*> parts;
    parts.reserve(nodes_[node_id].preds.size());
    for (std::size_t p : nodes_[node_id].preds) {
        parts.push_back(&outputs[p]);
    }
    return concat_parts(parts);
}

Tensor Network::apply(Node& node, const Tensor& input, bool cache) const {
    Tensor out;
    switch (node.kind.type) {
        case LayerType::Conv2d:
            out = conv2d_forward(input, node.state, node.kind.kernel);
            break;
        case LayerType::Dense:
            out = dense_forward(input, node.state);
            break;
        case LayerType::ReLU:
            out = relu_forward(input);
            break;
        case LayerType::Flatten: {
            std::vector<int> shape{input.dim(0), 1};
            shape[1] = static_cast<int>(input.size()) / input.dim(0);
            out = Tensor(shape, std::vector<double>(
                                    input.data(), input.data() + input.size()));
            break;
        }
        case LayerType::SoftmaxCrossEntropy:
            out = input;  // loss head: identity on the forward path
            break;
    }
    if (cache) {
        node.cached_input = input;
        node.has_cache = true;
    }
    return out;
}

Tensor Network::forward(const Tensor& input, bool cache) {
    if (input.rank() != 4) {
        throw ShapeError("network input must be [N,C,H,W], got " +
                         input.shape_str());
    }
    if (input.dim(1) != input_shape_[0] || input.dim(2) != input_shape_[1] ||
        input.dim(3) != input_shape_[2]) {
        throw ShapeError("network compiled for input " +
                         Tensor({1, input_shape_[0], input_shape_[1],
                                 input_shape_[2]})
                             .shape_str() +
                         " but received " + input.shape_str());
    }
    std::vector<Tensor> outputs(nodes_.size());
    for (std::size_t id : topo_) {
        const Tensor in = merged_input(id, outputs, input);
        outputs[id] = apply(nodes_[id], in, cache);
    }
    return outputs[sink_];
}

void Network::backward(const Tensor& logit_gradient) {
    std::vector<Tensor> grads(nodes_.size());
    std::vector<bool> has_grad(nodes_.size(), false);
    grads[sink_] = logit_gradient;
    has_grad[sink_] = true;

    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
        const std::size_t id = *it;
        Node& node = nodes_[id];
        if (!has_grad[id]) {
            throw UsageError("backward before forward on layer \"" +
                             descriptor_.layers()[id].name + "\"");
        }
        if (!node.has_cache) {
            throw UsageError("backward requires a cached forward pass");
        }

        Tensor input_grad;
        switch (node.kind.type) {
            case LayerType::Conv2d:
                input_grad = conv2d_backward(grads[id], node.cached_input,
                                             node.state, node.kind.kernel);
                break;
            case LayerType::Dense:
                input_grad = dense_backward(grads[id], node.cached_input,
                                            node.state);
                break;
            case LayerType::ReLU:
                input_grad = relu_backward(grads[id], node.cached_input);
                break;
            case LayerType::Flatten:
                input_grad =
                    Tensor(node.cached_input.shape(),
                           std::vector<double>(grads[id].data(),
                                               grads[id].data() + grads[id].size()));
                break;
            case LayerType::SoftmaxCrossEntropy:
                input_grad = grads[id];
                break;
        }

        if (id == source_) {
            continue;  // gradient w.r.t. the data is discarded
        }
        // Undo the channel concatenation: route each slice of the input
        // gradient back to the producing predecessor.
        const int n_batch = input_grad.dim(0);
        const std::size_t example_total = input_grad.size() / n_batch;
        std::size_t offset = 0;
        for (std::size_t p : node.preds) {
            if (!has_grad[p]) {
                std::vector<int> shape{n_batch};
                shape.insert(shape.end(), nodes_[p].out_shape.begin(),
                             nodes_[p].out_shape.end());
                grads[p] = Tensor(shape);
                has_grad[p] = true;
            }
            const std::size_t block = grads[p].size() / n_batch;
            for (int n = 0; n < n_batch; ++n) {
                const double* src = input_grad.data() + n * example_total + offset;
                double* dst = grads[p].data() + n * block;
                for (std::size_t i = 0; i < block; ++i) {
                    dst[i] += src[i];
                }
            }
            offset += block;
        }
    }
}

std::vector<LayerState*> Network::states() {
    std::vector<LayerState*> result;
    result.reserve(topo_.size());
    for (std::size_t id : topo_) {
        result.push_back(&nodes_[id].state);
    }
    return result;
}

std::int64_t Network::parameter_count() const {
    std::int64_t total = 0;
    for (const Node& node : nodes_) {
        total += static_cast<std::int64_t>(node.state.parameter_count());
    }
    return total;
}

const std::vector<int>& Network::output_shape() const {
    return nodes_[sink_].out_shape;
}

} // namespace nasf
