#pragma once

#include <cstdint>
#include <vector>

#include "nasf/descriptor.hpp"
#include "nasf/layers.hpp"

namespace nasf {

/// Total trainable scalars of the descriptor on the given [C,H,W] input:
/// conv2d contributes out*(in*k*k + 1), dense out*(in + 1), everything else
/// zero. Runs shape inference, so unresolved input sizes are filled in and
/// incompatibilities surface as CompileError.
std::int64_t count_parameters(const Descriptor& desc,
                              const std::vector<int>& input_shape);

/// Executable network compiled from a validated descriptor. Layers run in
/// topological order; a layer with several inbound edges sees its inputs
/// concatenated along the channel (or feature) axis in connection-declaration
/// order. Instances are single-threaded; they may move between threads
/// between uses but never be shared concurrently.
class Network {
public:
    /// Forward pass over a batch. `input` must be [N, C, H, W] with the
    /// compile-time input shape. With cache=true the per-node inputs are kept
    /// for a following backward().
    Tensor forward(const Tensor& input, bool cache = true);

    /// Backpropagates from the sink given d(loss)/d(logits); accumulates
    /// weight and bias gradients in every layer state.
    void backward(const Tensor& logit_gradient);

    /// Layer states in topological order (parameterless layers included).
    std::vector<LayerState*> states();

    std::int64_t parameter_count() const;

    const Descriptor& descriptor() const { return descriptor_; }
    const std::vector<int>& input_shape() const { return input_shape_; }
    /// Shape of the sink output, without the batch axis.
    const std::vector<int>& output_shape() const;

    friend Network compile(const Descriptor& desc,
                           const std::vector<int>& input_shape,
                           std::uint64_t seed);

private:
    struct Node {
        LayerKind kind;                 // fully resolved
        LayerState state;
        std::vector<std::size_t> preds; // node ids, connection order
        std::vector<int> out_shape;     // without batch axis
        Tensor cached_input;            // merged input from last forward
        bool has_cache = false;
    };

    Tensor merged_input(std::size_t node_id, const std::vector<Tensor>& outputs,
                        const Tensor& network_input) const;
    Tensor apply(Node& node, const Tensor& input, bool cache) const;

    Descriptor descriptor_;
    std::vector<int> input_shape_;
    std::vector<Node> nodes_;            // indexed by descriptor layer index
    std::vector<std::size_t> topo_;      // execution order (node ids)
    std::size_t source_ = 0;
    std::size_t sink_ = 0;
};

/// Validates, infers shapes, and initializes parameters from the seed (one
/// generator stream, layers visited in topological order). Identical seeds
/// give bitwise-identical initial parameters.
Network compile(const Descriptor& desc, const std::vector<int>& input_shape,
                std::uint64_t seed);

} // namespace nasf
