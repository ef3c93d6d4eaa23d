#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nasf/layers.hpp"

namespace nasf {

/// A named layer declaration inside a descriptor.
struct LayerSpec {
    std::string name;
    LayerKind kind;
};

struct ValidationReport {
    bool valid = false;
    std::vector<std::string> failures;
    /// Layer names in a topological order (lowest insertion index first among
    /// ready nodes). Empty when invalid.
    std::vector<std::string> topological_order;
    std::string source;  // unique input-receiving layer, when found
    std::string sink;    // unique output layer, when found

    std::string failure_summary() const;
};

/// Declarative network representation: layers and directed connections are
/// declared independently of each other and of execution. A validated
/// descriptor is an immutable value that can be serialized, hashed, counted
/// and compiled.
class Descriptor {
public:
    /// Registers a named layer. No connections are created.
    void add_layer(const LayerKind& kind, const std::string& name);

    /// Records the directed edge from -> to.
    void connect(const std::string& from, const std::string& to);

    /// Registers a layer auto-named "<kind>_<index>" and, if a layer was
    /// added before it, connects that previous layer to the new one.
    void add_layer_sequential(const LayerKind& kind);

    ValidationReport validate() const;

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const std::vector<std::pair<std::string, std::string>>& connections() const {
        return connections_;
    }

    bool has_layer(const std::string& name) const;
    const LayerSpec& layer(const std::string& name) const;
    std::size_t layer_index(const std::string& name) const;

    /// Canonical single-line serialization with fields "layers" (array of
    /// {name, kind, params}) and "connections" (array of [from, to]).
    std::string to_json() const;
    static Descriptor from_json(const std::string& text);

    /// 8-byte FNV-1a over to_json(); used as the cross-rank agreement guard.
    std::uint64_t hash() const;

    bool operator==(const Descriptor& other) const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::pair<std::string, std::string>> connections_;
    std::unordered_map<std::string, std::size_t> index_;
};

std::uint64_t fnv1a64(const void* data, std::size_t size);

} // namespace nasf
