#include "nasf/descriptor.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nasf/errors.hpp"

namespace nasf {

using nlohmann::json;

std::string ValidationReport::failure_summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (i) os << "; ";
        os << failures[i];
    }
    return os.str();
}

void Descriptor::add_layer(const LayerKind& kind, const std::string& name) {
    if (name.empty()) {
        throw DeclarationError("layer name must be non-empty");
    }
    if (index_.count(name)) {
        throw DeclarationError("duplicate layer name \"" + name + "\"");
    }
    index_[name] = layers_.size();
    layers_.push_back(LayerSpec{name, kind});
}

void Descriptor::connect(const std::string& from, const std::string& to) {
    if (!index_.count(from)) {
        throw ReferenceError("connect: unknown layer \"" + from + "\"");
    }
    if (!index_.count(to)) {
        throw ReferenceError("connect: unknown layer \"" + to + "\"");
    }
    const auto edge = std::make_pair(from, to);
    if (std::find(connections_.begin(), connections_.end(), edge) !=
        connections_.end()) {
        throw DeclarationError("duplicate connection " + from + " -> " + to);
    }
    connections_.push_back(edge);
}

void Descriptor::add_layer_sequential(const LayerKind& kind) {
    std::string previous;
    if (!layers_.empty()) {
        previous = layers_.back().name;
    }
    // Auto-name from the per-descriptor counter; bump past any name the
    // caller already claimed manually.
    std::size_t counter = layers_.size();
    std::string name = layer_type_name(kind.type) + "_" + std::to_string(counter);
    while (index_.count(name)) {
        ++counter;
        name = layer_type_name(kind.type) + "_" + std::to_string(counter);
    }
    add_layer(kind, name);
    if (!previous.empty()) {
        connect(previous, name);
    }
}

bool Descriptor::has_layer(const std::string& name) const {
    return index_.count(name) != 0;
}

const LayerSpec& Descriptor::layer(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ReferenceError("unknown layer \"" + name + "\"");
    }
    return layers_[it->second];
}

std::size_t Descriptor::layer_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ReferenceError("unknown layer \"" + name + "\"");
    }
    return it->second;
}

ValidationReport Descriptor::validate() const {
    ValidationReport report;
    const std::size_t n = layers_.size();
    if (n == 0) {
        report.failures.push_back("descriptor has no layers");
        return report;
    }

    std::vector<std::vector<std::size_t>> succ(n), pred(n);
    for (const auto& [from, to] : connections_) {
        const std::size_t a = index_.at(from);
        const std::size_t b = index_.at(to);
        succ[a].push_back(b);
        pred[b].push_back(a);
    }

    std::vector<std::size_t> sources, sinks;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred[i].empty()) sources.push_back(i);
        if (succ[i].empty()) sinks.push_back(i);
    }

    if (sources.size() != 1) {
        std::ostringstream os;
        os << "expected exactly one source layer, found " << sources.size();
        for (std::size_t i : sources) os << " \"" << layers_[i].name << "\"";
        report.failures.push_back(os.str());
    }
    if (sinks.size() != 1) {
        std::ostringstream os;
        os << "expected exactly one sink layer, found " << sinks.size();
        for (std::size_t i : sinks) os << " \"" << layers_[i].name << "\"";
        report.failures.push_back(os.str());
    }

    // Kahn's algorithm picking the lowest insertion index among ready nodes,
    // so the order (and everything seeded from it) is deterministic.
    std::vector<std::size_t> indegree(n);
    for (std::size_t i = 0; i < n; ++i) indegree[i] = pred[i].size();
    std::vector<bool> emitted(n, false);
    std::vector<std::size_t> order;
    while (order.size() < n) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!emitted[i] && indegree[i] == 0) {
                pick = i;
                break;
            }
        }
        if (pick == n) break;  // remaining nodes all sit on cycles
        emitted[pick] = true;
        order.push_back(pick);
        for (std::size_t s : succ[pick]) --indegree[s];
    }
    if (order.size() < n) {
        std::ostringstream os;
        os << "cycle detected involving";
        for (std::size_t i = 0; i < n; ++i) {
            if (!emitted[i]) os << " \"" << layers_[i].name << "\"";
        }
        report.failures.push_back(os.str());
    }

    if (report.failures.empty()) {
        const std::size_t source = sources[0];
        const std::size_t sink = sinks[0];
        report.source = layers_[source].name;
        report.sink = layers_[sink].name;

        auto reach = [&](std::size_t start,
                         const std::vector<std::vector<std::size_t>>& adj) {
            std::vector<bool> seen(n, false);
            std::queue<std::size_t> q;
            q.push(start);
            seen[start] = true;
            while (!q.empty()) {
                const std::size_t u = q.front();
                q.pop();
                for (std::size_t v : adj[u]) {
                    if (!seen[v]) {
                        seen[v] = true;
                        q.push(v);
                    }
                }
            }
            return seen;
        };
        const auto from_source = reach(source, succ);
        const auto to_sink = reach(sink, pred);
        for (std::size_t i = 0; i < n; ++i) {
            if (!from_source[i]) {
                report.failures.push_back("layer \"" + layers_[i].name +
                                          "\" is unreachable from the source");
            }
            if (!to_sink[i]) {
                report.failures.push_back("layer \"" + layers_[i].name +
                                          "\" cannot reach the sink");
            }
        }
    }

    if (report.failures.empty()) {
        report.valid = true;
        report.topological_order.reserve(n);
        for (std::size_t i : order) {
            report.topological_order.push_back(layers_[i].name);
        }
    } else {
        report.source.clear();
        report.sink.clear();
    }
    return report;
}

namespace {

json kind_params(const LayerKind& kind) {
    json params = json::object();
    switch (kind.type) {
        case LayerType::Conv2d:
            params["in_channels"] = kind.in_channels;
            params["out_channels"] = kind.out_channels;
            params["kernel"] = kind.kernel;
            params["padding"] = "same";
            break;
        case LayerType::Dense:
            params["in_features"] = kind.in_features;
            params["out_features"] = kind.out_features;
            break;
        default:
            break;
    }
    return params;
}

LayerKind kind_from_json(const std::string& kind_name, const json& params) {
    const LayerType type = layer_type_from_name(kind_name);
    switch (type) {
        case LayerType::Conv2d:
            return LayerKind::conv2d(params.at("in_channels").get<int>(),
                                     params.at("out_channels").get<int>(),
                                     params.at("kernel").get<int>());
        case LayerType::Dense:
            return LayerKind::dense(params.at("in_features").get<int>(),
                                    params.at("out_features").get<int>());
        case LayerType::ReLU:
            return LayerKind::relu();
        case LayerType::Flatten:
            return LayerKind::flatten();
        case LayerType::SoftmaxCrossEntropy:
            return LayerKind::softmax_cross_entropy();
    }
    throw DeclarationError("unknown layer kind \"" + kind_name + "\"");
}

} // namespace

std::string Descriptor::to_json() const {
    json doc;
    doc["layers"] = json::array();
    for (const auto& spec : layers_) {
        doc["layers"].push_back({{"name", spec.name},
                                 {"kind", layer_type_name(spec.kind.type)},
                                 {"params", kind_params(spec.kind)}});
    }
    doc["connections"] = json::array();
    for (const auto& [from, to] : connections_) {
        doc["connections"].push_back(json::array({from, to}));
    }
    return doc.dump();
}

Descriptor Descriptor::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DeclarationError(std::string("descriptor parse error: ") + e.what());
    }
    Descriptor desc;
    try {
        for (const auto& entry : doc.at("layers")) {
            desc.add_layer(kind_from_json(entry.at("kind").get<std::string>(),
                                          entry.at("params")),
                           entry.at("name").get<std::string>());
        }
        for (const auto& edge : doc.at("connections")) {
            desc.connect(edge.at(0).get<std::string>(),
                         edge.at(1).get<std::string>());
        }
    } catch (const json::exception& e) {
        throw DeclarationError(std::string("descriptor parse error: ") + e.what());
    }
    return desc;
}

std::uint64_t Descriptor::hash() const {
    const std::string text = to_json();
    return fnv1a64(text.data(), text.size());
}

bool Descriptor::operator==(const Descriptor& other) const {
    if (layers_.size() != other.layers_.size() ||
        connections_ != other.connections_) {
        return false;
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].name != other.layers_[i].name ||
            !(layers_[i].kind == other.layers_[i].kind)) {
            return false;
        }
    }
    return true;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace nasf
