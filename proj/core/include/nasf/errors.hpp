#pragma once

#include <stdexcept>
#include <string>

namespace nasf {

/// Base class for all errors raised by the framework.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer shape mismatches and merge incompatibilities.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Descriptor construction problems: duplicate names, duplicate edges,
/// references to unknown layers.
class DeclarationError : public Error {
public:
    using Error::Error;
};

/// Reference to a name that was never declared.
class ReferenceError : public Error {
public:
    using Error::Error;
};

/// Shape inference or network construction failure for an otherwise
/// well-formed descriptor.
class CompileError : public Error {
public:
    using Error::Error;
};

/// Dataset loading failures (missing files, bad sizes, bad labels).
class LoadError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values (CLI, config file, sharding setup).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Wire-protocol violations: bad framing, bad handshake, tag or length
/// mismatches, descriptor-hash disagreement between ranks.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Transport-level failures: timeouts, lost peers, refused connections.
class CommError : public Error {
public:
    using Error::Error;
};

/// Collective call on an environment that has been shut down.
class ClosedError : public Error {
public:
    using Error::Error;
};

/// Run-log post-processing failures (incomplete generations, missing logs).
class AnalysisError : public Error {
public:
    using Error::Error;
};

/// API misuse (calling backward without a cached forward, selecting from
/// an unevaluated population, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace nasf
