#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "nasf/transport.hpp"

namespace nasf {

struct InitConfig {
    enum class Role { Master, Worker };
    Role role = Role::Master;
    std::string listen_address;   // master, "host:port"
    std::string master_address;   // worker, "host:port"
    int expected_world_size = 1;  // master only; workers learn it
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

/// The distributed runtime context: rank, world size, collectives, ordered
/// logging and teardown. One Environment per process; calls are blocking and
/// must not overlap from multiple threads. Collectives are star-shaped with
/// rank 0 as the hub and use a shared tag counter so a rank that falls out
/// of step is detected as a protocol error rather than silent corruption.
class Environment {
public:
    /// Establishes the world over TCP. Master binds and blocks until all
    /// expected peers join; workers connect and block for their rank.
    static Environment init(const InitConfig& config);

    /// Rank 0 of a world of one; all collectives are identities.
    static Environment local();

    /// Wraps an existing transport (in-process worlds, tests).
    static Environment over(std::unique_ptr<Transport> transport,
                            std::chrono::milliseconds timeout =
                                std::chrono::seconds(30));

    Environment(Environment&&) noexcept = default;
    Environment& operator=(Environment&&) noexcept = default;
    Environment(const Environment&) = delete;
    Environment& operator=(const Environment&) = delete;
    ~Environment();

    int rank() const { return rank_; }
    int world_size() const { return world_size_; }
    bool is_open() const { return open_; }

    /// Returns once every rank has entered: gather-to-root, then a broadcast
    /// release.
    void barrier();

    /// Every rank returns root's values. All ranks must pass vectors of the
    /// same length.
    std::vector<double> broadcast(const std::vector<double>& values, int root);

    /// Element-wise mean. Rank 0 sums the contributions in rank order
    /// (0,1,2,...) then divides, so every rank receives bitwise-identical
    /// results on every run.
    std::vector<double> allreduce_mean(const std::vector<double>& values);

    /// Root receives all payloads indexed by rank; everyone else gets an
    /// empty list.
    std::vector<std::vector<std::uint8_t>> gather_bytes(
        const std::vector<std::uint8_t>& payload, int root);

    /// Byte variant of broadcast (configs, serialized objects).
    std::vector<std::uint8_t> broadcast_bytes(
        const std::vector<std::uint8_t>& payload, int root);

    /// Collective print: lines are routed to rank 0 and emitted grouped by
    /// rank in ascending order, each prefixed "[rank r] ". One call is one
    /// flush epoch.
    void ordered_print(const std::string& line);

    /// Master propagates SHUTDOWN and closes; workers wait for it, then
    /// close. Idempotent; after it, any collective raises ClosedError.
    void shutdown();

    // Point-to-point task protocol (distributed-population scheduling).
    void send_task(int worker, const std::vector<std::uint8_t>& payload,
                   std::uint32_t tag);
    Envelope recv_result(int worker);
    /// Worker side: blocks for the next TASK; returns it, or SHUTDOWN, in
    /// which case the environment closes itself and subsequent calls fail.
    Envelope recv_task();
    void send_result(const std::vector<std::uint8_t>& payload,
                     std::uint32_t tag);

    /// Where ordered_print writes on rank 0 (default std::cout). Tests
    /// redirect it.
    void set_log_sink(std::ostream* sink) { log_sink_ = sink; }

private:
    Environment() = default;

    void require_open(const char* op) const;
    Envelope recv_checked(int peer, MsgType expected, std::uint32_t tag);
    std::vector<std::vector<std::uint8_t>> gather_impl(
        MsgType type, const std::vector<std::uint8_t>& payload, int root);
    std::vector<std::uint8_t> broadcast_bytes_impl(
        MsgType type, const std::vector<std::uint8_t>& payload, int root);

    int rank_ = 0;
    int world_size_ = 1;
    bool open_ = true;
    std::uint32_t next_tag_ = 1;
    std::chrono::milliseconds timeout_ = std::chrono::seconds(30);
    std::unique_ptr<Transport> transport_;
    std::ostream* log_sink_ = nullptr;
};

/// Reads NASF_TIMEOUT_SECS; falls back to the given default.
std::chrono::milliseconds timeout_from_env(
    std::chrono::milliseconds fallback = std::chrono::seconds(30));

} // namespace nasf
