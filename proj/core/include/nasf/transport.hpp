#pragma once

#include <chrono>
#include <memory>
#include <vector>

#include "nasf/envelope.hpp"

namespace nasf {

/// Point-to-point message channel of one rank in a star topology: workers
/// talk only to rank 0, rank 0 talks to every worker. Environment builds all
/// collectives on top of this interface, so the in-process and the socket
/// realizations are interchangeable.
class Transport {
public:
    virtual ~Transport() = default;

    virtual int rank() const = 0;
    virtual int world_size() const = 0;

    /// peer must be 0 on workers, a worker rank on rank 0.
    virtual void send(int peer, const Envelope& envelope) = 0;
    virtual Envelope recv(int peer, std::chrono::milliseconds timeout) = 0;

    /// Idempotent; wakes any blocked peers with a disconnect error.
    virtual void close() = 0;
};

/// Builds a connected world of in-process endpoints backed by mutex/condvar
/// queues. Endpoint r belongs to rank r; hand them to threads and drive the
/// same code paths as over sockets, deterministically and without the
/// network. Closing any endpoint poisons its links, so peer loss is
/// injectable from tests.
std::vector<std::unique_ptr<Transport>> make_in_process_world(int world_size);

/// TCP transport. The master binds `listen_address` ("host:port"), accepts
/// `world_size - 1` connections, validates each HELLO and assigns ranks in
/// acceptance order; it returns only once every expected peer has joined.
/// Workers connect to `master_address`, present a HELLO and block until
/// their RANK_ASSIGN arrives.
std::unique_ptr<Transport> listen_as_master(const std::string& listen_address,
                                            int world_size,
                                            std::chrono::milliseconds timeout);
std::unique_ptr<Transport> connect_as_worker(const std::string& master_address,
                                             std::chrono::milliseconds timeout);

} // namespace nasf
