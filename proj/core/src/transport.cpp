#include "nasf/transport.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>

#include "nasf/errors.hpp"

namespace nasf {

namespace {

/// One direction of a hub-spoke link.
struct Channel {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Envelope> queue;
    bool closed = false;

    void push(const Envelope& envelope, int from_rank) {
        {
            std::lock_guard lock(mutex);
            if (closed) {
                throw CommError("rank " + std::to_string(from_rank) +
                                ": peer link already closed");
            }
            queue.push_back(envelope);
        }
        cv.notify_one();
    }

    Envelope pop(int peer_rank, std::chrono::milliseconds timeout) {
        std::unique_lock lock(mutex);
        if (!cv.wait_for(lock, timeout,
                         [&] { return !queue.empty() || closed; })) {
            throw CommError("timeout waiting for rank " +
                            std::to_string(peer_rank));
        }
        if (queue.empty()) {
            throw CommError("rank " + std::to_string(peer_rank) +
                            " disconnected");
        }
        Envelope envelope = std::move(queue.front());
        queue.pop_front();
        return envelope;
    }

    void close() {
        {
            std::lock_guard lock(mutex);
            closed = true;
        }
        cv.notify_all();
    }
};

/// Shared state of an in-process world: two channels per worker.
struct InProcessHub {
    int world_size;
    // index w-1: to_master[i] carries messages from rank i+1 to rank 0,
    // to_worker[i] the reverse direction.
    std::vector<std::unique_ptr<Channel>> to_master;
    std::vector<std::unique_ptr<Channel>> to_worker;

    explicit InProcessHub(int world) : world_size(world) {
        for (int i = 1; i < world; ++i) {
            to_master.push_back(std::make_unique<Channel>());
            to_worker.push_back(std::make_unique<Channel>());
        }
    }
};

class InProcessTransport final : public Transport {
public:
    InProcessTransport(std::shared_ptr<InProcessHub> hub, int rank)
        : hub_(std::move(hub)), rank_(rank) {}

    ~InProcessTransport() override { close(); }

    int rank() const override { return rank_; }
    int world_size() const override { return hub_->world_size; }

    void send(int peer, const Envelope& envelope) override {
        check_peer(peer);
        if (rank_ == 0) {
            hub_->to_worker[peer - 1]->push(envelope, rank_);
        } else {
            hub_->to_master[rank_ - 1]->push(envelope, rank_);
        }
    }

    Envelope recv(int peer, std::chrono::milliseconds timeout) override {
        check_peer(peer);
        if (rank_ == 0) {
            return hub_->to_master[peer - 1]->pop(peer, timeout);
        }
        return hub_->to_worker[rank_ - 1]->pop(peer, timeout);
    }

    void close() override {
        if (closed_) {
            return;
        }
        closed_ = true;
        if (rank_ == 0) {
            for (auto& ch : hub_->to_master) ch->close();
            for (auto& ch : hub_->to_worker) ch->close();
        } else {
            hub_->to_master[rank_ - 1]->close();
            hub_->to_worker[rank_ - 1]->close();
        }
    }

private:
    void check_peer(int peer) const {
        const bool ok = rank_ == 0 ? (peer >= 1 && peer < hub_->world_size)
                                   : peer == 0;
        if (!ok) {
            throw UsageError("rank " + std::to_string(rank_) +
                             " has no link to rank " + std::to_string(peer));
        }
    }

    std::shared_ptr<InProcessHub> hub_;
    int rank_;
    bool closed_ = false;
};

} // namespace

std::vector<std::unique_ptr<Transport>> make_in_process_world(int world_size) {
    if (world_size < 1) {
        throw ConfigError("world size must be >= 1");
    }
    auto hub = std::make_shared<InProcessHub>(world_size);
    std::vector<std::unique_ptr<Transport>> endpoints;
    endpoints.reserve(world_size);
    for (int r = 0; r < world_size; ++r) {
        endpoints.push_back(std::make_unique<InProcessTransport>(hub, r));
    }
    return endpoints;
}

} // namespace nasf
