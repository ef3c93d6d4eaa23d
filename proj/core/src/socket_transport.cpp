#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "nasf/errors.hpp"
#include "nasf/transport.hpp"

namespace nasf {

namespace {

using Clock = std::chrono::steady_clock;

struct HostPort {
    std::string host;
    std::uint16_t port;
};

HostPort parse_host_port(const std::string& address) {
    const auto pos = address.rfind(':');
    if (pos == std::string::npos || pos + 1 == address.size()) {
        throw ConfigError("address \"" + address + "\" must be host:port");
    }
    HostPort hp;
    hp.host = address.substr(0, pos);
    try {
        const int port = std::stoi(address.substr(pos + 1));
        if (port < 0 || port > 65535) {
            throw std::out_of_range("port");
        }
        hp.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
        throw ConfigError("invalid port in \"" + address + "\"");
    }
    return hp;
}

sockaddr_in resolve(const HostPort& hp) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const int rc = ::getaddrinfo(hp.host.c_str(), nullptr, &hints, &result);
    if (rc != 0 || result == nullptr) {
        throw CommError("cannot resolve host \"" + hp.host + "\": " +
                        gai_strerror(rc));
    }
    sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(result->ai_addr);
    ::freeaddrinfo(result);
    addr.sin_port = htons(hp.port);
    return addr;
}

std::chrono::milliseconds remaining(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    return left.count() > 0 ? left : std::chrono::milliseconds(0);
}

void wait_readable(int fd, Clock::time_point deadline, const std::string& who) {
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(remaining(deadline).count()));
    if (rc == 0) {
        throw CommError("timeout waiting for " + who);
    }
    if (rc < 0) {
        throw CommError("poll failed: " + std::string(std::strerror(errno)));
    }
}

void send_all(int fd, const std::uint8_t* data, std::size_t len,
              Clock::time_point deadline, const std::string& who) {
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            pollfd pfd{fd, POLLOUT, 0};
            const int rc =
                ::poll(&pfd, 1, static_cast<int>(remaining(deadline).count()));
            if (rc == 0) {
                throw CommError("timeout sending to " + who);
            }
            continue;
        }
        throw CommError("send to " + who + " failed: " +
                        std::string(std::strerror(errno)));
    }
}

void recv_all(int fd, std::uint8_t* data, std::size_t len,
              Clock::time_point deadline, const std::string& who) {
    std::size_t got = 0;
    while (got < len) {
        wait_readable(fd, deadline, who);
        const ssize_t n = ::recv(fd, data + got, len - got, 0);
        if (n == 0) {
            throw CommError(who + " disconnected");
        }
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) {
                continue;
            }
            throw CommError("recv from " + who + " failed: " +
                            std::string(std::strerror(errno)));
        }
        got += static_cast<std::size_t>(n);
    }
}

void send_envelope_fd(int fd, const Envelope& envelope,
                      std::chrono::milliseconds timeout, const std::string& who) {
    const auto deadline = Clock::now() + timeout;
    const auto bytes = encode_envelope(envelope);
    send_all(fd, bytes.data(), bytes.size(), deadline, who);
}

Envelope recv_envelope_fd(int fd, std::chrono::milliseconds timeout,
                          const std::string& who) {
    const auto deadline = Clock::now() + timeout;
    std::uint8_t header_bytes[kEnvelopeHeaderBytes];
    recv_all(fd, header_bytes, kEnvelopeHeaderBytes, deadline, who);
    const EnvelopeHeader header = decode_envelope_header(header_bytes);
    Envelope envelope;
    envelope.msg_type = header.msg_type;
    envelope.tag = header.tag;
    envelope.payload.resize(header.payload_length);
    recv_all(fd, envelope.payload.data(), header.payload_length, deadline, who);
    return envelope;
}

void close_fd(int& fd) {
    if (fd >= 0) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
        fd = -1;
    }
}

class SocketTransport final : public Transport {
public:
    SocketTransport(int rank, int world_size, std::vector<int> fds,
                    std::chrono::milliseconds send_timeout)
        : rank_(rank), world_size_(world_size), fds_(std::move(fds)),
          send_timeout_(send_timeout) {}

    ~SocketTransport() override { close(); }

    int rank() const override { return rank_; }
    int world_size() const override { return world_size_; }

    void send(int peer, const Envelope& envelope) override {
        send_envelope_fd(peer_fd(peer), envelope, send_timeout_,
                         "rank " + std::to_string(peer));
    }

    Envelope recv(int peer, std::chrono::milliseconds timeout) override {
        return recv_envelope_fd(peer_fd(peer), timeout,
                                "rank " + std::to_string(peer));
    }

    void close() override {
        for (int& fd : fds_) {
            close_fd(fd);
        }
    }

private:
    int peer_fd(int peer) const {
        const bool ok = rank_ == 0 ? (peer >= 1 && peer < world_size_)
                                   : peer == 0;
        if (!ok) {
            throw UsageError("rank " + std::to_string(rank_) +
                             " has no link to rank " + std::to_string(peer));
        }
        const int fd = rank_ == 0 ? fds_[peer] : fds_[0];
        if (fd < 0) {
            throw ClosedError("transport already closed");
        }
        return fd;
    }

    int rank_;
    int world_size_;
    std::vector<int> fds_;  // master: indexed by peer rank; worker: [0]
    std::chrono::milliseconds send_timeout_;
};

} // namespace

std::unique_ptr<Transport> listen_as_master(const std::string& listen_address,
                                            int world_size,
                                            std::chrono::milliseconds timeout) {
    if (world_size < 1) {
        throw ConfigError("world size must be >= 1");
    }
    const HostPort hp = parse_host_port(listen_address);
    sockaddr_in addr = resolve(hp);

    const int listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0) {
        throw CommError("socket: " + std::string(std::strerror(errno)));
    }
    const int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd);
        throw CommError("cannot bind " + listen_address + ": " + why);
    }
    if (::listen(listen_fd, 64) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd);
        throw CommError("listen: " + why);
    }

    const auto deadline = Clock::now() + timeout;
    std::vector<int> fds(world_size, -1);
    try {
        for (int next_rank = 1; next_rank < world_size; ++next_rank) {
            wait_readable(listen_fd, deadline,
                          "worker " + std::to_string(next_rank) + " to join");
            const int fd = ::accept(listen_fd, nullptr, nullptr);
            if (fd < 0) {
                throw CommError("accept: " + std::string(std::strerror(errno)));
            }
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

            const Envelope hello =
                recv_envelope_fd(fd, remaining(deadline), "joining worker");
            if (hello.msg_type != MsgType::Hello) {
                ::close(fd);
                throw ProtocolError("expected HELLO, got " +
                                    std::string(msg_type_name(hello.msg_type)));
            }
            validate_hello_payload(hello.payload);
            fds[next_rank] = fd;
        }
        // every peer is in; hand out ranks in acceptance order
        for (int r = 1; r < world_size; ++r) {
            Envelope assign;
            assign.msg_type = MsgType::RankAssign;
            assign.payload = make_rank_assign_payload(r, world_size);
            send_envelope_fd(fds[r], assign, remaining(deadline),
                             "rank " + std::to_string(r));
        }
    } catch (...) {
        for (int& fd : fds) close_fd(fd);
        ::close(listen_fd);
        throw;
    }
    ::close(listen_fd);
    return std::make_unique<SocketTransport>(0, world_size, std::move(fds),
                                             timeout);
}

std::unique_ptr<Transport> connect_as_worker(const std::string& master_address,
                                             std::chrono::milliseconds timeout) {
    const HostPort hp = parse_host_port(master_address);
    const sockaddr_in addr = resolve(hp);
    const auto deadline = Clock::now() + timeout;

    int fd = -1;
    while (true) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) {
            throw CommError("socket: " + std::string(std::strerror(errno)));
        }
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr),
                      sizeof(addr)) == 0) {
            break;
        }
        ::close(fd);
        fd = -1;
        if (remaining(deadline).count() == 0) {
            throw CommError("cannot reach master at " + master_address);
        }
        // master may not be listening yet; keep knocking until the deadline
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }

    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    try {
        Envelope hello;
        hello.msg_type = MsgType::Hello;
        hello.payload = make_hello_payload();
        send_envelope_fd(fd, hello, remaining(deadline), "master");

        const Envelope assign =
            recv_envelope_fd(fd, remaining(deadline), "master");
        if (assign.msg_type != MsgType::RankAssign) {
            throw ProtocolError("expected RANK_ASSIGN, got " +
                                std::string(msg_type_name(assign.msg_type)));
        }
        int rank = 0, world_size = 0;
        parse_rank_assign_payload(assign.payload, rank, world_size);
        if (rank < 1 || rank >= world_size) {
            throw ProtocolError("implausible rank assignment " +
                                std::to_string(rank) + "/" +
                                std::to_string(world_size));
        }
        std::vector<int> fds{fd};
        return std::make_unique<SocketTransport>(rank, world_size,
                                                 std::move(fds), timeout);
    } catch (...) {
        close_fd(fd);
        throw;
    }
}

} // namespace nasf
