#include "nasf/environment.hpp"

#include <cstdlib>
#include <iostream>

#include "nasf/errors.hpp"

namespace nasf {

Environment Environment::init(const InitConfig& config) {
    if (config.role == InitConfig::Role::Master) {
        if (config.expected_world_size < 1) {
            throw ConfigError("expected world size must be >= 1");
        }
        if (config.expected_world_size == 1) {
            return local();
        }
        try {
            return over(listen_as_master(config.listen_address,
                                         config.expected_world_size,
                                         config.timeout),
                        config.timeout);
        } catch (const CommError& e) {
            throw CommError(std::string("environment init failed: ") + e.what());
        }
    }
    try {
        return over(connect_as_worker(config.master_address, config.timeout),
                    config.timeout);
    } catch (const CommError& e) {
        throw CommError(std::string("environment init failed: ") + e.what());
    }
}

Environment Environment::local() {
    Environment env;
    env.rank_ = 0;
    env.world_size_ = 1;
    return env;
}

Environment Environment::over(std::unique_ptr<Transport> transport,
                              std::chrono::milliseconds timeout) {
    Environment env;
    env.rank_ = transport->rank();
    env.world_size_ = transport->world_size();
    env.transport_ = std::move(transport);
    env.timeout_ = timeout;
    return env;
}

Environment::~Environment() {
    // Destruction without shutdown() just drops the links; peers blocked on
    // us observe a disconnect, which is the documented fault behavior.
    if (transport_) {
        transport_->close();
    }
}

void Environment::require_open(const char* op) const {
    if (!open_) {
        throw ClosedError(std::string(op) + " called on a closed environment");
    }
}

Envelope Environment::recv_checked(int peer, MsgType expected,
                                   std::uint32_t tag) {
    Envelope envelope = transport_->recv(peer, timeout_);
    if (envelope.msg_type == MsgType::Shutdown) {
        open_ = false;
        transport_->close();
        throw ClosedError("peer initiated shutdown during " +
                          std::string(msg_type_name(expected)));
    }
    if (envelope.msg_type != expected) {
        throw ProtocolError(std::string("expected ") + msg_type_name(expected) +
                            " from rank " + std::to_string(peer) + ", got " +
                            msg_type_name(envelope.msg_type));
    }
    if (envelope.tag != tag) {
        throw ProtocolError(std::string(msg_type_name(expected)) +
                            " from rank " + std::to_string(peer) +
                            " carries tag " + std::to_string(envelope.tag) +
                            ", expected " + std::to_string(tag) +
                            " (rank out of step)");
    }
    return envelope;
}

void Environment::barrier() {
    require_open("barrier");
    if (world_size_ == 1) {
        return;
    }
    const std::uint32_t tag = next_tag_++;
    Envelope mark{MsgType::Barrier, tag, {}};
    if (rank_ == 0) {
        for (int r = 1; r < world_size_; ++r) {
            recv_checked(r, MsgType::Barrier, tag);
        }
        for (int r = 1; r < world_size_; ++r) {
            transport_->send(r, mark);
        }
    } else {
        transport_->send(0, mark);
        recv_checked(0, MsgType::Barrier, tag);
    }
}

std::vector<double> Environment::broadcast(const std::vector<double>& values,
                                           int root) {
    require_open("broadcast");
    if (root < 0 || root >= world_size_) {
        throw UsageError("broadcast root " + std::to_string(root) +
                         " out of range");
    }
    if (world_size_ == 1) {
        return values;
    }
    const std::uint32_t tag = next_tag_++;

    auto check_length = [&](const std::vector<double>& received) {
        if (received.size() != values.size()) {
            throw ProtocolError("broadcast length mismatch: root sent " +
                                std::to_string(received.size()) +
                                " values, this rank declared " +
                                std::to_string(values.size()));
        }
    };

    if (rank_ == 0) {
        std::vector<double> data = values;
        if (root != 0) {
            const Envelope from_root = recv_checked(root, MsgType::Bcast, tag);
            data = decode_doubles(from_root.payload);
            check_length(data);
        }
        Envelope out{MsgType::Bcast, tag, encode_doubles(data)};
        for (int r = 1; r < world_size_; ++r) {
            if (r != root) {
                transport_->send(r, out);
            }
        }
        return data;
    }

    if (rank_ == root) {
        Envelope out{MsgType::Bcast, tag, encode_doubles(values)};
        transport_->send(0, out);
        return values;
    }

    const Envelope in = recv_checked(0, MsgType::Bcast, tag);
    std::vector<double> data = decode_doubles(in.payload);
    check_length(data);
    return data;
}

std::vector<double> Environment::allreduce_mean(
    const std::vector<double>& values) {
    require_open("allreduce_mean");
    if (world_size_ == 1) {
        return values;
    }
    const std::uint32_t tag = next_tag_++;

    if (rank_ == 0) {
        // Sum in rank order starting from our own contribution; the fixed
        // order keeps the reduction bitwise deterministic.
        std::vector<double> sum = values;
        for (int r = 1; r < world_size_; ++r) {
            const Envelope in = recv_checked(r, MsgType::Allreduce, tag);
            const std::vector<double> contribution = decode_doubles(in.payload);
            if (contribution.size() != sum.size()) {
                throw ProtocolError(
                    "allreduce length mismatch: rank " + std::to_string(r) +
                    " sent " + std::to_string(contribution.size()) +
                    " values, rank 0 holds " + std::to_string(sum.size()));
            }
            for (std::size_t i = 0; i < sum.size(); ++i) {
                sum[i] += contribution[i];
            }
        }
        const double inv_world = 1.0 / world_size_;
        for (double& v : sum) {
            v *= inv_world;
        }
        Envelope out{MsgType::Allreduce, tag, encode_doubles(sum)};
        for (int r = 1; r < world_size_; ++r) {
            transport_->send(r, out);
        }
        return sum;
    }

    Envelope out{MsgType::Allreduce, tag, encode_doubles(values)};
    transport_->send(0, out);
    const Envelope in = recv_checked(0, MsgType::Allreduce, tag);
    const std::vector<double> mean = decode_doubles(in.payload);
    if (mean.size() != values.size()) {
        throw ProtocolError("allreduce length mismatch in reply");
    }
    return mean;
}

std::vector<std::vector<std::uint8_t>> Environment::gather_impl(
    MsgType type, const std::vector<std::uint8_t>& payload, int root) {
    const std::uint32_t tag = next_tag_++;

    if (rank_ == 0) {
        std::vector<std::vector<std::uint8_t>> entries(world_size_);
        entries[0] = payload;
        for (int r = 1; r < world_size_; ++r) {
            entries[r] = recv_checked(r, type, tag).payload;
        }
        if (root == 0) {
            return entries;
        }
        Envelope out{type, tag, encode_byte_list(entries)};
        transport_->send(root, out);
        return {};
    }

    Envelope out{type, tag, payload};
    transport_->send(0, out);
    if (rank_ == root) {
        const Envelope in = recv_checked(0, type, tag);
        return decode_byte_list(in.payload);
    }
    return {};
}

std::vector<std::vector<std::uint8_t>> Environment::gather_bytes(
    const std::vector<std::uint8_t>& payload, int root) {
    require_open("gather_bytes");
    if (root < 0 || root >= world_size_) {
        throw UsageError("gather root " + std::to_string(root) + " out of range");
    }
    if (world_size_ == 1) {
        return {payload};
    }
    return gather_impl(MsgType::Gather, payload, root);
}

std::vector<std::uint8_t> Environment::broadcast_bytes_impl(
    MsgType type, const std::vector<std::uint8_t>& payload, int root) {
    const std::uint32_t tag = next_tag_++;

    if (rank_ == 0) {
        std::vector<std::uint8_t> data = payload;
        if (root != 0) {
            data = recv_checked(root, type, tag).payload;
        }
        Envelope out{type, tag, data};
        for (int r = 1; r < world_size_; ++r) {
            if (r != root) {
                transport_->send(r, out);
            }
        }
        return data;
    }
    if (rank_ == root) {
        Envelope out{type, tag, payload};
        transport_->send(0, out);
        return payload;
    }
    return recv_checked(0, type, tag).payload;
}

std::vector<std::uint8_t> Environment::broadcast_bytes(
    const std::vector<std::uint8_t>& payload, int root) {
    require_open("broadcast_bytes");
    if (root < 0 || root >= world_size_) {
        throw UsageError("broadcast root " + std::to_string(root) +
                         " out of range");
    }
    if (world_size_ == 1) {
        return payload;
    }
    return broadcast_bytes_impl(MsgType::Bcast, payload, root);
}

void Environment::ordered_print(const std::string& line) {
    require_open("ordered_print");
    std::ostream& sink = log_sink_ ? *log_sink_ : std::cout;
    if (world_size_ == 1) {
        sink << "[rank 0] " << line << "\n";
        sink.flush();
        return;
    }
    const auto lines = gather_impl(MsgType::Log, to_bytes(line), 0);
    if (rank_ == 0) {
        for (int r = 0; r < world_size_; ++r) {
            sink << "[rank " << r << "] " << to_string(lines[r]) << "\n";
        }
        sink.flush();
    }
}

void Environment::shutdown() {
    if (!open_) {
        return;
    }
    open_ = false;
    if (!transport_) {
        return;
    }
    if (rank_ == 0) {
        Envelope bye{MsgType::Shutdown, 0, {}};
        for (int r = 1; r < world_size_; ++r) {
            try {
                transport_->send(r, bye);
            } catch (const CommError&) {
                // peer already gone; teardown continues
            }
        }
    } else {
        try {
            const Envelope in = transport_->recv(0, timeout_);
            if (in.msg_type != MsgType::Shutdown) {
                transport_->close();
                throw ProtocolError("expected SHUTDOWN, got " +
                                    std::string(msg_type_name(in.msg_type)));
            }
        } catch (const CommError&) {
            // master vanished instead of saying goodbye; closing is all
            // that is left to do
        }
    }
    transport_->close();
}

void Environment::send_task(int worker, const std::vector<std::uint8_t>& payload,
                            std::uint32_t tag) {
    require_open("send_task");
    if (rank_ != 0) {
        throw UsageError("send_task is master-only");
    }
    Envelope envelope{MsgType::Task, tag, payload};
    transport_->send(worker, envelope);
}

Envelope Environment::recv_result(int worker) {
    require_open("recv_result");
    if (rank_ != 0) {
        throw UsageError("recv_result is master-only");
    }
    Envelope envelope = transport_->recv(worker, timeout_);
    if (envelope.msg_type != MsgType::Result) {
        throw ProtocolError("expected RESULT from rank " +
                            std::to_string(worker) + ", got " +
                            msg_type_name(envelope.msg_type));
    }
    return envelope;
}

Envelope Environment::recv_task() {
    require_open("recv_task");
    if (rank_ == 0) {
        throw UsageError("recv_task is worker-only");
    }
    Envelope envelope = transport_->recv(0, timeout_);
    if (envelope.msg_type == MsgType::Shutdown) {
        open_ = false;
        transport_->close();
        return envelope;
    }
    if (envelope.msg_type != MsgType::Task) {
        throw ProtocolError("expected TASK, got " +
                            std::string(msg_type_name(envelope.msg_type)));
    }
    return envelope;
}

void Environment::send_result(const std::vector<std::uint8_t>& payload,
                              std::uint32_t tag) {
    require_open("send_result");
    if (rank_ == 0) {
        throw UsageError("send_result is worker-only");
    }
    Envelope envelope{MsgType::Result, tag, payload};
    transport_->send(0, envelope);
}

std::chrono::milliseconds timeout_from_env(std::chrono::milliseconds fallback) {
    const char* raw = std::getenv("NASF_TIMEOUT_SECS");
    if (!raw) {
        return fallback;
    }
    try {
        const double secs = std::stod(raw);
        if (secs <= 0) {
            return fallback;
        }
        return std::chrono::milliseconds(static_cast<long long>(secs * 1000));
    } catch (const std::exception&) {
        throw ConfigError("NASF_TIMEOUT_SECS is not a number: " +
                          std::string(raw));
    }
}

} // namespace nasf
