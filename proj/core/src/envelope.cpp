#include "nasf/envelope.hpp"

#include <bit>
#include <cstring>

#include "nasf/errors.hpp"

namespace nasf {

namespace {

void put_u32_be(std::uint32_t v, std::uint8_t* out) {
    out[0] = static_cast<std::uint8_t>(v >> 24);
    out[1] = static_cast<std::uint8_t>(v >> 16);
    out[2] = static_cast<std::uint8_t>(v >> 8);
    out[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_u32_be(const std::uint8_t* in) {
    return (static_cast<std::uint32_t>(in[0]) << 24) |
           (static_cast<std::uint32_t>(in[1]) << 16) |
           (static_cast<std::uint32_t>(in[2]) << 8) |
           static_cast<std::uint32_t>(in[3]);
}

bool known_msg_type(std::uint8_t byte) {
    return byte >= static_cast<std::uint8_t>(MsgType::Hello) &&
           byte <= static_cast<std::uint8_t>(MsgType::Shutdown);
}

} // namespace

const char* msg_type_name(MsgType type) {
    switch (type) {
        case MsgType::Hello: return "HELLO";
        case MsgType::RankAssign: return "RANK_ASSIGN";
        case MsgType::Barrier: return "BARRIER";
        case MsgType::Bcast: return "BCAST";
        case MsgType::Allreduce: return "ALLREDUCE";
        case MsgType::Gather: return "GATHER";
        case MsgType::Task: return "TASK";
        case MsgType::Result: return "RESULT";
        case MsgType::Log: return "LOG";
        case MsgType::Shutdown: return "SHUTDOWN";
    }
    return "UNKNOWN";
}

void encode_envelope_header(const Envelope& envelope, std::uint8_t* out9) {
    if (envelope.payload.size() > kMaxPayloadBytes) {
        throw ProtocolError("payload of " + std::to_string(envelope.payload.size()) +
                            " bytes exceeds the 64 MiB protocol cap");
    }
    put_u32_be(static_cast<std::uint32_t>(envelope.payload.size()), out9);
    out9[4] = static_cast<std::uint8_t>(envelope.msg_type);
    put_u32_be(envelope.tag, out9 + 5);
}

EnvelopeHeader decode_envelope_header(const std::uint8_t* bytes9) {
    EnvelopeHeader header;
    header.payload_length = get_u32_be(bytes9);
    if (header.payload_length > kMaxPayloadBytes) {
        throw ProtocolError("framed payload of " +
                            std::to_string(header.payload_length) +
                            " bytes exceeds the 64 MiB protocol cap");
    }
    if (!known_msg_type(bytes9[4])) {
        throw ProtocolError("unknown message type byte " +
                            std::to_string(bytes9[4]));
    }
    header.msg_type = static_cast<MsgType>(bytes9[4]);
    header.tag = get_u32_be(bytes9 + 5);
    return header;
}

std::vector<std::uint8_t> encode_envelope(const Envelope& envelope) {
    std::vector<std::uint8_t> out(kEnvelopeHeaderBytes + envelope.payload.size());
    encode_envelope_header(envelope, out.data());
    std::memcpy(out.data() + kEnvelopeHeaderBytes, envelope.payload.data(),
                envelope.payload.size());
    return out;
}

Envelope decode_envelope(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kEnvelopeHeaderBytes) {
        throw ProtocolError("envelope shorter than its 9-byte header");
    }
    const EnvelopeHeader header = decode_envelope_header(bytes.data());
    if (bytes.size() != kEnvelopeHeaderBytes + header.payload_length) {
        throw ProtocolError("envelope length mismatch: header says " +
                            std::to_string(header.payload_length) +
                            " payload bytes, buffer has " +
                            std::to_string(bytes.size() - kEnvelopeHeaderBytes));
    }
    Envelope envelope;
    envelope.msg_type = header.msg_type;
    envelope.tag = header.tag;
    envelope.payload.assign(bytes.begin() + kEnvelopeHeaderBytes, bytes.end());
    return envelope;
}

std::vector<std::uint8_t> encode_doubles(const std::vector<double>& values) {
    std::vector<std::uint8_t> out(4 + values.size() * 8);
    put_u32_be(static_cast<std::uint32_t>(values.size()), out.data());
    std::uint8_t* p = out.data() + 4;
    for (double v : values) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            p[i] = static_cast<std::uint8_t>(bits >> (8 * i));  // little-endian
        }
        p += 8;
    }
    return out;
}

std::vector<double> decode_doubles(const std::vector<std::uint8_t>& payload) {
    if (payload.size() < 4) {
        throw ProtocolError("double-vector payload shorter than its count prefix");
    }
    const std::uint32_t count = get_u32_be(payload.data());
    if (payload.size() != 4 + static_cast<std::size_t>(count) * 8) {
        throw ProtocolError("double-vector payload length mismatch");
    }
    std::vector<double> values(count);
    const std::uint8_t* p = payload.data() + 4;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
        }
        values[i] = std::bit_cast<double>(bits);
        p += 8;
    }
    return values;
}

std::vector<std::uint8_t> encode_byte_list(
    const std::vector<std::vector<std::uint8_t>>& entries) {
    std::size_t total = 4;
    for (const auto& e : entries) total += 4 + e.size();
    std::vector<std::uint8_t> out(total);
    put_u32_be(static_cast<std::uint32_t>(entries.size()), out.data());
    std::size_t offset = 4;
    for (const auto& e : entries) {
        put_u32_be(static_cast<std::uint32_t>(e.size()), out.data() + offset);
        offset += 4;
        std::memcpy(out.data() + offset, e.data(), e.size());
        offset += e.size();
    }
    return out;
}

std::vector<std::vector<std::uint8_t>> decode_byte_list(
    const std::vector<std::uint8_t>& payload) {
    if (payload.size() < 4) {
        throw ProtocolError("byte-list payload shorter than its count prefix");
    }
    const std::uint32_t count = get_u32_be(payload.data());
    std::vector<std::vector<std::uint8_t>> entries;
    entries.reserve(count);
    std::size_t offset = 4;
    for (std::uint32_t i = 0; i < count; ++i) {
        if (offset + 4 > payload.size()) {
            throw ProtocolError("byte-list payload truncated");
        }
        const std::uint32_t len = get_u32_be(payload.data() + offset);
        offset += 4;
        if (offset + len > payload.size()) {
            throw ProtocolError("byte-list payload truncated");
        }
        entries.emplace_back(payload.begin() + offset,
                             payload.begin() + offset + len);
        offset += len;
    }
    if (offset != payload.size()) {
        throw ProtocolError("byte-list payload has trailing bytes");
    }
    return entries;
}

std::vector<std::uint8_t> make_hello_payload() {
    std::vector<std::uint8_t> payload(5);
    put_u32_be(kHelloMagic, payload.data());
    payload[4] = kProtocolVersion;
    return payload;
}

void validate_hello_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() != 5) {
        throw ProtocolError("HELLO payload must be 5 bytes, got " +
                            std::to_string(payload.size()));
    }
    const std::uint32_t magic = get_u32_be(payload.data());
    if (magic != kHelloMagic) {
        throw ProtocolError("HELLO magic mismatch");
    }
    if (payload[4] != kProtocolVersion) {
        throw ProtocolError("HELLO protocol version " +
                            std::to_string(payload[4]) + " unsupported, expected " +
                            std::to_string(kProtocolVersion));
    }
}

std::vector<std::uint8_t> make_rank_assign_payload(int rank, int world_size) {
    std::vector<std::uint8_t> payload(8);
    put_u32_be(static_cast<std::uint32_t>(rank), payload.data());
    put_u32_be(static_cast<std::uint32_t>(world_size), payload.data() + 4);
    return payload;
}

void parse_rank_assign_payload(const std::vector<std::uint8_t>& payload,
                               int& rank, int& world_size) {
    if (payload.size() != 8) {
        throw ProtocolError("RANK_ASSIGN payload must be 8 bytes");
    }
    rank = static_cast<int>(get_u32_be(payload.data()));
    world_size = static_cast<int>(get_u32_be(payload.data() + 4));
}

std::vector<std::uint8_t> to_bytes(const std::string& text) {
    return std::vector<std::uint8_t>(text.begin(), text.end());
}

std::string to_string(const std::vector<std::uint8_t>& bytes) {
    return std::string(bytes.begin(), bytes.end());
}

} // namespace nasf
