#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nasf {

/// Message types of the collective-communication protocol, one byte on the
/// wire.
enum class MsgType : std::uint8_t {
    Hello = 0x01,
    RankAssign = 0x02,
    Barrier = 0x03,
    Bcast = 0x04,
    Allreduce = 0x05,
    Gather = 0x06,
    Task = 0x07,
    Result = 0x08,
    Log = 0x09,
    Shutdown = 0x0A,
};

const char* msg_type_name(MsgType type);

/// Protocol cap on a single payload.
constexpr std::size_t kMaxPayloadBytes = 64ull * 1024 * 1024;

constexpr std::uint32_t kHelloMagic = 0x4E415346;  // "NASF"
constexpr std::uint8_t kProtocolVersion = 0x01;

/// The typed, length-prefixed message unit. Wire form:
///
///   4-byte big-endian payload length
///   1-byte msg_type
///   4-byte big-endian tag
///   payload bytes
///
/// The tag is a sequence number; collectives use it to detect ranks that
/// fell out of step, the task protocol uses it as the task id.
struct Envelope {
    MsgType msg_type = MsgType::Barrier;
    std::uint32_t tag = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const Envelope&) const = default;
};

constexpr std::size_t kEnvelopeHeaderBytes = 9;

std::vector<std::uint8_t> encode_envelope(const Envelope& envelope);

/// Decodes one envelope occupying the whole buffer.
Envelope decode_envelope(const std::vector<std::uint8_t>& bytes);

/// Header split out for streaming transports: parse the 9 header bytes,
/// then read `payload_length` more.
struct EnvelopeHeader {
    std::uint32_t payload_length = 0;
    MsgType msg_type = MsgType::Barrier;
    std::uint32_t tag = 0;
};
void encode_envelope_header(const Envelope& envelope, std::uint8_t* out9);
EnvelopeHeader decode_envelope_header(const std::uint8_t* bytes9);

/// Payload codec for real vectors: 4-byte big-endian element count followed
/// by 8-byte little-endian IEEE-754 doubles (bit patterns preserved, NaNs
/// included).
std::vector<std::uint8_t> encode_doubles(const std::vector<double>& values);
std::vector<double> decode_doubles(const std::vector<std::uint8_t>& payload);

/// Payload codec for a list of byte strings: 4-byte big-endian entry count,
/// then each entry as 4-byte big-endian length plus bytes.
std::vector<std::uint8_t> encode_byte_list(
    const std::vector<std::vector<std::uint8_t>>& entries);
std::vector<std::vector<std::uint8_t>> decode_byte_list(
    const std::vector<std::uint8_t>& payload);

/// HELLO payload: magic then protocol version.
std::vector<std::uint8_t> make_hello_payload();
void validate_hello_payload(const std::vector<std::uint8_t>& payload);

/// RANK_ASSIGN payload: 4-byte big-endian rank, 4-byte big-endian world size.
std::vector<std::uint8_t> make_rank_assign_payload(int rank, int world_size);
void parse_rank_assign_payload(const std::vector<std::uint8_t>& payload,
                               int& rank, int& world_size);

std::vector<std::uint8_t> to_bytes(const std::string& text);
std::string to_string(const std::vector<std::uint8_t>& bytes);

} // namespace nasf
