#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cfdm/tensor.hpp"

namespace cfdm {

// Wire format "CFP1": 4-byte magic, u8 version, u8 message tag, u16 reserved,
// u64 session id, u64 round, u32 payload length, payload. All integers are
// little-endian; tensors are serialized as u32 rank, u32 extents, raw f32.

enum class WireErrorCode {
    BadMagic,
    BadVersion,
    BadTag,
    Truncated,
    LengthOverflow,
    PayloadMismatch,
};

class WireError : public std::runtime_error {
public:
    WireError(WireErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    WireErrorCode code() const { return code_; }

private:
    WireErrorCode code_;
};

struct Hello {
    std::uint64_t client_id = 0;
};
struct HelloAck {
    std::uint64_t client_id = 0;
};
struct TriggerDiffusion {
    std::uint32_t batch_size = 0;
};
struct NoisedBatch {
    std::uint64_t client_id = 0;
    TensorF x_t;                          // [n, C, H, W], n may be zero
    TensorF epsilon;                      // same shape as x_t
    std::vector<std::uint32_t> timesteps;  // one per sample
};
struct ServerTrainAck {
    bool no_op = false;  // set for an empty batch; loss is then meaningless
    float loss = 0.0f;
};
struct PartialDenoised {
    std::uint64_t client_id = 0;
    TensorF boundary;  // server-side estimates at the split step
};
struct ClientDone {
    std::uint64_t client_id = 0;
    float loss = 0.0f;
};

using MessageBody = std::variant<Hello, HelloAck, TriggerDiffusion, NoisedBatch, ServerTrainAck,
                                 PartialDenoised, ClientDone>;

struct Message {
    std::uint64_t session = 0;
    std::uint64_t round = 0;
    MessageBody body;
};

constexpr std::size_t kWireHeaderSize = 28;
constexpr std::uint32_t kWireMaxPayload = 1u << 30;

std::vector<std::uint8_t> encode(const Message& msg);
Message decode(const std::uint8_t* data, std::size_t size);
Message decode(const std::vector<std::uint8_t>& frame);

// Validates a header prefix and returns the declared payload length; used by
// stream transports to frame reads.
std::uint32_t frame_payload_length(const std::uint8_t* header, std::size_t size);

const char* message_tag_name(const Message& msg);

bool messages_equal(const Message& a, const Message& b);

}  // namespace cfdm
