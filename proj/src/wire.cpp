#include "cfdm/wire.hpp"

#include <cstring>

namespace cfdm {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'P', '1'};
constexpr std::uint8_t kVersion = 1;
constexpr Index kMaxRank = 8;
constexpr std::uint32_t kMaxExtent = 1u << 24;

enum Tag : std::uint8_t {
    kHello = 0x01,
    kHelloAck = 0x02,
    kTriggerDiffusion = 0x03,
    kNoisedBatch = 0x04,
    kServerTrainAck = 0x05,
    kPartialDenoised = 0x06,
    kClientDone = 0x07,
};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void tensor(const TensorF& t) {
        u32(static_cast<std::uint32_t>(t.rank()));
        for (Index a = 0; a < t.rank(); ++a) u32(static_cast<std::uint32_t>(t.extent(a)));
        const std::size_t bytes = static_cast<std::size_t>(t.size()) * 4;
        const std::size_t off = buf_.size();
        buf_.resize(off + bytes);
        if (bytes) std::memcpy(buf_.data() + off, t.data(), bytes);
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        const auto* p = take(2);
        return static_cast<std::uint16_t>(p[0] | p[1] << 8);
    }
    std::uint32_t u32() {
        const auto* p = take(4);
        return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
               static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
    }
    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | hi << 32;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    TensorF tensor() {
        const std::uint32_t rank = u32();
        if (rank > kMaxRank)
            throw WireError(WireErrorCode::LengthOverflow,
                            "tensor rank " + std::to_string(rank) + " exceeds limit");
        Shape shape;
        std::uint64_t numel = 1;
        for (std::uint32_t a = 0; a < rank; ++a) {
            const std::uint32_t e = u32();
            if (e > kMaxExtent)
                throw WireError(WireErrorCode::LengthOverflow, "tensor extent exceeds limit");
            shape.push_back(static_cast<Index>(e));
            numel *= e;
        }
        if (numel * 4 > remaining())
            throw WireError(WireErrorCode::Truncated, "tensor data extends past frame end");
        TensorF t(shape);
        if (numel) {
            std::memcpy(t.data(), data_ + pos_, static_cast<std::size_t>(numel) * 4);
            pos_ += static_cast<std::size_t>(numel) * 4;
        }
        return t;
    }
    std::size_t remaining() const { return size_ - pos_; }
    void expect_end() const {
        if (pos_ != size_)
            throw WireError(WireErrorCode::PayloadMismatch,
                            "payload has " + std::to_string(size_ - pos_) + " trailing bytes");
    }

private:
    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > size_)
            throw WireError(WireErrorCode::Truncated, "frame shorter than declared content");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint8_t tag_of(const MessageBody& body) {
    return std::visit(
        [](const auto& b) -> std::uint8_t {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, Hello>) return kHello;
            if constexpr (std::is_same_v<T, HelloAck>) return kHelloAck;
            if constexpr (std::is_same_v<T, TriggerDiffusion>) return kTriggerDiffusion;
            if constexpr (std::is_same_v<T, NoisedBatch>) return kNoisedBatch;
            if constexpr (std::is_same_v<T, ServerTrainAck>) return kServerTrainAck;
            if constexpr (std::is_same_v<T, PartialDenoised>) return kPartialDenoised;
            if constexpr (std::is_same_v<T, ClientDone>) return kClientDone;
        },
        body);
}

void check_noised_batch(const NoisedBatch& nb) {
    if (nb.x_t.rank() != 4 || nb.epsilon.rank() != 4)
        throw WireError(WireErrorCode::PayloadMismatch, "NoisedBatch tensors must be rank 4");
    if (!nb.x_t.same_shape(nb.epsilon))
        throw WireError(WireErrorCode::PayloadMismatch,
                        "NoisedBatch x_t and epsilon shapes differ");
    if (nb.x_t.extent(0) != static_cast<Index>(nb.timesteps.size()))
        throw WireError(WireErrorCode::PayloadMismatch,
                        "NoisedBatch timestep count does not match batch extent");
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& msg) {
    Writer payload;
    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, Hello>) {
                payload.u64(b.client_id);
            } else if constexpr (std::is_same_v<T, HelloAck>) {
                payload.u64(b.client_id);
            } else if constexpr (std::is_same_v<T, TriggerDiffusion>) {
                payload.u32(b.batch_size);
            } else if constexpr (std::is_same_v<T, NoisedBatch>) {
                check_noised_batch(b);
                payload.u64(b.client_id);
                payload.tensor(b.x_t);
                payload.tensor(b.epsilon);
                payload.u32(static_cast<std::uint32_t>(b.timesteps.size()));
                for (std::uint32_t t : b.timesteps) payload.u32(t);
            } else if constexpr (std::is_same_v<T, ServerTrainAck>) {
                payload.u8(b.no_op ? 1 : 0);
                payload.f32(b.loss);
            } else if constexpr (std::is_same_v<T, PartialDenoised>) {
                payload.u64(b.client_id);
                payload.tensor(b.boundary);
            } else if constexpr (std::is_same_v<T, ClientDone>) {
                payload.u64(b.client_id);
                payload.f32(b.loss);
            }
        },
        msg.body);

    std::vector<std::uint8_t> body = payload.take();
    if (body.size() > kWireMaxPayload)
        throw WireError(WireErrorCode::LengthOverflow, "payload exceeds frame limit");

    Writer frame;
    for (char ch : kMagic) frame.u8(static_cast<std::uint8_t>(ch));
    frame.u8(kVersion);
    frame.u8(tag_of(msg.body));
    frame.u16(0);
    frame.u64(msg.session);
    frame.u64(msg.round);
    frame.u32(static_cast<std::uint32_t>(body.size()));
    std::vector<std::uint8_t> out = frame.take();
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::uint32_t frame_payload_length(const std::uint8_t* header, std::size_t size) {
    if (size < kWireHeaderSize)
        throw WireError(WireErrorCode::Truncated, "frame shorter than header");
    if (std::memcmp(header, kMagic, 4) != 0)
        throw WireError(WireErrorCode::BadMagic, "bad magic");
    if (header[4] != kVersion)
        throw WireError(WireErrorCode::BadVersion,
                        "unsupported version " + std::to_string(header[4]));
    const std::uint32_t len =
        static_cast<std::uint32_t>(header[24]) | static_cast<std::uint32_t>(header[25]) << 8 |
        static_cast<std::uint32_t>(header[26]) << 16 |
        static_cast<std::uint32_t>(header[27]) << 24;
    if (len > kWireMaxPayload)
        throw WireError(WireErrorCode::LengthOverflow, "declared payload exceeds frame limit");
    return len;
}

Message decode(const std::uint8_t* data, std::size_t size) {
    const std::uint32_t payload_len = frame_payload_length(data, size);
    if (size < kWireHeaderSize + payload_len)
        throw WireError(WireErrorCode::Truncated,
                        "frame declares " + std::to_string(payload_len) + " payload bytes, " +
                            std::to_string(size - kWireHeaderSize) + " available");
    if (size > kWireHeaderSize + payload_len)
        throw WireError(WireErrorCode::PayloadMismatch, "frame longer than declared length");

    Reader header(data, kWireHeaderSize);
    header.u32();  // magic, validated above
    header.u8();   // version
    const std::uint8_t tag = header.u8();
    header.u16();  // reserved
    Message msg;
    msg.session = header.u64();
    msg.round = header.u64();

    Reader r(data + kWireHeaderSize, payload_len);
    switch (tag) {
        case kHello:
            msg.body = Hello{r.u64()};
            break;
        case kHelloAck:
            msg.body = HelloAck{r.u64()};
            break;
        case kTriggerDiffusion:
            msg.body = TriggerDiffusion{r.u32()};
            break;
        case kNoisedBatch: {
            NoisedBatch nb;
            nb.client_id = r.u64();
            nb.x_t = r.tensor();
            nb.epsilon = r.tensor();
            const std::uint32_t count = r.u32();
            if (static_cast<std::uint64_t>(count) * 4 > r.remaining())
                throw WireError(WireErrorCode::Truncated, "timestep list extends past frame end");
            nb.timesteps.reserve(count);
            for (std::uint32_t i = 0; i < count; ++i) nb.timesteps.push_back(r.u32());
            check_noised_batch(nb);
            msg.body = std::move(nb);
            break;
        }
        case kServerTrainAck: {
            ServerTrainAck ack;
            ack.no_op = r.u8() != 0;
            ack.loss = r.f32();
            msg.body = ack;
            break;
        }
        case kPartialDenoised: {
            PartialDenoised pd;
            pd.client_id = r.u64();
            pd.boundary = r.tensor();
            msg.body = std::move(pd);
            break;
        }
        case kClientDone: {
            ClientDone done;
            done.client_id = r.u64();
            done.loss = r.f32();
            msg.body = done;
            break;
        }
        default:
            throw WireError(WireErrorCode::BadTag, "unknown message tag " + std::to_string(tag));
    }
    r.expect_end();
    return msg;
}

Message decode(const std::vector<std::uint8_t>& frame) { return decode(frame.data(), frame.size()); }

const char* message_tag_name(const Message& msg) {
    switch (tag_of(msg.body)) {
        case kHello: return "Hello";
        case kHelloAck: return "HelloAck";
        case kTriggerDiffusion: return "TriggerDiffusion";
        case kNoisedBatch: return "NoisedBatch";
        case kServerTrainAck: return "ServerTrainAck";
        case kPartialDenoised: return "PartialDenoised";
        case kClientDone: return "ClientDone";
    }
    return "?";
}

namespace {
bool tensors_equal(const TensorF& a, const TensorF& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * 4) == 0;
}
}  // namespace

bool messages_equal(const Message& a, const Message& b) {
    if (a.session != b.session || a.round != b.round) return false;
    if (a.body.index() != b.body.index()) return false;
    return std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.body);
            if constexpr (std::is_same_v<T, Hello> || std::is_same_v<T, HelloAck>) {
                return x.client_id == y.client_id;
            } else if constexpr (std::is_same_v<T, TriggerDiffusion>) {
                return x.batch_size == y.batch_size;
            } else if constexpr (std::is_same_v<T, NoisedBatch>) {
                return x.client_id == y.client_id && tensors_equal(x.x_t, y.x_t) &&
                       tensors_equal(x.epsilon, y.epsilon) && x.timesteps == y.timesteps;
            } else if constexpr (std::is_same_v<T, ServerTrainAck>) {
                return x.no_op == y.no_op && x.loss == y.loss;
            } else if constexpr (std::is_same_v<T, PartialDenoised>) {
                return x.client_id == y.client_id && tensors_equal(x.boundary, y.boundary);
            } else if constexpr (std::is_same_v<T, ClientDone>) {
                return x.client_id == y.client_id && x.loss == y.loss;
            }
        },
        a.body);
}

}  // namespace cfdm
