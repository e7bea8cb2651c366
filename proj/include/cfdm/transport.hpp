#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cfdm {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Transport contract: ordered, reliable delivery of whole frames within one
// session. Implementations must preserve FIFO order per direction.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(std::vector<std::uint8_t> frame) = 0;
    virtual std::vector<std::uint8_t> recv() = 0;  // throws TransportError when unavailable
    virtual std::uint64_t bytes_sent() const = 0;
};

// One captured frame, for traffic audits.
struct RecordedFrame {
    bool from_client = false;
    std::vector<std::uint8_t> bytes;
};

// Length-framed byte stream over a connected socket; reads one CFP1 frame at
// a time. Owns the file descriptor.
class SocketTransport : public Transport {
public:
    explicit SocketTransport(int fd);
    ~SocketTransport() override;
    SocketTransport(const SocketTransport&) = delete;
    SocketTransport& operator=(const SocketTransport&) = delete;

    void send(std::vector<std::uint8_t> frame) override;
    std::vector<std::uint8_t> recv() override;
    std::uint64_t bytes_sent() const override { return bytes_sent_; }

private:
    int fd_;
    std::uint64_t bytes_sent_ = 0;
};

// Loopback TCP helpers for the socket integration tests.
int listen_on_loopback(std::uint16_t* port_out);
int accept_one(int listen_fd);
int connect_loopback(std::uint16_t port);

}  // namespace cfdm
