#include "cfdm/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cfdm/wire.hpp"

namespace cfdm {

class InProcessLink::Endpoint : public Transport {
public:
    Endpoint(InProcessLink& link, bool is_client) : link_(link), is_client_(is_client) {}

    void send(std::vector<std::uint8_t> frame) override {
        bytes_sent_ += frame.size();
        if (link_.record_) link_.recorded_.push_back({is_client_, frame});
        (is_client_ ? link_.to_server_ : link_.to_client_).push_back(std::move(frame));
    }

    std::vector<std::uint8_t> recv() override {
        auto& q = is_client_ ? link_.to_client_ : link_.to_server_;
        if (q.empty())
            throw TransportError(is_client_ ? "client recv on empty queue"
                                            : "server recv on empty queue");
        std::vector<std::uint8_t> frame = std::move(q.front());
        q.pop_front();
        return frame;
    }

    std::uint64_t bytes_sent() const override { return bytes_sent_; }

private:
    InProcessLink& link_;
    bool is_client_;
    std::uint64_t bytes_sent_ = 0;
};

InProcessLink::InProcessLink(bool record)
    : record_(record),
      client_(std::make_unique<Endpoint>(*this, true)),
      server_(std::make_unique<Endpoint>(*this, false)) {}

Transport& InProcessLink::client_end() { return *client_; }
Transport& InProcessLink::server_end() { return *server_; }

SocketTransport::SocketTransport(int fd) : fd_(fd) {
    if (fd_ < 0) throw TransportError("invalid socket descriptor");
}

SocketTransport::~SocketTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void SocketTransport::send(std::vector<std::uint8_t> frame) {
    std::size_t off = 0;
    while (off < frame.size()) {
        const ssize_t n = ::write(fd_, frame.data() + off, frame.size() - off);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            throw TransportError(std::string("socket write failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    bytes_sent_ += frame.size();
}

std::vector<std::uint8_t> SocketTransport::recv() {
    auto read_exact = [&](std::uint8_t* dst, std::size_t n) {
        std::size_t off = 0;
        while (off < n) {
            const ssize_t r = ::read(fd_, dst + off, n - off);
            if (r == 0) throw TransportError("socket closed mid-frame");
            if (r < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("socket read failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(r);
        }
    };
    std::vector<std::uint8_t> frame(kWireHeaderSize);
    read_exact(frame.data(), kWireHeaderSize);
    const std::uint32_t payload = frame_payload_length(frame.data(), frame.size());
    frame.resize(kWireHeaderSize + payload);
    if (payload) read_exact(frame.data() + kWireHeaderSize, payload);
    return frame;
}

int listen_on_loopback(std::uint16_t* port_out) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(fd, 8) < 0) {
        ::close(fd);
        throw TransportError("bind/listen failed");
    }
    socklen_t len = sizeof(addr);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
        ::close(fd);
        throw TransportError("getsockname failed");
    }
    if (port_out) *port_out = ntohs(addr.sin_port);
    return fd;
}

int accept_one(int listen_fd) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) throw TransportError("accept failed");
    return fd;
}

int connect_loopback(std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        throw TransportError("connect failed");
    }
    return fd;
}

}  // namespace cfdm
