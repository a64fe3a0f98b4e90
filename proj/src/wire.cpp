#include "izflood/wire.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <utility>

namespace izflood {

// ---------------------------------------------------------------------------
// codec
// ---------------------------------------------------------------------------

namespace {

void store_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = std::uint8_t(v);
  p[1] = std::uint8_t(v >> 8);
}

void store_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = std::uint8_t(v >> (8 * i));
}

std::uint16_t load_u16(const std::uint8_t* p) {
  return std::uint16_t(p[0] | (std::uint16_t(p[1]) << 8));
}

std::uint64_t load_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

void store_f64(std::uint8_t* p, double v) { store_u64(p, std::bit_cast<std::uint64_t>(v)); }
double load_f64(const std::uint8_t* p) { return std::bit_cast<double>(load_u64(p)); }

}  // namespace

std::vector<std::uint8_t> encode_message(const CouplingMessage& msg) {
  const std::size_t n = msg.payload.size();
  std::vector<std::uint8_t> out(kHeaderBytes + 8 * n);
  store_u16(&out[0], kWireVersion);
  store_u16(&out[2], std::uint16_t(msg.kind));
  store_u64(&out[4], msg.seq);
  store_f64(&out[12], msg.t);
  store_u64(&out[20], std::uint64_t(8 * n));
  for (std::size_t i = 0; i < n; ++i) store_f64(&out[kHeaderBytes + 8 * i], msg.payload[i]);
  return out;
}

std::uint64_t decode_payload_bytes(const std::uint8_t* header) {
  std::uint16_t version = load_u16(header);
  if (version != kWireVersion)
    throw ProtocolError("protocol version mismatch: peer speaks " + std::to_string(version) +
                        ", this build speaks " + std::to_string(kWireVersion));
  std::uint16_t kind = load_u16(header + 2);
  if (kind > std::uint16_t(MsgKind::error))
    throw ProtocolError("unknown message kind " + std::to_string(kind));
  std::uint64_t bytes = load_u64(header + 20);
  if (bytes % 8 != 0 || bytes > kMaxPayloadBytes)
    throw ProtocolError("corrupt payload length " + std::to_string(bytes));
  return bytes;
}

CouplingMessage decode_message(const std::uint8_t* data, std::size_t size) {
  if (size < kHeaderBytes)
    throw ProtocolError("truncated frame: " + std::to_string(size) + " bytes, header needs " +
                        std::to_string(kHeaderBytes));
  std::uint64_t bytes = decode_payload_bytes(data);
  if (size != kHeaderBytes + bytes)
    throw ProtocolError("frame length mismatch: header promises " + std::to_string(bytes) +
                        " payload bytes, frame carries " + std::to_string(size - kHeaderBytes));
  CouplingMessage msg;
  msg.kind = MsgKind(load_u16(data + 2));
  msg.seq = load_u64(data + 4);
  msg.t = load_f64(data + 12);
  msg.payload.resize(bytes / 8);
  for (std::size_t i = 0; i < msg.payload.size(); ++i)
    msg.payload[i] = load_f64(data + kHeaderBytes + 8 * i);
  return msg;
}

// ---------------------------------------------------------------------------
// transport
// ---------------------------------------------------------------------------

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
  std::size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos)
    throw ValidationError("endpoint must look like host:port, got '" + endpoint + "'");
  std::string host = endpoint.substr(0, colon);
  std::string portstr = endpoint.substr(colon + 1);
  if (portstr.empty() || portstr.find_first_not_of("0123456789") != std::string::npos)
    throw ValidationError("endpoint port must be numeric, got '" + portstr + "'");
  unsigned long port = std::stoul(portstr);
  if (port > 65535) throw ValidationError("endpoint port out of range: " + portstr);
  return {host, std::uint16_t(port)};
}

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::set_timeout(double seconds) {
  if (fd_ < 0) throw ProtocolError("socket is closed");
  if (seconds < 0.0) seconds = 0.0;
  timeval tv;
  tv.tv_sec = time_t(seconds);
  tv.tv_usec = suseconds_t((seconds - double(tv.tv_sec)) * 1e6);
  if (setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv) != 0 ||
      setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv) != 0)
    throw ProtocolError(std::string("setsockopt failed: ") + std::strerror(errno));
}

void Socket::send_all(const void* data, std::size_t size) {
  if (fd_ < 0) throw ProtocolError("socket is closed");
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (size > 0) {
    ssize_t n = ::send(fd_, p, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw PeerTimeout("send timed out");
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    p += n;
    size -= std::size_t(n);
  }
}

void Socket::recv_exact(void* data, std::size_t size) {
  if (fd_ < 0) throw ProtocolError("socket is closed");
  auto* p = static_cast<std::uint8_t*>(data);
  while (size > 0) {
    ssize_t n = ::recv(fd_, p, size, 0);
    if (n == 0) throw ProtocolError("peer closed the connection");
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw PeerTimeout("receive timed out");
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    p += n;
    size -= std::size_t(n);
  }
}

namespace {

struct AddrInfo {  // RAII over getaddrinfo results
  addrinfo* res = nullptr;
  ~AddrInfo() {
    if (res) freeaddrinfo(res);
  }
};

AddrInfo resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  AddrInfo out;
  std::string service = std::to_string(port);
  int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &out.res);
  if (rc != 0)
    throw ProtocolError("cannot resolve '" + host + "': " + gai_strerror(rc));
  return out;
}

}  // namespace

Socket connect_peer(const std::string& endpoint, double timeout_s) {
  auto [host, port] = parse_endpoint(endpoint);
  if (host.empty()) host = "127.0.0.1";
  AddrInfo ai = resolve(host, port, false);
  std::string last_error = "no addresses";
  for (addrinfo* a = ai.res; a; a = a->ai_next) {
    int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      Socket sock(fd);
      sock.set_timeout(timeout_s);
      return sock;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  throw ProtocolError("cannot connect to " + endpoint + ": " + last_error);
}

Listener::Listener(const std::string& endpoint) {
  auto [host, port] = parse_endpoint(endpoint);
  AddrInfo ai = resolve(host, port, true);
  std::string last_error = "no addresses";
  for (addrinfo* a = ai.res; a; a = a->ai_next) {
    int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 1) == 0) {
      sockaddr_storage local{};
      socklen_t len = sizeof local;
      if (getsockname(fd, reinterpret_cast<sockaddr*>(&local), &len) == 0) {
        if (local.ss_family == AF_INET)
          port_ = ntohs(reinterpret_cast<sockaddr_in*>(&local)->sin_port);
        else if (local.ss_family == AF_INET6)
          port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&local)->sin6_port);
      }
      fd_ = fd;
      return;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  throw ProtocolError("cannot listen on " + endpoint + ": " + last_error);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

Listener::Listener(Listener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
}

Socket Listener::accept_peer(double timeout_s) {
  if (fd_ < 0) throw ProtocolError("listener is closed");
  pollfd pfd{fd_, POLLIN, 0};
  int ms = timeout_s <= 0.0 ? -1 : int(std::ceil(timeout_s * 1000.0));
  int rc = ::poll(&pfd, 1, ms);
  if (rc == 0) throw PeerTimeout("no peer connected within the accept timeout");
  if (rc < 0) throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
  int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw ProtocolError(std::string("accept failed: ") + std::strerror(errno));
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  Socket sock(fd);
  sock.set_timeout(timeout_s);
  return sock;
}

void write_frame(Socket& sock, const CouplingMessage& msg) {
  std::vector<std::uint8_t> frame = encode_message(msg);
  sock.send_all(frame.data(), frame.size());
}

CouplingMessage read_frame(Socket& sock) {
  std::uint8_t header[kHeaderBytes];
  sock.recv_exact(header, kHeaderBytes);
  std::uint64_t bytes = decode_payload_bytes(header);
  std::vector<std::uint8_t> frame(kHeaderBytes + bytes);
  std::memcpy(frame.data(), header, kHeaderBytes);
  if (bytes > 0) sock.recv_exact(frame.data() + kHeaderBytes, bytes);
  return decode_message(frame.data(), frame.size());
}

}  // namespace izflood
