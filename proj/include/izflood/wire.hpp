#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "izflood/common.hpp"

namespace izflood {

/// Lockstep co-simulation speaks length-prefixed binary frames:
///
///   offset  size  field (little endian)
///        0     2  protocol version (currently 1)
///        2     2  message kind
///        4     8  sequence number, strictly increasing per direction
///       12     8  simulation time, IEEE-754 binary64 seconds
///       20     8  payload length in bytes (a multiple of 8)
///       28     -  payload: packed binary64 values
///
/// Payloads by kind:
///   hello              6 values: zone count, column count, surface dt,
///                      subsurface dt, coupling dt, end time
///   surface_state      per-zone absolute water levels (m)
///   subsurface_result  per-zone exchange rates (m/s, positive feeds the
///                      surface) followed by per-column h_filtr (m)
///   halt               empty
///   error              1 value: an ErrorCode
enum class MsgKind : std::uint16_t {
  hello = 0,
  surface_state = 1,
  subsurface_result = 2,
  halt = 3,
  error = 4,
};

enum class ErrorCode : int {
  geometry_mismatch = 1,
  version_mismatch = 2,
  sequence_gap = 3,
  internal = 4,
};

constexpr std::uint16_t kWireVersion = 1;
constexpr std::size_t kHeaderBytes = 28;
constexpr std::uint64_t kMaxPayloadBytes = std::uint64_t(1) << 27;  // 128 MiB

struct CouplingMessage {
  MsgKind kind = MsgKind::hello;
  std::uint64_t seq = 0;
  double t = 0.0;
  std::vector<double> payload;

  bool operator==(const CouplingMessage&) const = default;
};

/// Message -> one complete frame (header + payload).
std::vector<std::uint8_t> encode_message(const CouplingMessage& msg);

/// One complete frame -> message. Truncation, trailing bytes, a foreign
/// version, an unknown kind, or a corrupt payload length all raise
/// ProtocolError; decode(encode(m)) == m bit for bit.
CouplingMessage decode_message(const std::uint8_t* data, std::size_t size);

/// Payload byte count promised by a 28-byte header, after validating
/// version, kind and the length field itself.
std::uint64_t decode_payload_bytes(const std::uint8_t* header);

/// "host:port" -> parts; an empty host means every local interface.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

/// Move-only wrapper over a connected stream socket. Receives past the
/// deadline raise PeerTimeout; a closed peer raises ProtocolError.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool open() const { return fd_ >= 0; }
  void close();
  void set_timeout(double seconds);  // applies to both directions; 0 = none

  void send_all(const void* data, std::size_t size);
  void recv_exact(void* data, std::size_t size);

 private:
  int fd_ = -1;
};

/// Outbound connection to host:port (numeric or resolvable name).
Socket connect_peer(const std::string& endpoint, double timeout_s = 60.0);

/// Bound, listening endpoint; port 0 picks a free one (see port()).
class Listener {
 public:
  explicit Listener(const std::string& endpoint);
  ~Listener();
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&&) = delete;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  Socket accept_peer(double timeout_s = 60.0);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Frame I/O over a socket; read_frame validates the header before trusting
/// the length and never allocates more than the payload cap.
void write_frame(Socket& sock, const CouplingMessage& msg);
CouplingMessage read_frame(Socket& sock);

}  // namespace izflood
