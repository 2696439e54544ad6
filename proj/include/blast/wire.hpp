#pragma once

// Broker/worker wire protocol v1: each frame is a 4-byte big-endian length
// followed by that many bytes of UTF-8 JSON holding one message object.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace blast::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kDefaultMaxFrame = 16u * 1024u * 1024u;

enum class MessageType { hello, task, result, ping, pong, fin };

std::string_view to_string(MessageType t);
// Throws ProtocolError for anything outside the six message types.
MessageType parse_message_type(std::string_view s);

// Checks the type tag and the fields it requires; returns the type.
MessageType validate_message(const nlohmann::json& m);

nlohmann::json hello(const std::string& worker_id);
nlohmann::json task(std::uint64_t task_id, nlohmann::json payload);
nlohmann::json result_ok(std::uint64_t task_id, nlohmann::json value);
nlohmann::json result_error(std::uint64_t task_id, const std::string& error);
nlohmann::json ping(const std::string& worker_id);
nlohmann::json pong(const std::string& worker_id);
nlohmann::json fin();

std::string frame_encode(const nlohmann::json& message);

// Decodes exactly one complete frame. Throws ProtocolError when the input is
// truncated, carries trailing bytes, exceeds max_frame or is not valid JSON.
nlohmann::json frame_decode(std::string_view bytes, std::size_t max_frame = kDefaultMaxFrame);

// Incremental decoder for a byte stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_frame = kDefaultMaxFrame) : max_frame_(max_frame) {}

  void feed(std::string_view bytes) { buffer_.append(bytes); }
  // Next complete message, if any. Throws ProtocolError on an oversized
  // header or malformed body.
  std::optional<nlohmann::json> next();
  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  std::size_t max_frame_;
  std::string buffer_;
};

}  // namespace blast::wire
