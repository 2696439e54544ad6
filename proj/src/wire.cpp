#include "blast/wire.hpp"

#include "blast/error.hpp"

namespace blast::wire {

using nlohmann::json;

namespace {

std::uint32_t read_be32(std::string_view b) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

json parse_body(std::string_view body) {
  json m = json::parse(body.begin(), body.end(), nullptr, false);
  if (m.is_discarded()) throw ProtocolError("frame body is not valid JSON");
  validate_message(m);
  return m;
}

void require(const json& m, const char* field, bool ok) {
  if (!m.contains(field) || !ok) throw ProtocolError(std::string("message field '") + field + "' missing or invalid");
}

}  // namespace

std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::hello: return "HELLO";
    case MessageType::task: return "TASK";
    case MessageType::result: return "RESULT";
    case MessageType::ping: return "PING";
    case MessageType::pong: return "PONG";
    case MessageType::fin: return "FIN";
  }
  return "?";
}

MessageType parse_message_type(std::string_view s) {
  if (s == "HELLO") return MessageType::hello;
  if (s == "TASK") return MessageType::task;
  if (s == "RESULT") return MessageType::result;
  if (s == "PING") return MessageType::ping;
  if (s == "PONG") return MessageType::pong;
  if (s == "FIN") return MessageType::fin;
  throw ProtocolError("unknown message type '" + std::string(s) + "'");
}

MessageType validate_message(const json& m) {
  if (!m.is_object() || !m.contains("type") || !m["type"].is_string()) {
    throw ProtocolError("message must be an object with a string 'type'");
  }
  const MessageType t = parse_message_type(m["type"].get<std::string>());
  switch (t) {
    case MessageType::hello:
      require(m, "worker_id", m.contains("worker_id") && m["worker_id"].is_string());
      require(m, "protocol_version", m.contains("protocol_version") && m["protocol_version"].is_number_integer());
      break;
    case MessageType::task:
      require(m, "task_id", m.contains("task_id") && m["task_id"].is_number_unsigned());
      require(m, "payload", true);
      break;
    case MessageType::result:
      require(m, "task_id", m.contains("task_id") && m["task_id"].is_number_unsigned());
      require(m, "ok", m.contains("ok") && m["ok"].is_boolean());
      if (m["ok"].get<bool>()) {
        require(m, "value", true);
      } else {
        require(m, "error", m.contains("error") && m["error"].is_string());
      }
      break;
    case MessageType::ping:
    case MessageType::pong:
      require(m, "worker_id", m.contains("worker_id") && m["worker_id"].is_string());
      break;
    case MessageType::fin:
      break;
  }
  return t;
}

json hello(const std::string& worker_id) {
  return {{"type", "HELLO"}, {"worker_id", worker_id}, {"protocol_version", kProtocolVersion}};
}
json task(std::uint64_t task_id, json payload) {
  return {{"type", "TASK"}, {"task_id", task_id}, {"payload", std::move(payload)}};
}
json result_ok(std::uint64_t task_id, json value) {
  return {{"type", "RESULT"}, {"task_id", task_id}, {"ok", true}, {"value", std::move(value)}};
}
json result_error(std::uint64_t task_id, const std::string& error) {
  return {{"type", "RESULT"}, {"task_id", task_id}, {"ok", false}, {"error", error}};
}
json ping(const std::string& worker_id) { return {{"type", "PING"}, {"worker_id", worker_id}}; }
json pong(const std::string& worker_id) { return {{"type", "PONG"}, {"worker_id", worker_id}}; }
json fin() { return {{"type", "FIN"}}; }

std::string frame_encode(const json& message) {
  const std::string body = message.dump(-1, ' ', false, json::error_handler_t::replace);
  if (body.size() > 0xffffffffu) throw ProtocolError("message too large for a frame");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += body;
  return out;
}

json frame_decode(std::string_view bytes, std::size_t max_frame) {
  if (bytes.size() < 4) throw ProtocolError("truncated frame header");
  const std::uint32_t n = read_be32(bytes);
  if (n > max_frame) {
    throw ProtocolError("frame length " + std::to_string(n) + " exceeds limit " + std::to_string(max_frame));
  }
  if (bytes.size() < 4 + static_cast<std::size_t>(n)) throw ProtocolError("truncated frame body");
  if (bytes.size() > 4 + static_cast<std::size_t>(n)) throw ProtocolError("trailing bytes after frame");
  return parse_body(bytes.substr(4));
}

std::optional<json> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::uint32_t n = read_be32(buffer_);
  if (n > max_frame_) {
    throw ProtocolError("frame length " + std::to_string(n) + " exceeds limit " + std::to_string(max_frame_));
  }
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  json m = parse_body(std::string_view(buffer_).substr(4, n));
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return m;
}

}  // namespace blast::wire
