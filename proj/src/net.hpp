#pragma once

// POSIX socket helpers shared by the broker and the worker.

#include <cstdint>
#include <string>
#include <string_view>

namespace blast::net {

struct Address {
  std::string host;  // empty: any interface
  std::uint16_t port = 0;
};

// "HOST:PORT" or ":PORT". Throws ValidationError.
Address parse_address(std::string_view text);

// Listening socket, non-blocking. Throws Error on bind failure.
int listen_tcp(const Address& addr, int backlog = 64);
std::uint16_t local_port(int fd);

// Blocking connect; returns -1 on failure.
int connect_tcp(const Address& addr);

void set_nonblocking(int fd);
void close_fd(int fd);

// Writes everything on a blocking socket; false on error.
bool send_all(int fd, std::string_view bytes);

}  // namespace blast::net
