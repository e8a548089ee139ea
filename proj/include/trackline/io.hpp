#pragma once

#include <string>
#include <string_view>

#include "trackline/error.hpp"
#include "trackline/time.hpp"

namespace trackline {

/// One end of a serial-style byte link, driven entirely by virtual time.
/// wait_readable and sleep_until advance the owning simulation clock, firing
/// any pending events along the way; nothing here ever blocks a real thread.
class ByteEndpoint {
 public:
  virtual ~ByteEndpoint() = default;

  /// Queue bytes for paced transmission to the peer. Throws ChannelClosed.
  virtual void write(std::string_view bytes) = 0;

  /// Drain everything delivered so far. Never waits.
  virtual std::string read_available() = 0;

  /// Advance virtual time until at least one byte is available to read or the
  /// timeout elapses. Returns true when readable.
  virtual bool wait_readable(SimDuration timeout) = 0;

  /// Advance virtual time to t (no-op if already past).
  virtual void sleep_until(SimTime t) = 0;

  virtual SimTime now() const = 0;
  virtual bool is_open() const = 0;
};

}  // namespace trackline
