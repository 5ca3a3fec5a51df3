#pragma once

#include <stdexcept>
#include <string>

namespace sfb {

/// Factor or matrix shapes disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity reached a constructor that forbids it.
class NonFiniteError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid experiment or model configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A peer's clock went backwards; the transport broke per-edge FIFO order.
class FifoViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed, truncated or corrupted wire bytes.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Socket setup or IO failure in the live transport.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter entries became non-finite or exceeded the divergence bound.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simulator found no worker able to make progress.
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sfb
