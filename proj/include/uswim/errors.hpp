#ifndef USWIM_ERRORS_HPP
#define USWIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace uswim {

/// Malformed model architecture, layer wiring, or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument to an operation (empty batch, unknown weight id, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backward pass requested with a tape from an older forward pass.
class StaleTapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failures for IDX files and checkpoints. `kind()` tells them apart.
class FormatError : public std::runtime_error {
 public:
  enum class Kind {
    BadMagic,
    UnsupportedVersion,
    Truncated,
    CountMismatch,
    ChecksumMismatch,
    Malformed,
  };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace uswim

#endif  // USWIM_ERRORS_HPP
