#pragma once

#include <stdexcept>
#include <string>

namespace vis2ir {

/// Invalid user-supplied configuration. `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A caller violated an operation's precondition (shape, count, range).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Internal shapes disagree where the architecture requires them to agree.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted file failed its checksum or structural validation.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced NaN/Inf. Carries the path of the diagnostic snapshot, if one was written.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& what, std::string snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}

  const std::string& snapshot() const noexcept { return snapshot_; }

 private:
  std::string snapshot_;
};

}  // namespace vis2ir
