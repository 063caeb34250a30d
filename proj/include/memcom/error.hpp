#pragma once

#include <stdexcept>
#include <string>

namespace memcom {

class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
  public:
    IndexError(const std::string& what, long long offending)
        : std::out_of_range(what + " (id " + std::to_string(offending) + ")"), offending_(offending) {}

    long long offending() const noexcept { return offending_; }

  private:
    long long offending_;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace memcom
