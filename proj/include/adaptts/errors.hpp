#pragma once

#include <stdexcept>
#include <string>

namespace adaptts {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IngestionError : std::runtime_error {
  explicit IngestionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PairingError : std::runtime_error {
  explicit PairingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateSimilarityError : std::runtime_error {
  explicit DegenerateSimilarityError(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace adaptts
