#pragma once

#include <stdexcept>
#include <string>

namespace sfcr {

// Error taxonomy mirrors the CLI exit codes: input data problems (2), bad
// configuration (3), sampler-side numerical failure (4).  Everything carries a
// short machine-readable code plus a human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct InputError : Error {
  InputError(const std::string& code, const std::string& msg) : Error(code, msg) {}
};

struct ConfigError : Error {
  ConfigError(const std::string& code, const std::string& msg) : Error(code, msg) {}
};

struct SamplerError : Error {
  SamplerError(const std::string& code, const std::string& msg) : Error(code, msg) {}
};

// Shape/bounds violations in numerical kernels (basis builders, subset
// evaluation, graph construction).  A config-level mistake in disguise.
struct DimensionError : ConfigError {
  DimensionError(const std::string& msg) : ConfigError("dimension", msg) {}
};

struct GeometryError : InputError {
  GeometryError(const std::string& msg) : InputError("geometry", msg) {}
};

}  // namespace sfcr
