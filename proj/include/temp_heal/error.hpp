#pragma once

#include <stdexcept>
#include <string>

namespace temp {

// All library failures surface as this exception. `code` is a short
// machine-readable tag (e.g. "duplicate_id") that the CLI echoes verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace temp
