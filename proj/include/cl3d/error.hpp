#pragma once

#include <stdexcept>
#include <string>

namespace cl3d {

// Error with a stable machine-readable code ("empty-shape", "not-a-fan", ...)
// plus an optional human detail. what() yields "code: detail".
class Error : public std::runtime_error {
 public:
  explicit Error(std::string code, const std::string& detail = "")
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace cl3d
