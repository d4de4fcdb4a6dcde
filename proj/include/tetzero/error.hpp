#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace tetzero {

enum class ErrorCode {
  invalid_argument = 1,
  domain = 2,
  singular = 3,
  non_finite = 4,
  io = 5,
  blow_up = 6,
  internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {
template <class... Args>
[[noreturn]] void raise(ErrorCode code, const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(code, os.str());
}
}  // namespace detail

#define TZ_REQUIRE(cond, code, ...)                                      \
  do {                                                                   \
    if (!(cond)) ::tetzero::detail::raise(::tetzero::ErrorCode::code, __VA_ARGS__); \
  } while (0)

}  // namespace tetzero
