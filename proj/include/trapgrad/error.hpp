#pragma once

#include <stdexcept>
#include <string>

namespace trapgrad {

enum class Errc {
  invalid_argument = 1,
  empty_input = 2,
  io = 3,
  parse = 4,
  unsatisfiable = 5,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, Errc code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

}  // namespace trapgrad
