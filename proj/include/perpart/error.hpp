#pragma once

#include <stdexcept>
#include <string>

namespace perpart {

enum class ErrorKind {
  invalid_input,      // malformed or out-of-range arguments, bad files
  unsupported,        // valid request outside the implemented scope
  numerical_failure,  // line-search underflow, infeasible correction, ...
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, const std::string& what,
                    ErrorKind kind = ErrorKind::invalid_input) {
  if (!cond) throw Error(kind, what);
}

}  // namespace perpart
