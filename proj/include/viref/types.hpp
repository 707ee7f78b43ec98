#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace viref {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatXf = MatX<float>;
using VecXf = VecX<float>;
using MatXd = MatX<double>;
using VecXd = VecX<double>;

// Error taxonomy shared by the library and the CLI. The CLI maps each kind
// to a distinct nonzero exit code.
enum class ErrorKind {
  usage = 2,
  config = 3,
  missing_file = 4,
  format = 5,
  shape = 6,
  contract = 7,
  degenerate = 8,
  divergence = 9,
  unsupported = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::config: return "config";
    case ErrorKind::missing_file: return "missing_file";
    case ErrorKind::format: return "format";
    case ErrorKind::shape: return "shape";
    case ErrorKind::contract: return "contract";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::unsupported: return "unsupported";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace viref
