#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgp {

// Shapes or sizes that do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on values (not shapes) was violated.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cholesky of a kernel matrix failed even at the largest allowed jitter.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A worker died or reported an error; the iteration that hit it is discarded.
class WorkerFailure : public std::runtime_error {
 public:
  WorkerFailure(std::size_t partition, const std::string& what)
      : std::runtime_error("worker for partition " + std::to_string(partition) +
                           " failed: " + what),
        partition_(partition) {}

  std::size_t partition() const noexcept { return partition_; }

 private:
  std::size_t partition_;
};

}  // namespace dgp
