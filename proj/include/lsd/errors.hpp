#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsd {

/// Violated precondition: wrong shapes, out-of-range indices, bad parameters.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A metric whose formula has a zero denominator for the given inputs.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or incompatible on-disk data.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit FormatError(const std::string& what) : std::runtime_error(what), offset_(0) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A Langevin chain produced a non-finite state.
class SamplerDivergenceError : public std::runtime_error {
 public:
  SamplerDivergenceError(const std::string& sampler, int t, int k)
      : std::runtime_error(sampler + " diverged at t=" + std::to_string(t) + ", k=" + std::to_string(k)),
        t_(t),
        k_(k) {}

  int t() const { return t_; }
  int k() const { return k_; }

 private:
  int t_;
  int k_;
};

/// Non-finite training loss.
class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lsd
