#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument shapes or values outside an operation's contract.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A linear system whose condition estimate exceeds the accepted limit.
class IllConditioned : public Error {
 public:
  IllConditioned(const std::string& what, double condition)
      : Error(what + " (condition estimate " + std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// A state matrix that was required to be Schur but is not.
class NotSchur : public Error {
 public:
  NotSchur(const std::string& what, std::vector<std::complex<double>> offending)
      : Error(what), offending_(std::move(offending)) {}
  const std::vector<std::complex<double>>& offending_eigenvalues() const { return offending_; }

 private:
  std::vector<std::complex<double>> offending_;
};

/// Non-finite values produced during simulation or training.
class Diverged : public Error {
 public:
  using Error::Error;
};

}  // namespace pgnn
