#pragma once

#include <stdexcept>
#include <string>

namespace svo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_number, const std::string& what)
      : Error("line " + std::to_string(line_number) + ": " + what), line_(line_number) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MalformedRow : public Error {
 public:
  using Error::Error;
};

class EmptyDistribution : public Error {
 public:
  using Error::Error;
};

class EmptyTable : public Error {
 public:
  using Error::Error;
};

class InconsistentDim : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t batch_index, const std::string& what)
      : Error("non-finite loss at batch " + std::to_string(batch_index) + ": " + what),
        batch_(batch_index) {}
  std::size_t batch_index() const { return batch_; }

 private:
  std::size_t batch_;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class OddSize : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace svo
