// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace symlat
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Input violates a schema or a domain invariant. The CLI maps this to exit code 1.
class ValidationError : public Error
{
  public:
    using Error::Error;
};

/// Text or JSON could not be parsed into the expected structure.
class ParseError : public ValidationError
{
  public:
    using ValidationError::ValidationError;
};

/// Negation produced a non-positive precision in at least one coordinate.
class NegationInfeasible : public Error
{
  public:
    NegationInfeasible(std::vector<int> coordinates, const std::string& what):
        Error(what), coordinates_(std::move(coordinates))
    {
    }

    [[nodiscard]] const std::vector<int>& coordinates() const noexcept { return coordinates_; }

  private:
    std::vector<int> coordinates_;
};

/// Numerical failure during training or evolution (non-finite loss).
class NumericalError : public Error
{
  public:
    using Error::Error;
};

/// Chat transport failure: timeout, HTTP error, or exhausted mock transcript.
class ChatError : public Error
{
  public:
    using Error::Error;
};

} // namespace symlat
