#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qspec {

enum class ErrorKind {
  InvalidArgument,
  EmptyWindow,
  DegenerateDesign,
  SparseDesign,
  SingularMoment,
  NonPositiveVariance,
  NotFitted,
  Data,
  Usage,
};

std::string_view to_string(ErrorKind kind);

//! Base exception of the library. The kind decides how callers react
//! (the CLI maps it to an exit code, the simulation harness may skip).
class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

//! No observation receives positive kernel weight at the evaluation point.
class EmptyWindowError : public Error
{
public:
  explicit EmptyWindowError(std::vector<double> x);

  const std::vector<double>& point() const noexcept { return x_; }

private:
  std::vector<double> x_;
};

//! Exit codes of the command line tool.
int exit_code(ErrorKind kind);

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, const std::string& what)
{
  if (!cond)
    fail(ErrorKind::InvalidArgument, what);
}

} // namespace qspec
