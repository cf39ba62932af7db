#include "qspec/error.hpp"

#include <sstream>

namespace qspec {

std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::SparseDesign: return "SparseDesign";
    case ErrorKind::SingularMoment: return "SingularMoment";
    case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorKind::NotFitted: return "NotFitted";
    case ErrorKind::Data: return "Data";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

namespace {

std::string describe_point(const std::vector<double>& x)
{
  std::ostringstream os;
  os.precision(17);
  os << "empty kernel window at x = (";
  for (std::size_t j = 0; j < x.size(); ++j)
    os << (j ? ", " : "") << x[j];
  os << "); enlarge the bandwidth";
  return os.str();
}

} // namespace

EmptyWindowError::EmptyWindowError(std::vector<double> x)
  : Error(ErrorKind::EmptyWindow, describe_point(x))
  , x_(std::move(x))
{}

int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::InvalidArgument: return 1;
    case ErrorKind::Data: return 2;
    default: return 3;
  }
}

void fail(ErrorKind kind, const std::string& what)
{
  throw Error(kind, what);
}

} // namespace qspec
