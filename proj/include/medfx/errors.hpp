#pragma once

#include <stdexcept>
#include <string>

namespace medfx {

struct GroupTooSmall : std::runtime_error {
  explicit GroupTooSmall(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateColumn : std::runtime_error {
  int column;
  explicit DegenerateColumn(int col)
      : std::runtime_error("column " + std::to_string(col) +
                           " has zero variance; cannot standardize"),
        column(col) {}
};

struct SingularSigma : std::runtime_error {
  SingularSigma() : std::runtime_error("covariance matrix is singular") {}
};

struct DegenerateTreatment : std::runtime_error {
  explicit DegenerateTreatment(const std::string& what) : std::runtime_error(what) {}
};

struct TooManyFailures : std::runtime_error {
  int failures;
  int total;
  TooManyFailures(int nfail, int ntotal)
      : std::runtime_error("too many failed replicates: " + std::to_string(nfail) +
                           " of " + std::to_string(ntotal)),
        failures(nfail), total(ntotal) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace medfx
