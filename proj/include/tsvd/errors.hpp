#pragma once

#include <stdexcept>
#include <string>

namespace tsvd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The dense decomposition backend failed to produce finite factors.
struct NumericalFailure : Error {
  using Error::Error;
};

struct RankOutOfRange : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// sigma_r is numerically zero, so the rank-r pseudoinverse is undefined.
struct SingularTruncation : Error {
  using Error::Error;
};

// ||Delta||_2 >= (sigma_r - sigma_{r+1})/2, outside the expansion regime.
struct GapViolation : Error {
  using Error::Error;
};

struct NonConvergence : Error {
  using Error::Error;
};

// The base and perturbed dominant subspaces are too far apart to align.
struct SingularAlignment : Error {
  using Error::Error;
};

struct NotRankR : Error {
  using Error::Error;
};

struct ParameterOutOfRange : Error {
  using Error::Error;
};

struct DegenerateFit : Error {
  using Error::Error;
};

struct GoldenMismatch : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};

}  // namespace tsvd
