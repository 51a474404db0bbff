#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace defcon {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotDefiniteError : Error { using Error::Error; };
struct DegenerateVolumeError : Error {
  using Error::Error;
  std::vector<long> sites;
};
struct NotSelfDualError : Error { using Error::Error; };
struct ZeroCovectorError : Error { using Error::Error; };
struct NotMeanZeroError : Error { using Error::Error; };
struct IndefinitePeriodError : Error { using Error::Error; };
struct TopologyError : Error { using Error::Error; };

// Raised when a state leaves the definite locus.
struct EscapedError : Error {
  using Error::Error;
  std::vector<long> sites;
};
struct FlowEscapeError : EscapedError { using EscapedError::EscapedError; };
struct StepError : Error { using Error::Error; };

}  // namespace defcon
