#pragma once

#include <stdexcept>
#include <string>

namespace qnet {

/// A solve or integration could not deliver a trustworthy result
/// (singular system, failed dominance check, step-halving disagreement).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested computation exceeds a documented size limit.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qnet
