#ifndef INTERVENE_ERROR_H_
#define INTERVENE_ERROR_H_

#include <stdexcept>
#include <string>

namespace intervene {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: bad dimensions, out-of-box profiles, bad indices,
// parameters violating the model invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Well-formed inputs for which the requested object does not exist, e.g. an
// intervention capability below the required budget or a violated
// algorithm precondition.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Failures of the blind estimation protocol (unresponsive users, singular
// or ill-conditioned measurement systems, inconsistent readings).
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace intervene

#endif  // INTERVENE_ERROR_H_
