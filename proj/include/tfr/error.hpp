#ifndef TFR_ERROR_HPP
#define TFR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace tfr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structural problems in an input file (bad header, wrong field count,
// unparseable numbers). Message carries the 1-based line number.
struct ParseError : Error {
  using Error::Error;
};

// A well-formed input that violates a domain contract.
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace tfr

#endif
