#pragma once

// Plain-text serialization of states and operators.
//
//   univqm <state|density|unitary>
//   subsystem <id> <dim> <label_0> ... <label_{dim-1}>     (one line per subsystem)
//   entries <rows> <cols>
//   <re,im> <re,im> ...                                    (one line per row)
//
// Entries are written with 17 significant digits so that a round trip is
// exact. Blank lines and lines starting with '#' are ignored on input.

#include <string>
#include <string_view>

#include "univqm/tensor.hpp"

namespace univqm {

class FormatError : public Error {
 public:
  using Error::Error;
};

std::string format_complex(Complex z);
/// Parses "re,im" (or a bare real number).
Complex parse_complex(std::string_view text);

std::string to_text(const StateVector& s);
std::string to_text(const DensityMatrix& rho);
std::string to_text(const UnitaryOperator& u);

StateVector parse_state(std::string_view text);
DensityMatrix parse_density(std::string_view text);
UnitaryOperator parse_unitary(std::string_view text);

/// Rows separated by ';', entries by whitespace: "0,0 1,0; 1,0 0,0".
CMatrix parse_inline_matrix(std::string_view text);

}  // namespace univqm
