#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "finsler_forge/field.hpp"

namespace finsler {

struct ExprError : std::runtime_error {
  int line = 0;
  int column = 0;
  ExprError(const std::string& msg, int l, int c)
      : std::runtime_error(msg + " at line " + std::to_string(l) + ", column " +
                           std::to_string(c)),
        line(l),
        column(c) {}
};

// Parse an arithmetic expression over the named coordinates into a scalar
// field.  Grammar: + - * / ^ (also the typeset forms − × ÷), unary minus,
// parentheses, numeric literals, and sin, cos, exp, log, sqrt, sech.
ScalarField parse_expression(const std::string& text,
                             const std::vector<std::string>& coords);

}  // namespace finsler
