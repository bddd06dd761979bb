#pragma once

#include <stdexcept>
#include <string>

namespace qre {

// Base for every exception thrown by the library. Analytic negative results
// (not separable, not certified) are returned as values, never thrown.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Elimination broke down: a state has no exit to the states still remaining.
class SingularSolve : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace qre
