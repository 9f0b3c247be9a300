#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace entroflow {

/// Function on the nodes of a Space, one real value per node.
using NodeField = Eigen::VectorXd;

/// Antisymmetric function on oriented edges. We store the value on the
/// canonical orientation (tail -> head as listed in Space::edges()); the
/// value on the reversed orientation is the negation by convention.
using EdgeField = Eigen::VectorXd;

/// Domain error (invalid inputs, violated invariants).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the forward integrator when a density leaves the admissible set.
class PositivityError : public Error {
public:
    PositivityError(const std::string& what, int step) : Error(what), step(step) {}
    int step;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

}  // namespace entroflow
