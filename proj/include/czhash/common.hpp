#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace czhash {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using LabelSet = std::set<std::string>;

// Error hierarchy; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

inline double sign_pm1(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace czhash
