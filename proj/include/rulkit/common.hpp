#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rulkit {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using ArrX = Eigen::ArrayXd;

// Single exception type for the whole toolkit. The message carries the
// context callers and tests key on (row numbers, snapshot indices, paths).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Formats a double with 17 significant digits, enough for an exact
// text -> double -> text round trip.
std::string format_full(double v);

}  // namespace rulkit
