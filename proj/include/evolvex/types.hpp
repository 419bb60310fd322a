#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace evolvex {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using UserId = int;

// Raised for violated preconditions on user-supplied configuration. The CLI
// maps it to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace evolvex
