#pragma once

#include <Eigen/Dense>

namespace mt {

// All parameters and activations are dense row-major matrices so the
// checkpoint byte layout equals iteration order. Row vectors (biases,
// layer-norm parameters) are 1×n matrices.
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace mt
