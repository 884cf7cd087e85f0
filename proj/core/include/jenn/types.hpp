#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace jenn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A length-n model state. Perturbations and adjoint variables share the type.
using StateVector = Vector;

/// Dense output_dim x input_dim sensitivity matrix, J(i, j) = d out_i / d in_j.
using JacobianMatrix = Matrix;

using Seed = std::uint64_t;

} // namespace jenn
