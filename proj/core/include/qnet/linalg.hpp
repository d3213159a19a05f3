#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string_view>

namespace qnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Dense matrix exponential (scaling and squaring with a Pade approximant).
Matrix expm(const Matrix& a);

/// exp(t A) v for a sparse A, by Taylor steps with ||A||_1 * t / s <= 1.
Vector expm_action(const SparseMatrix& a, const Vector& v, double t, double tol = 1e-15);

/// Solves A x = b with partial-pivot LU; throws NumericalError when the
/// reciprocal condition estimate falls below `rcond_floor`.
Matrix solve_dense(const Matrix& a, const Matrix& b, std::string_view what,
                   double rcond_floor = 1e-14);

/// Solves A x = b with a sparse LU factorization; throws NumericalError on
/// factorization failure or a non-finite result.
Vector solve_sparse(const SparseMatrix& a, const Vector& b, std::string_view what);

double min_symmetric_eigenvalue(const Matrix& symmetric);

/// True when `m` is symmetric to `tol` and its smallest eigenvalue is >= -tol.
bool is_symmetric_psd(const Matrix& m, double tol);

}  // namespace qnet
