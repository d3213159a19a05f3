#include "qnet/linalg.hpp"

#include "qnet/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/SparseLU>

#include <cmath>
#include <string>

namespace qnet {

Matrix expm(const Matrix& a) {
  if (a.size() == 0) return a;
  return a.exp();
}

Vector expm_action(const SparseMatrix& a, const Vector& v, double t, double tol) {
  if (t == 0.0 || a.nonZeros() == 0) return v;
  double norm1 = 0.0;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(a, c); it; ++it) col += std::abs(it.value());
    norm1 = std::max(norm1, col);
  }
  const auto steps = static_cast<long>(std::ceil(norm1 * std::abs(t)));
  const long s = std::max(1L, steps);
  const double h = t / static_cast<double>(s);

  Vector w = v;
  for (long step = 0; step < s; ++step) {
    Vector term = w;
    Vector acc = w;
    int quiet = 0;
    for (int j = 1; j < 200; ++j) {
      term = (a * term) * (h / j);
      acc += term;
      const double scale = std::max(1.0, acc.lpNorm<Eigen::Infinity>());
      if (term.lpNorm<Eigen::Infinity>() <= tol * scale) {
        if (++quiet == 2) break;
      } else {
        quiet = 0;
      }
    }
    w = std::move(acc);
  }
  return w;
}

Matrix solve_dense(const Matrix& a, const Matrix& b, std::string_view what, double rcond_floor) {
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc > rcond_floor)) {
    throw NumericalError(std::string(what) + ": matrix is singular or ill-conditioned (rcond=" +
                         std::to_string(rc) + ")");
  }
  Matrix x = lu.solve(b);
  if (!x.allFinite()) throw NumericalError(std::string(what) + ": non-finite solution");
  return x;
}

Vector solve_sparse(const SparseMatrix& a, const Vector& b, std::string_view what) {
  SparseMatrix m = a;
  m.makeCompressed();
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(m);
  lu.factorize(m);
  if (lu.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": sparse factorization failed (" + lu.lastErrorMessage() +
                         ")");
  }
  Vector x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    throw NumericalError(std::string(what) + ": sparse solve produced no finite solution");
  }
  return x;
}

double min_symmetric_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_symmetric_psd(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  return min_symmetric_eigenvalue(0.5 * (m + m.transpose())) >= -tol;
}

}  // namespace qnet
