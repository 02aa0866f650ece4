#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "wemsfem/common.hpp"

namespace wemsfem {

/// Compressed-row complex matrix. Finalized matrices hold no duplicate
/// entries and no entries below kPruneMagnitude.
using ComplexSparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor, int>;
using ComplexColMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;
using ComplexVector = Eigen::VectorXcd;
using ComplexDenseMatrix = Eigen::MatrixXcd;
using Triplet = Eigen::Triplet<Complex, int>;

inline constexpr double kPruneMagnitude = 1e-300;
inline constexpr double kSolveTolerance = 1e-10;

/// Sums duplicate triplets in input order and prunes tiny entries.
ComplexSparseMatrix finalize(int rows, int cols, const std::vector<Triplet>& triplets);

/// Sparse LU with partial pivoting (Eigen SparseLU, COLAMD ordering),
/// factorized once and reused for many right-hand sides.
class SparseDirectSolver {
public:
  explicit SparseDirectSolver(const ComplexSparseMatrix& a);
  ~SparseDirectSolver();
  SparseDirectSolver(SparseDirectSolver&&) noexcept;
  SparseDirectSolver& operator=(SparseDirectSolver&&) noexcept;

  Eigen::Index size() const { return n_; }
  /// Smallest |U_jj| and its position in elimination order.
  double min_pivot() const { return min_pivot_; }
  long min_pivot_index() const { return min_pivot_index_; }

  /// One step of iterative refinement is applied when the relative
  /// residual exceeds kSolveTolerance.
  ComplexVector solve(const ComplexVector& b) const;
  ComplexDenseMatrix solve(const ComplexDenseMatrix& b) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index n_ = 0;
  double min_pivot_ = 0.0;
  long min_pivot_index_ = -1;
};

ComplexVector solve_sparse(const ComplexSparseMatrix& a, const ComplexVector& b);

/// Dense LU with partial pivoting; throws SingularMatrixError when the
/// reciprocal condition estimate drops below working precision.
ComplexVector solve_dense(const ComplexDenseMatrix& a, const ComplexVector& b);

/// sqrt(Re(v^H S v) + k^2 Re(v^H M v)).
double v_norm(const ComplexSparseMatrix& stiffness, const ComplexSparseMatrix& mass, double k,
              const ComplexVector& v);

/// Re(v^H A v) with a dimension check.
double energy(const ComplexSparseMatrix& a, const ComplexVector& v);

/// Coordinate text dump: `row col re im` per stored entry.
void write_coordinate(std::ostream& out, const ComplexSparseMatrix& a);

}  // namespace wemsfem
