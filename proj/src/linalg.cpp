#include "wemsfem/linalg.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/SparseLU>

namespace wemsfem {

namespace {

using LuBase = Eigen::SparseLU<ComplexColMatrix, Eigen::COLAMDOrdering<int>>;

// Exposes the diagonal of U, which SparseLU keeps inside the supernodal L
// storage.
class InspectableLu : public LuBase {
public:
  std::pair<double, long> smallest_and_largest_pivot(double& largest) const {
    double smallest = std::numeric_limits<double>::infinity();
    long where = -1;
    largest = 0.0;
    for (Eigen::Index j = 0; j < this->cols(); ++j) {
      for (typename SCMatrix::InnerIterator it(this->m_Lstore, j); it; ++it) {
        if (it.index() == j) {
          const double mag = std::abs(it.value());
          if (mag < smallest) {
            smallest = mag;
            where = static_cast<long>(j);
          }
          largest = std::max(largest, mag);
          break;
        }
      }
    }
    return {smallest, where};
  }
};

long trailing_index(const std::string& text) {
  std::size_t end = text.find_last_of("0123456789");
  if (end == std::string::npos) return -1;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(text[begin - 1]))) --begin;
  return std::stol(text.substr(begin, end - begin + 1));
}

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

ComplexSparseMatrix finalize(int rows, int cols, const std::vector<Triplet>& triplets) {
  ComplexSparseMatrix a(rows, cols);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.prune([](const int&, const int&, const Complex& v) { return std::abs(v) >= kPruneMagnitude; });
  a.makeCompressed();
  return a;
}

struct SparseDirectSolver::Impl {
  ComplexColMatrix matrix;
  InspectableLu lu;
};

SparseDirectSolver::SparseDirectSolver(const ComplexSparseMatrix& a) : impl_(std::make_unique<Impl>()) {
  if (a.rows() != a.cols()) {
    std::ostringstream msg;
    msg << "sparse solve needs a square matrix, got " << a.rows() << " x " << a.cols();
    throw DimensionError(msg.str());
  }
  n_ = a.rows();
  if (n_ == 0) return;
  impl_->matrix = a;
  impl_->matrix.makeCompressed();
  impl_->lu.compute(impl_->matrix);
  if (impl_->lu.info() != Eigen::Success) {
    const std::string why = impl_->lu.lastErrorMessage();
    throw SingularMatrixError("sparse LU failed: " + why, trailing_index(why), 0.0);
  }
  double largest = 0.0;
  const auto [smallest, where] = impl_->lu.smallest_and_largest_pivot(largest);
  min_pivot_ = smallest;
  min_pivot_index_ = where;
  const double floor = static_cast<double>(n_) * std::numeric_limits<double>::epsilon() * largest;
  if (!(smallest > floor)) {
    std::ostringstream msg;
    msg << "matrix is singular to working precision: pivot " << where << " has magnitude " << smallest
        << " (largest pivot " << largest << ")";
    throw SingularMatrixError(msg.str(), where, smallest);
  }
}

SparseDirectSolver::~SparseDirectSolver() = default;
SparseDirectSolver::SparseDirectSolver(SparseDirectSolver&&) noexcept = default;
SparseDirectSolver& SparseDirectSolver::operator=(SparseDirectSolver&&) noexcept = default;

ComplexVector SparseDirectSolver::solve(const ComplexVector& b) const {
  if (b.size() != n_) {
    std::ostringstream msg;
    msg << "right-hand side has length " << b.size() << ", matrix has " << n_ << " rows";
    throw DimensionError(msg.str());
  }
  if (n_ == 0) return ComplexVector();
  const double bnorm = b.norm();
  if (bnorm == 0.0) return ComplexVector::Zero(n_);
  ComplexVector x = impl_->lu.solve(b);
  ComplexVector r = b - impl_->matrix * x;
  double rel = r.norm() / bnorm;
  if (rel > kSolveTolerance) {
    x += impl_->lu.solve(r);
    r = b - impl_->matrix * x;
    rel = r.norm() / bnorm;
  }
  if (!(rel <= kSolveTolerance)) {
    std::ostringstream msg;
    msg << "sparse solve residual " << rel << " exceeds " << kSolveTolerance << " after refinement";
    throw SingularMatrixError(msg.str(), min_pivot_index_, min_pivot_);
  }
  return x;
}

ComplexDenseMatrix SparseDirectSolver::solve(const ComplexDenseMatrix& b) const {
  ComplexDenseMatrix x(n_, b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = solve(ComplexVector(b.col(c)));
  return x;
}

ComplexVector solve_sparse(const ComplexSparseMatrix& a, const ComplexVector& b) {
  if (a.rows() != b.size()) {
    std::ostringstream msg;
    msg << "matrix has " << a.rows() << " rows, right-hand side has length " << b.size();
    throw DimensionError(msg.str());
  }
  return SparseDirectSolver(a).solve(b);
}

ComplexVector solve_dense(const ComplexDenseMatrix& a, const ComplexVector& b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw DimensionError("dense solve dimension mismatch");
  if (a.rows() == 0) return ComplexVector();
  Eigen::PartialPivLU<ComplexDenseMatrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) {
    const auto& m = lu.matrixLU();
    Eigen::Index where = 0;
    m.diagonal().cwiseAbs().minCoeff(&where);
    std::ostringstream msg;
    msg << "dense matrix is singular to working precision (rcond " << rcond << ")";
    throw SingularMatrixError(msg.str(), static_cast<long>(where), std::abs(m(where, where)));
  }
  ComplexVector x = lu.solve(b);
  const double bnorm = b.norm();
  if (bnorm > 0.0 && (b - a * x).norm() / bnorm > kSolveTolerance) {
    x += lu.solve(ComplexVector(b - a * x));
  }
  return x;
}

double energy(const ComplexSparseMatrix& a, const ComplexVector& v) {
  if (a.rows() != v.size() || a.cols() != v.size()) throw DimensionError("energy: dimension mismatch");
  return v.dot(a * v).real();
}

double v_norm(const ComplexSparseMatrix& stiffness, const ComplexSparseMatrix& mass, double k,
              const ComplexVector& v) {
  const double value = energy(stiffness, v) + k * k * energy(mass, v);
  return std::sqrt(std::max(0.0, value));
}

void write_coordinate(std::ostream& out, const ComplexSparseMatrix& a) {
  for (int r = 0; r < a.outerSize(); ++r) {
    for (ComplexSparseMatrix::InnerIterator it(a, r); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ';
      write_double(out, it.value().real());
      out << ' ';
      write_double(out, it.value().imag());
      out << '\n';
    }
  }
}

}  // namespace wemsfem
