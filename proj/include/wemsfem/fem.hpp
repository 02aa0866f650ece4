#pragma once

#include <iosfwd>
#include <memory>
#include <utility>

#include "wemsfem/geometry.hpp"
#include "wemsfem/linalg.hpp"
#include "wemsfem/mesh.hpp"

namespace wemsfem {

/// Unweighted mass and stiffness restricted to elements outside the
/// absorbing layer; used for every reported error.
struct ErrorNorms {
  ComplexSparseMatrix stiffness;
  ComplexSparseMatrix mass;
};

/// P1 discretization of the sesquilinear form
///   a(u, v) = (c grad u, grad v) - k^2 (m u, v) - i k <u, v>_{outer boundary}
/// with c = diag(g1/g2, g2/g1), m = 1/(g1 g2) in the PML and c = m = 1 elsewhere.
/// system(i, j) = a(phi_j, phi_i).
struct AssembledSystem {
  ComplexSparseMatrix stiffness;
  ComplexSparseMatrix mass;
  ComplexSparseMatrix robin;
  ComplexSparseMatrix system;
  double k = 0.0;
  /// P1 load of f = 1 (integral of each hat function).
  ComplexVector unit_load;
  ErrorNorms norms;
};

struct FemField {
  std::shared_ptr<const FineMesh> mesh;
  ComplexVector values;
};

/// PML factor g = (1 + i d(x)/k)^{-1} at a coordinate x normalized to
/// [0, 1] along an axis of physical length `axis_length`.
Complex pml_stretch(const DomainSpec& spec, double x, double axis_length);

/// Normalized-coordinate test for the band outside the absorbing layer.
bool in_physical_region(const DomainSpec& spec, Point p);

AssembledSystem assemble(const DomainSpec& spec, const FineMesh& mesh, Execution exec = Execution::serial);

/// Unit nodal load at the retained node nearest to p (lowest index on ties).
ComplexVector point_source_load(const FineMesh& mesh, Point p);
int nearest_node(const FineMesh& mesh, Point p);

FemField solve_fine(const AssembledSystem& system, std::shared_ptr<const FineMesh> mesh,
                    const ComplexVector& load);

struct RelativeErrors {
  double l2 = 0.0;
  double h1 = 0.0;
};

RelativeErrors relative_errors(const ErrorNorms& norms, const FemField& reference, const FemField& approx);

/// Field dump: `field N k k`, then `x y re im` per node.
void write_field(std::ostream& out, const FemField& field, double k);
/// Reads the values of a field dump; node coordinates are ignored.
ComplexVector read_field(std::istream& in);

}  // namespace wemsfem
