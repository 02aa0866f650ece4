#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "wemsfem/fem.hpp"
#include "wemsfem/mesh.hpp"
#include "wemsfem/wavelet.hpp"

namespace wemsfem {

/// Retained fine nodes of a closed coarse region, split into unknowns
/// (strictly inside) and Dirichlet nodes (on the region boundary). All
/// lists hold global node ids in increasing order.
struct LocalDofs {
  std::vector<int> nodes;
  std::vector<int> interior;
  std::vector<int> boundary;
};

/// Nodal field supported on a coarse neighborhood, listed over
/// LocalDofs::nodes.
struct LocalField {
  std::vector<int> nodes;
  ComplexVector values;

  ComplexVector extend(Eigen::Index global_size) const;
};

/// Shared, immutable inputs of the multiscale construction.
class MultiscaleContext {
public:
  MultiscaleContext(std::shared_ptr<const DomainSpec> spec, std::shared_ptr<const FineMesh> mesh,
                    std::shared_ptr<const CoarseGrid> grid, std::shared_ptr<const AssembledSystem> system);

  const DomainSpec& spec() const { return *spec_; }
  const FineMesh& mesh() const { return *mesh_; }
  const CoarseGrid& grid() const { return *grid_; }
  const AssembledSystem& system() const { return *system_; }
  std::shared_ptr<const FineMesh> mesh_ptr() const { return mesh_; }

  int num_coarse_nodes() const { return static_cast<int>(grid_->num_nodes()); }
  const LocalDofs& neighborhood(int node) const;
  LocalDofs element_dofs(int element) const;
  /// S - kappa^2 M with the (possibly PML-weighted) blocks of the system.
  ComplexSparseMatrix helmholtz_operator(double kappa) const;

private:
  LocalDofs collect(const std::array<int, 4>& lattice_box) const;

  std::shared_ptr<const DomainSpec> spec_;
  std::shared_ptr<const FineMesh> mesh_;
  std::shared_ptr<const CoarseGrid> grid_;
  std::shared_ptr<const AssembledSystem> system_;
  std::vector<LocalDofs> neighborhoods_;
};

/// Dirichlet problem on the unknowns `interior` of operator `a`; every
/// column coupled to an interior row must appear in `boundary`.
class LocalProblem {
public:
  LocalProblem(const ComplexSparseMatrix& a, const std::vector<int>& interior, const std::vector<int>& boundary);

  /// Interior values for each column of boundary data (rows follow
  /// `boundary`) plus an optional interior load (rows follow `interior`).
  ComplexDenseMatrix solve(const ComplexDenseMatrix& boundary_data, const ComplexDenseMatrix* load = nullptr) const;

  const ComplexSparseMatrix& interior_block() const { return a_ii_; }
  const ComplexSparseMatrix& coupling_block() const { return a_ib_; }

private:
  ComplexSparseMatrix a_ii_;
  ComplexSparseMatrix a_ib_;
  std::optional<SparseDirectSolver> solver_;
};

struct PartitionOfUnity {
  double pu_wavenumber = 0.0;
  /// chi_i over the nodes of omega_i.
  std::vector<LocalField> chi;
};

PartitionOfUnity build_pu(const MultiscaleContext& ctx, double k_pu, Execution exec = Execution::serial);

/// Which wavelet of which chain a trace belongs to.
struct TraceIndex {
  int chain = 0;
  int wavelet = 0;
};

/// Boundary data for the local problems of one neighborhood; rows follow
/// LocalDofs::boundary, one column per trace.
struct EdgeTraces {
  Eigen::MatrixXd values;
  std::vector<TraceIndex> index;
};

EdgeTraces edge_wavelet_traces(const MultiscaleContext& ctx, int node, int level);

/// Helmholtz extension of Dirichlet data (rows follow
/// LocalDofs::boundary). `kappa` defaults to the domain wavenumber.
LocalField local_solve(const MultiscaleContext& ctx, int node, const ComplexVector& boundary_data,
                       std::optional<double> kappa = std::nullopt);

/// Solution of -(Laplace + k^2) v = 1 with zero Dirichlet data on the
/// neighborhood boundary.
LocalField local_bubble(const MultiscaleContext& ctx, int node, std::optional<double> kappa = std::nullopt);

struct ColumnIndex {
  enum class Kind { edge, bubble };
  int node = 0;
  Kind kind = Kind::edge;
  int chain = -1;
  int wavelet = -1;
};

struct MultiscaleSpace {
  int level = 0;
  std::vector<ColumnIndex> index;
  /// Fine-nodal columns (fine nodes x n_ms).
  ComplexColMatrix prolongation;
  /// Candidate columns removed by the rank filter.
  std::vector<ColumnIndex> dropped;
  std::size_t candidates = 0;

  std::size_t size() const { return index.size(); }
  ComplexVector column(int c) const { return ComplexVector(prolongation.col(c)); }
};

inline constexpr double kRankDropTolerance = 1e-10;

MultiscaleSpace build_space(const MultiscaleContext& ctx, const PartitionOfUnity& pu, int level,
                            Execution exec = Execution::serial);

struct MultiscaleSolution {
  FemField field;
  ComplexVector coefficients;
  /// ||Phi^H (load - A Phi c)|| / ||Phi^H load||.
  double galerkin_residual = 0.0;
};

inline constexpr double kGalerkinTolerance = 1e-8;

MultiscaleSolution solve_multiscale(const AssembledSystem& system, std::shared_ptr<const FineMesh> mesh,
                                    const ComplexVector& load, const MultiscaleSpace& space);

struct EdgeProjection {
  LocalField field;
  /// (v, psi_j)_{boundary} for the L2(boundary)-normalized wavelets, chain-major.
  std::vector<Complex> coefficients;
  std::vector<TraceIndex> index;
  /// ||v - P v||_{L2(boundary)} with v read as piecewise constant per fine
  /// segment (left-node value).
  double boundary_residual = 0.0;
  double boundary_norm = 0.0;
};

EdgeProjection edge_projection(const MultiscaleContext& ctx, int node, int level, const ComplexVector& boundary_data);

/// One field dump per column plus an index sidecar `i kind chain j`.
void write_basis(const std::filesystem::path& dir, const MultiscaleSpace& space,
                 std::shared_ptr<const FineMesh> mesh, double k);

}  // namespace wemsfem
