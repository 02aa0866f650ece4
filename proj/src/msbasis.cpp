#include "wemsfem/msbasis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wemsfem {

namespace {

int position_of(const std::vector<int>& sorted, int value) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  if (it == sorted.end() || *it != value) return -1;
  return static_cast<int>(it - sorted.begin());
}

// Positions of `subset` entries inside `nodes` (both sorted).
std::vector<int> positions(const std::vector<int>& nodes, const std::vector<int>& subset) {
  std::vector<int> out;
  out.reserve(subset.size());
  for (int g : subset) out.push_back(position_of(nodes, g));
  return out;
}

// Assembles a full local field from interior values and boundary data.
ComplexDenseMatrix scatter_local(const LocalDofs& dofs, const ComplexDenseMatrix& interior_values,
                                 const ComplexDenseMatrix& boundary_values) {
  const auto cols = boundary_values.cols();
  ComplexDenseMatrix out = ComplexDenseMatrix::Zero(static_cast<Eigen::Index>(dofs.nodes.size()), cols);
  const auto ipos = positions(dofs.nodes, dofs.interior);
  const auto bpos = positions(dofs.nodes, dofs.boundary);
  for (std::size_t r = 0; r < ipos.size(); ++r) out.row(ipos[r]) = interior_values.row(static_cast<Eigen::Index>(r));
  for (std::size_t r = 0; r < bpos.size(); ++r) out.row(bpos[r]) = boundary_values.row(static_cast<Eigen::Index>(r));
  return out;
}

LocalSolveError wrap_local_failure(const char* what, int node, const MultiscaleContext& ctx, double kappa,
                                   const std::exception& e) {
  std::ostringstream msg;
  msg << what << " on neighborhood " << node << " (k = " << kappa << ", "
      << ctx.neighborhood(node).interior.size() << " unknowns) failed: " << e.what();
  return LocalSolveError(msg.str());
}

template <class F>
void for_each_item(Execution exec, int count, F&& body) {
  if (exec == Execution::parallel) {
    // Exceptions may not cross the OpenMP region; keep the first one by index.
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
    for (int item = 0; item < count; ++item) {
      try {
        body(item);
      } catch (...) {
        errors[static_cast<std::size_t>(item)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (int item = 0; item < count; ++item) body(item);
  }
}

}  // namespace

ComplexVector LocalField::extend(Eigen::Index global_size) const {
  ComplexVector out = ComplexVector::Zero(global_size);
  for (std::size_t r = 0; r < nodes.size(); ++r) out[nodes[r]] = values[static_cast<Eigen::Index>(r)];
  return out;
}

MultiscaleContext::MultiscaleContext(std::shared_ptr<const DomainSpec> spec, std::shared_ptr<const FineMesh> mesh,
                                     std::shared_ptr<const CoarseGrid> grid,
                                     std::shared_ptr<const AssembledSystem> system)
    : spec_(std::move(spec)), mesh_(std::move(mesh)), grid_(std::move(grid)), system_(std::move(system)) {
  if (!spec_ || !mesh_ || !grid_ || !system_) throw Error("multiscale context needs all inputs");
  if (system_->system.rows() != static_cast<Eigen::Index>(mesh_->num_nodes()))
    throw DimensionError("multiscale context: system and mesh disagree");
  if (grid_->nc * grid_->ratio != mesh_->n) throw DimensionError("multiscale context: grids are not nested");
  neighborhoods_.reserve(grid_->num_nodes());
  for (int v = 0; v < static_cast<int>(grid_->num_nodes()); ++v)
    neighborhoods_.push_back(collect(grid_->neighborhood_lattice_box(v)));
}

const LocalDofs& MultiscaleContext::neighborhood(int node) const {
  if (node < 0 || node >= num_coarse_nodes()) throw Error("coarse node " + std::to_string(node) + " out of range");
  return neighborhoods_[static_cast<std::size_t>(node)];
}

LocalDofs MultiscaleContext::element_dofs(int element) const {
  return collect(grid_->element_lattice_box(element));
}

LocalDofs MultiscaleContext::collect(const std::array<int, 4>& box) const {
  const auto [i0, j0, i1, j1] = box;
  LocalDofs d;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const int g = mesh_->node_at(i, j);
      if (g < 0) continue;
      d.nodes.push_back(g);
      if (i > i0 && i < i1 && j > j0 && j < j1)
        d.interior.push_back(g);
      else
        d.boundary.push_back(g);
    }
  }
  return d;
}

ComplexSparseMatrix MultiscaleContext::helmholtz_operator(double kappa) const {
  ComplexSparseMatrix a = system_->stiffness - (kappa * kappa) * system_->mass;
  a.makeCompressed();
  return a;
}

LocalProblem::LocalProblem(const ComplexSparseMatrix& a, const std::vector<int>& interior,
                           const std::vector<int>& boundary) {
  std::vector<Triplet> tii;
  std::vector<Triplet> tib;
  for (std::size_t r = 0; r < interior.size(); ++r) {
    for (ComplexSparseMatrix::InnerIterator it(a, interior[r]); it; ++it) {
      const int c = static_cast<int>(it.col());
      if (const int p = position_of(interior, c); p >= 0) {
        tii.emplace_back(static_cast<int>(r), p, it.value());
      } else if (const int q = position_of(boundary, c); q >= 0) {
        tib.emplace_back(static_cast<int>(r), q, it.value());
      } else {
        throw DimensionError("local problem: node " + std::to_string(interior[r]) +
                             " couples to a node outside the region");
      }
    }
  }
  const int ni = static_cast<int>(interior.size());
  a_ii_ = finalize(ni, ni, tii);
  a_ib_ = finalize(ni, static_cast<int>(boundary.size()), tib);
  if (ni > 0) solver_.emplace(a_ii_);
}

ComplexDenseMatrix LocalProblem::solve(const ComplexDenseMatrix& boundary_data, const ComplexDenseMatrix* load) const {
  if (boundary_data.rows() != a_ib_.cols()) throw DimensionError("local problem: boundary data has wrong length");
  ComplexDenseMatrix rhs = -(a_ib_ * boundary_data);
  if (load) {
    if (load->rows() != rhs.rows() || load->cols() != rhs.cols())
      throw DimensionError("local problem: load has wrong shape");
    rhs += *load;
  }
  if (!solver_) return ComplexDenseMatrix(0, boundary_data.cols());
  return solver_->solve(rhs);
}

PartitionOfUnity build_pu(const MultiscaleContext& ctx, double k_pu, Execution exec) {
  if (k_pu < 0.0) throw Error("PU wavenumber must be nonnegative");
  const CoarseGrid& grid = ctx.grid();
  const FineMesh& mesh = ctx.mesh();
  const ComplexSparseMatrix op = ctx.helmholtz_operator(k_pu);

  struct ElementSolution {
    std::vector<int> interior;
    ComplexDenseMatrix values;  // interior x 4 corners
  };
  const int ne = static_cast<int>(grid.num_elements());
  std::vector<ElementSolution> slots(static_cast<std::size_t>(ne));

  for_each_item(exec, ne, [&](int e) {
    LocalDofs dofs = ctx.element_dofs(e);
    const auto& corners = grid.coarse_elements[static_cast<std::size_t>(e)];
    ComplexDenseMatrix data(static_cast<Eigen::Index>(dofs.boundary.size()), 4);
    for (std::size_t r = 0; r < dofs.boundary.size(); ++r) {
      const Point p = mesh.nodes[static_cast<std::size_t>(dofs.boundary[r])];
      for (int c = 0; c < 4; ++c) data(static_cast<Eigen::Index>(r), c) = grid.hat(corners[static_cast<std::size_t>(c)], p);
    }
    try {
      LocalProblem problem(op, dofs.interior, dofs.boundary);
      slots[static_cast<std::size_t>(e)] = {std::move(dofs.interior), problem.solve(data)};
    } catch (const SingularMatrixError& err) {
      std::ostringstream msg;
      msg << "partition of unity: local problem on coarse element " << e << " is singular at k_pu = " << k_pu
          << " (try k_pu = 0): " << err.what();
      throw LocalSolveError(msg.str());
    }
  });

  PartitionOfUnity pu;
  pu.pu_wavenumber = k_pu;
  pu.chi.resize(grid.num_nodes());
  const int r = grid.ratio;
  for (int v = 0; v < static_cast<int>(grid.num_nodes()); ++v) {
    const LocalDofs& dofs = ctx.neighborhood(v);
    LocalField& chi = pu.chi[static_cast<std::size_t>(v)];
    chi.nodes = dofs.nodes;
    chi.values = ComplexVector::Zero(static_cast<Eigen::Index>(dofs.nodes.size()));
    for (std::size_t q = 0; q < dofs.nodes.size(); ++q) {
      const int g = dofs.nodes[q];
      const auto [i, j] = mesh.node_lattice[static_cast<std::size_t>(g)];
      if (i % r == 0 || j % r == 0) {
        chi.values[static_cast<Eigen::Index>(q)] = grid.hat(v, mesh.nodes[static_cast<std::size_t>(g)]);
        continue;
      }
      const int e = i / r + (j / r) * grid.nc;
      const auto& corners = grid.coarse_elements[static_cast<std::size_t>(e)];
      const auto corner = std::find(corners.begin(), corners.end(), v) - corners.begin();
      if (corner == 4) continue;
      const ElementSolution& s = slots[static_cast<std::size_t>(e)];
      const int row = position_of(s.interior, g);
      chi.values[static_cast<Eigen::Index>(q)] = s.values(row, corner);
    }
  }
  return pu;
}

EdgeTraces edge_wavelet_traces(const MultiscaleContext& ctx, int node, int level) {
  const LocalDofs& dofs = ctx.neighborhood(node);
  const auto& chains = ctx.grid().edge_chains[static_cast<std::size_t>(node)];
  const wavelet::HaarBasis basis(level);
  const int dim = basis.dim();
  EdgeTraces traces;
  traces.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dofs.boundary.size()),
                                        static_cast<Eigen::Index>(chains.size()) * dim);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const EdgeChain& chain = chains[c];
    const std::size_t last = chain.nodes.size() - 1;
    for (std::size_t q = 0; q <= last; ++q) {
      if (q == last && !chain.owns_end) continue;
      if (chain.nodes[q] < 0) continue;
      const int row = position_of(dofs.boundary, chain.nodes[q]);
      if (row < 0) throw Error("edge chain node is not a Dirichlet node of its neighborhood");
      for (int f = 0; f < dim; ++f)
        traces.values(row, static_cast<Eigen::Index>(c) * dim + f) = basis.eval(f, chain.t[q]);
    }
    for (int f = 0; f < dim; ++f) traces.index.push_back({static_cast<int>(c), f});
  }
  return traces;
}

LocalField local_solve(const MultiscaleContext& ctx, int node, const ComplexVector& boundary_data,
                       std::optional<double> kappa) {
  const LocalDofs& dofs = ctx.neighborhood(node);
  if (boundary_data.size() != static_cast<Eigen::Index>(dofs.boundary.size()))
    throw DimensionError("local_solve: boundary data does not match the neighborhood");
  const double k = kappa.value_or(ctx.spec().wavenumber);
  try {
    const LocalProblem problem(kappa ? ctx.helmholtz_operator(k) : ctx.system().system, dofs.interior, dofs.boundary);
    const ComplexDenseMatrix data = boundary_data;
    const ComplexDenseMatrix inner = problem.solve(data);
    return {dofs.nodes, scatter_local(dofs, inner, data).col(0)};
  } catch (const SingularMatrixError& e) {
    throw wrap_local_failure("local solve", node, ctx, k, e);
  }
}

LocalField local_bubble(const MultiscaleContext& ctx, int node, std::optional<double> kappa) {
  const LocalDofs& dofs = ctx.neighborhood(node);
  const double k = kappa.value_or(ctx.spec().wavenumber);
  try {
    const LocalProblem problem(kappa ? ctx.helmholtz_operator(k) : ctx.system().system, dofs.interior, dofs.boundary);
    const ComplexDenseMatrix data = ComplexDenseMatrix::Zero(static_cast<Eigen::Index>(dofs.boundary.size()), 1);
    ComplexDenseMatrix load(static_cast<Eigen::Index>(dofs.interior.size()), 1);
    for (std::size_t r = 0; r < dofs.interior.size(); ++r)
      load(static_cast<Eigen::Index>(r), 0) = ctx.system().unit_load[dofs.interior[r]];
    const ComplexDenseMatrix inner = problem.solve(data, &load);
    return {dofs.nodes, scatter_local(dofs, inner, data).col(0)};
  } catch (const SingularMatrixError& e) {
    throw wrap_local_failure("bubble solve", node, ctx, k, e);
  }
}

MultiscaleSpace build_space(const MultiscaleContext& ctx, const PartitionOfUnity& pu, int level, Execution exec) {
  const int nodes = ctx.num_coarse_nodes();
  if (static_cast<int>(pu.chi.size()) != nodes) throw DimensionError("build_space: PU does not match the coarse grid");

  struct NeighborhoodColumns {
    ComplexDenseMatrix columns;  // local nodes x kept
    std::vector<ColumnIndex> kept;
    std::vector<ColumnIndex> dropped;
    std::size_t candidates = 0;
  };
  std::vector<NeighborhoodColumns> slots(static_cast<std::size_t>(nodes));
  const AssembledSystem& sys = ctx.system();

  for_each_item(exec, nodes, [&](int v) {
    const LocalDofs& dofs = ctx.neighborhood(v);
    const LocalField& chi = pu.chi[static_cast<std::size_t>(v)];
    if (chi.nodes != dofs.nodes) throw DimensionError("build_space: PU support differs from the neighborhood");
    const EdgeTraces traces = edge_wavelet_traces(ctx, v, level);
    const auto m = static_cast<Eigen::Index>(traces.index.size());
    const auto nb = static_cast<Eigen::Index>(dofs.boundary.size());
    const auto ni = static_cast<Eigen::Index>(dofs.interior.size());

    ComplexDenseMatrix data = ComplexDenseMatrix::Zero(nb, m + 1);
    data.leftCols(m) = traces.values.cast<Complex>();
    ComplexDenseMatrix load = ComplexDenseMatrix::Zero(ni, m + 1);
    for (Eigen::Index r = 0; r < ni; ++r) load(r, m) = sys.unit_load[dofs.interior[static_cast<std::size_t>(r)]];

    ComplexDenseMatrix local;
    try {
      const LocalProblem problem(sys.system, dofs.interior, dofs.boundary);
      local = scatter_local(dofs, problem.solve(data, &load), data);
    } catch (const SingularMatrixError& e) {
      throw wrap_local_failure("basis construction", v, ctx, ctx.spec().wavenumber, e);
    }
    local = chi.values.asDiagonal() * local;

    std::vector<ColumnIndex> candidates;
    for (const TraceIndex& t : traces.index) candidates.push_back({v, ColumnIndex::Kind::edge, t.chain, t.wavelet});
    candidates.push_back({v, ColumnIndex::Kind::bubble, -1, -1});

    // Rank filter on unit-norm columns; kept columns stay unscaled and in
    // their original order.
    ComplexDenseMatrix scaled = local;
    for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
      const double norm = scaled.col(c).norm();
      if (norm > 0.0) scaled.col(c) /= norm;
    }
    Eigen::ColPivHouseholderQR<ComplexDenseMatrix> qr(scaled.rows(), scaled.cols());
    qr.setThreshold(kRankDropTolerance);
    qr.compute(scaled);
    const Eigen::Index rank = scaled.rows() == 0 ? 0 : qr.rank();
    if (rank == 0) {
      throw LocalSolveError("neighborhood " + std::to_string(v) +
                            " produced only zero basis columns (covered by perforations?)");
    }
    std::vector<int> keep(qr.colsPermutation().indices().data(), qr.colsPermutation().indices().data() + rank);
    std::sort(keep.begin(), keep.end());

    NeighborhoodColumns& out = slots[static_cast<std::size_t>(v)];
    out.candidates = candidates.size();
    out.columns.resize(local.rows(), static_cast<Eigen::Index>(keep.size()));
    std::vector<char> kept_flag(candidates.size(), 0);
    for (std::size_t c = 0; c < keep.size(); ++c) {
      out.columns.col(static_cast<Eigen::Index>(c)) = local.col(keep[c]);
      out.kept.push_back(candidates[static_cast<std::size_t>(keep[c])]);
      kept_flag[static_cast<std::size_t>(keep[c])] = 1;
    }
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (!kept_flag[c]) out.dropped.push_back(candidates[c]);
  });

  MultiscaleSpace space;
  space.level = level;
  std::vector<Triplet> triplets;
  int col = 0;
  for (int v = 0; v < nodes; ++v) {
    const NeighborhoodColumns& s = slots[static_cast<std::size_t>(v)];
    const auto& local_nodes = ctx.neighborhood(v).nodes;
    for (Eigen::Index c = 0; c < s.columns.cols(); ++c, ++col) {
      for (Eigen::Index r = 0; r < s.columns.rows(); ++r) {
        const Complex value = s.columns(r, c);
        if (value != Complex(0.0, 0.0)) triplets.emplace_back(local_nodes[static_cast<std::size_t>(r)], col, value);
      }
    }
    space.index.insert(space.index.end(), s.kept.begin(), s.kept.end());
    space.dropped.insert(space.dropped.end(), s.dropped.begin(), s.dropped.end());
    space.candidates += s.candidates;
  }
  space.prolongation.resize(static_cast<Eigen::Index>(ctx.mesh().num_nodes()), col);
  space.prolongation.setFromTriplets(triplets.begin(), triplets.end());
  space.prolongation.makeCompressed();
  return space;
}

MultiscaleSolution solve_multiscale(const AssembledSystem& system, std::shared_ptr<const FineMesh> mesh,
                                    const ComplexVector& load, const MultiscaleSpace& space) {
  const ComplexColMatrix& phi = space.prolongation;
  if (phi.rows() != system.system.rows() || load.size() != phi.rows())
    throw DimensionError("solve_multiscale: space, system and load live on different meshes");
  const Eigen::Index n = phi.cols();

  // Symmetric column scaling of the Galerkin matrix by the basis norms.
  Eigen::VectorXd scale(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double norm = phi.col(c).norm();
    scale[c] = norm > 0.0 ? 1.0 / norm : 1.0;
  }
  const ComplexColMatrix phi_scaled = phi * scale.cast<Complex>().asDiagonal();
  const ComplexColMatrix a_phi = ComplexColMatrix(system.system) * phi_scaled;
  const ComplexDenseMatrix coarse = ComplexDenseMatrix(ComplexColMatrix(phi_scaled.adjoint() * a_phi));
  const ComplexVector rhs = phi_scaled.adjoint() * load;

  ComplexVector y;
  try {
    y = solve_dense(coarse, rhs);
  } catch (const SingularMatrixError& e) {
    std::ostringstream msg;
    msg << "coarse Galerkin system is rank deficient (" << n << " columns, " << space.dropped.size()
        << " dropped by the rank filter): " << e.what();
    throw SingularMatrixError(msg.str(), e.pivot_index(), e.pivot_magnitude());
  }
  MultiscaleSolution sol;
  sol.coefficients = scale.cast<Complex>().asDiagonal() * y;
  sol.field.mesh = std::move(mesh);
  sol.field.values = phi * sol.coefficients;

  const ComplexVector residual = phi.adjoint() * (load - system.system * sol.field.values);
  const double bnorm = ComplexVector(phi.adjoint() * load).norm();
  sol.galerkin_residual = bnorm > 0.0 ? residual.norm() / bnorm : residual.norm();
  if (!(sol.galerkin_residual <= kGalerkinTolerance)) {
    std::ostringstream msg;
    msg << "coarse Galerkin residual " << sol.galerkin_residual << " exceeds " << kGalerkinTolerance;
    throw SingularMatrixError(msg.str(), -1, 0.0);
  }
  return sol;
}

EdgeProjection edge_projection(const MultiscaleContext& ctx, int node, int level, const ComplexVector& boundary_data) {
  const LocalDofs& dofs = ctx.neighborhood(node);
  if (boundary_data.size() != static_cast<Eigen::Index>(dofs.boundary.size()))
    throw DimensionError("edge_projection: boundary data does not match the neighborhood");
  const auto& chains = ctx.grid().edge_chains[static_cast<std::size_t>(node)];
  const wavelet::HaarBasis basis(level);
  const int dim = basis.dim();
  const EdgeTraces traces = edge_wavelet_traces(ctx, node, level);

  EdgeProjection out;
  out.index = traces.index;
  out.coefficients.assign(traces.index.size(), Complex(0.0, 0.0));
  double norm2 = 0.0;
  ComplexVector projected = ComplexVector::Zero(boundary_data.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const EdgeChain& chain = chains[c];
    const double sqrt_len = std::sqrt(chain.length);
    for (std::size_t q = 0; q + 1 < chain.nodes.size(); ++q) {
      if (chain.nodes[q] < 0) continue;
      const Complex v = boundary_data[position_of(dofs.boundary, chain.nodes[q])];
      const double a = chain.t[q];
      const double b = chain.t[q + 1];
      norm2 += std::norm(v) * (b - a) * chain.length;
      for (int f = 0; f < dim; ++f) {
        const auto idx = wavelet::from_flat(f);
        out.coefficients[c * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)] +=
            v * wavelet::haar_integral(idx.level, idx.translation, a, b) * sqrt_len;
      }
    }
    for (int f = 0; f < dim; ++f) {
      const auto col = static_cast<Eigen::Index>(c) * dim + f;
      projected += out.coefficients[static_cast<std::size_t>(col)] / sqrt_len *
                   traces.values.col(col).cast<Complex>();
    }
  }
  double captured = 0.0;
  for (const Complex& z : out.coefficients) captured += std::norm(z);
  out.boundary_norm = std::sqrt(norm2);
  out.boundary_residual = std::sqrt(std::max(0.0, norm2 - captured));
  out.field = local_solve(ctx, node, projected);
  return out;
}

void write_basis(const std::filesystem::path& dir, const MultiscaleSpace& space, std::shared_ptr<const FineMesh> mesh,
                 double k) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "basis_index.txt");
  if (!index) throw IoError("cannot write " + (dir / "basis_index.txt").string());
  for (std::size_t c = 0; c < space.size(); ++c) {
    const ColumnIndex& ci = space.index[c];
    index << ci.node << ' ' << (ci.kind == ColumnIndex::Kind::edge ? "edge" : "bubble") << ' ' << ci.chain << ' '
          << ci.wavelet << '\n';
    std::ofstream out(dir / ("basis_" + std::to_string(c) + ".txt"));
    if (!out) throw IoError("cannot write basis column " + std::to_string(c));
    write_field(out, FemField{mesh, space.column(static_cast<int>(c))}, k);
  }
}

}  // namespace wemsfem
