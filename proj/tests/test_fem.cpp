#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wemsfem/fem.hpp"

using namespace wemsfem;

namespace {

DomainSpec unit_square(BoundaryKind bc, double k) {
  DomainSpec spec;
  spec.outer_box = {0, 0, 1, 1};
  spec.crystal_box = {0.3, 0.3, 0.7, 0.7};
  spec.wavenumber = k;
  spec.pml_thickness = 0.125;
  spec.bc_kind = bc;
  return spec;
}

ComplexVector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  ComplexVector v(n);
  for (auto& z : v) z = oracle::random_complex(rng);
  return v;
}

double max_abs(const ComplexSparseMatrix& a) {
  double m = 0.0;
  for (int r = 0; r < a.outerSize(); ++r)
    for (ComplexSparseMatrix::InnerIterator it(a, r); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

// Nodal values of a coarse P1 field at the nodes of a nested finer mesh.
ComplexVector prolong(const FineMesh& coarse, const ComplexVector& u, const FineMesh& fine) {
  const int r = fine.n / coarse.n;
  ComplexVector out(static_cast<Eigen::Index>(fine.num_nodes()));
  for (std::size_t v = 0; v < fine.num_nodes(); ++v) {
    const LatticeIndex p = fine.node_lattice[v];
    const int ci = std::min(p.i / r, coarse.n - 1);
    const int cj = std::min(p.j / r, coarse.n - 1);
    const double s = static_cast<double>(p.i - ci * r) / r;
    const double t = static_cast<double>(p.j - cj * r) / r;
    const Complex u00 = u[coarse.node_at(ci, cj)], u10 = u[coarse.node_at(ci + 1, cj)];
    const Complex u01 = u[coarse.node_at(ci, cj + 1)], u11 = u[coarse.node_at(ci + 1, cj + 1)];
    out[static_cast<Eigen::Index>(v)] =
        s >= t ? u00 + s * (u10 - u00) + t * (u11 - u10) : u00 + t * (u01 - u00) + s * (u11 - u01);
  }
  return out;
}

}  // namespace

TEST_CASE("PML stretch profile") {
  DomainSpec spec = unit_square(BoundaryKind::pml, 10.0);
  spec.pml_thickness = 0.1;
  spec.pml_strength = 100.0;
  CHECK(std::abs(pml_stretch(spec, 0.1, 1.0) - 1.0) < 1e-15);
  CHECK(std::abs(pml_stretch(spec, 0.5, 1.0) - 1.0) < 1e-15);
  CHECK(std::abs(pml_stretch(spec, 0.0, 1.0) - 1.0 / Complex(1.0, 100.0)) < 1e-15);
  CHECK(std::abs(pml_stretch(spec, 1.0, 1.0) - 1.0 / Complex(1.0, 100.0)) < 1e-15);
  // Three quarters of the way from the inner edge of the layer to the wall.
  const double d = 100.0 / 0.1 * 0.75 * 0.75;
  CHECK(std::abs(pml_stretch(spec, 0.025, 1.0) - 1.0 / Complex(1.0, d / 10.0)) < 1e-14);
  CHECK(std::abs(pml_stretch(spec, 0.05, 2.0) - 1.0) < 1e-15);
  CHECK_THROWS_AS(pml_stretch(spec, -0.01, 1.0), GeometryError);
  CHECK_THROWS_AS(pml_stretch(spec, 1.2, 1.0), GeometryError);
}

TEST_CASE("plain assembly identities") {
  const DomainSpec spec = build_model(ModelId::m1, [] {
    ModelOverrides o;
    o.k = 8.0;
    return o;
  }());
  DomainSpec robin = spec;
  robin.bc_kind = BoundaryKind::robin;
  const FineMesh mesh = build_fine_mesh(robin, 1.0 / 128.0);
  const AssembledSystem sys = assemble(robin, mesh);
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  REQUIRE(sys.system.rows() == n);
  REQUIRE(sys.system.cols() == n);

  const ComplexVector one = ComplexVector::Ones(n);
  CHECK(std::abs(one.dot(sys.mass * one) - mesh.retained_area()) <= 1e-10 * mesh.retained_area());
  CHECK((sys.stiffness * one).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::abs(one.dot(sys.unit_load) - mesh.retained_area()) <= 1e-10 * mesh.retained_area());

  const ComplexSparseMatrix asym = sys.system - ComplexSparseMatrix(sys.system.transpose());
  CHECK(max_abs(asym) <= 1e-12 * max_abs(sys.system));
  for (const auto* m : {&sys.stiffness, &sys.mass, &sys.robin})
    for (int r = 0; r < m->outerSize(); ++r)
      for (ComplexSparseMatrix::InnerIterator it(*m, r); it; ++it) CHECK(it.value().imag() == 0.0);

  // The boundary block touches only outer-boundary nodes and is positive semidefinite.
  for (int r = 0; r < sys.robin.outerSize(); ++r)
    for (ComplexSparseMatrix::InnerIterator it(sys.robin, r); it; ++it) {
      CHECK(mesh.node_class[static_cast<std::size_t>(it.row())] == NodeClass::outer_boundary);
      CHECK(mesh.node_class[static_cast<std::size_t>(it.col())] == NodeClass::outer_boundary);
    }
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexVector v = random_vector(n, rng);
    CHECK(v.dot(sys.robin * v).real() >= 0.0);
  }
  CHECK(std::abs(one.dot(sys.robin * one) - 4.0 * robin.outer_box.width()) <= 1e-10);
}

TEST_CASE("Garding identity holds with equality") {
  const DomainSpec spec = unit_square(BoundaryKind::robin, 7.5);
  const FineMesh mesh = build_fine_mesh(spec, 1.0 / 64.0);
  const AssembledSystem sys = assemble(spec, mesh);
  const double k = spec.wavenumber;
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ComplexVector v = random_vector(static_cast<Eigen::Index>(mesh.num_nodes()), rng);
    const double lhs = v.dot(sys.system * v).real() + 2.0 * k * k * v.dot(sys.mass * v).real();
    const double norm = v_norm(sys.stiffness, sys.mass, k, v);
    worst = std::max(worst, std::abs(lhs - norm * norm) / (norm * norm));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("zero-strength PML reproduces the plain interior operator") {
  DomainSpec pml = unit_square(BoundaryKind::pml, 6.0);
  pml.pml_strength = 0.0;
  DomainSpec robin = pml;
  robin.bc_kind = BoundaryKind::robin;
  const FineMesh mesh = build_fine_mesh(pml, 1.0 / 32.0);
  const AssembledSystem a = assemble(pml, mesh);
  const AssembledSystem b = assemble(robin, mesh);
  CHECK(a.robin.nonZeros() == 0);
  const double k = pml.wavenumber;
  const ComplexSparseMatrix plain = b.stiffness - k * k * b.mass;
  CHECK(max_abs(a.system - plain) <= 1e-12 * max_abs(plain));
}

TEST_CASE("PML weights are complex only inside the layer") {
  const DomainSpec spec = unit_square(BoundaryKind::pml, 6.0);
  const FineMesh mesh = build_fine_mesh(spec, 1.0 / 32.0);
  const AssembledSystem sys = assemble(spec, mesh);
  int complex_rows = 0;
  for (int r = 0; r < sys.mass.outerSize(); ++r) {
    bool complex_row = false;
    for (ComplexSparseMatrix::InnerIterator it(sys.mass, r); it; ++it) complex_row |= it.value().imag() != 0.0;
    const Point p = mesh.nodes[static_cast<std::size_t>(r)];
    if (p.x > 0.2 && p.x < 0.8 && p.y > 0.2 && p.y < 0.8) CHECK_FALSE(complex_row);
    complex_rows += complex_row ? 1 : 0;
  }
  CHECK(complex_rows > 0);
}

TEST_CASE("serial and parallel assembly agree bitwise") {
  ModelOverrides o;
  o.k = 16.0;
  const DomainSpec spec = build_model(ModelId::m2, o);
  const FineMesh mesh = build_fine_mesh(spec, 1.0 / 128.0);
  const AssembledSystem a = assemble(spec, mesh, Execution::serial);
  const AssembledSystem b = assemble(spec, mesh, Execution::parallel);
  REQUIRE(a.system.nonZeros() == b.system.nonZeros());
  CHECK(std::equal(a.system.valuePtr(), a.system.valuePtr() + a.system.nonZeros(), b.system.valuePtr()));
  CHECK(std::equal(a.system.innerIndexPtr(), a.system.innerIndexPtr() + a.system.nonZeros(),
                   b.system.innerIndexPtr()));
  CHECK((a.unit_load - b.unit_load).norm() == 0.0);
}

TEST_CASE("nearest node and point sources") {
  const DomainSpec spec = build_model(ModelId::m1);
  const FineMesh mesh = build_fine_mesh(spec, 1.0 / 128.0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.3, 2.3);
  for (int trial = 0; trial < 20; ++trial) {
    const Point p{u(rng), u(rng)};
    if (classify_point(spec, p) != PointClass::fluid) continue;
    int best = -1;
    double best_d = 1e300;
    for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
      const double d = std::hypot(mesh.nodes[v].x - p.x, mesh.nodes[v].y - p.y);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(v);
      }
    }
    CHECK(nearest_node(mesh, p) == best);
  }

  const Point origin{0.0, 0.0};
  int brute = 0;
  for (std::size_t v = 1; v < mesh.num_nodes(); ++v)
    if (std::hypot(mesh.nodes[v].x, mesh.nodes[v].y) <
        std::hypot(mesh.nodes[static_cast<std::size_t>(brute)].x, mesh.nodes[static_cast<std::size_t>(brute)].y))
      brute = static_cast<int>(v);
  CHECK(nearest_node(mesh, origin) == brute);

  const int node = mesh.node_at(10, 20);
  REQUIRE(node >= 0);
  const ComplexVector b = point_source_load(mesh, mesh.nodes[static_cast<std::size_t>(node)]);
  CHECK(b[node] == Complex(1.0));
  CHECK(b.cwiseAbs().sum() == 1.0);

  // A cell center is equidistant from four corners; the lowest index wins.
  const Point center = mesh.lattice_point(10, 20);
  const Point mid{center.x + 0.5 * mesh.hx, center.y + 0.5 * mesh.hy};
  CHECK(nearest_node(mesh, mid) == node);

  DomainSpec holed = unit_square(BoundaryKind::robin, 4.0);
  holed.perforations = {{0.375, 0.375, 0.625, 0.625}};
  const FineMesh holed_mesh = build_fine_mesh(holed, 1.0 / 32.0);
  CHECK_THROWS_AS(point_source_load(holed_mesh, {0.5, 0.5}), GeometryError);
  CHECK_NOTHROW(point_source_load(holed_mesh, {0.38, 0.5}));
}

TEST_CASE("fine solve, errors and dumps") {
  const DomainSpec spec = unit_square(BoundaryKind::pml, 12.0);
  auto mesh = std::make_shared<const FineMesh>(build_fine_mesh(spec, 1.0 / 64.0));
  const AssembledSystem sys = assemble(spec, *mesh);
  const auto n = static_cast<Eigen::Index>(mesh->num_nodes());

  CHECK(solve_fine(sys, mesh, ComplexVector::Zero(n)).values.norm() == 0.0);
  CHECK_THROWS_AS(solve_fine(sys, mesh, ComplexVector::Zero(n + 1)), DimensionError);

  const FemField u = solve_fine(sys, mesh, point_source_load(*mesh, {0.5, 0.5}));
  CHECK((sys.system * u.values - point_source_load(*mesh, {0.5, 0.5})).norm() <= 1e-10);

  const RelativeErrors same = relative_errors(sys.norms, u, u);
  CHECK(same.l2 == 0.0);
  CHECK(same.h1 == 0.0);
  const RelativeErrors doubled = relative_errors(sys.norms, u, FemField{mesh, 2.0 * u.values});
  CHECK(doubled.l2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(doubled.h1 == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(8);
  const FemField noisy{mesh, u.values + 0.01 * random_vector(n, rng)};
  const Complex phase = std::polar(1.0, 0.7);
  const RelativeErrors base = relative_errors(sys.norms, u, noisy);
  const RelativeErrors rotated =
      relative_errors(sys.norms, FemField{mesh, phase * u.values}, FemField{mesh, phase * noisy.values});
  CHECK(std::abs(base.l2 - rotated.l2) <= 1e-12 * base.l2);
  CHECK(std::abs(base.h1 - rotated.h1) <= 1e-12 * base.h1);
  CHECK_THROWS(relative_errors(sys.norms, FemField{mesh, ComplexVector::Zero(n)}, u));

  std::stringstream io;
  write_field(io, u, spec.wavenumber);
  const std::string header = io.str().substr(0, io.str().find('\n'));
  CHECK(header == "field " + std::to_string(n) + " k 12");
  const ComplexVector back = read_field(io);
  REQUIRE(back.size() == n);
  CHECK(std::equal(back.begin(), back.end(), u.values.begin()));

  std::istringstream truncated("field 3 k 1\n0 0 1 0\n");
  CHECK_THROWS_AS(read_field(truncated), IoError);
}

TEST_CASE("free-space solution matches the Hankel Green's function") {
  ModelOverrides o;
  o.k = 16.0;
  o.perforation_count = 0;
  const DomainSpec spec = build_model(ModelId::m1, o);
  auto mesh = std::make_shared<const FineMesh>(build_fine_mesh(spec, 1.0 / 128.0));
  const AssembledSystem sys = assemble(spec, *mesh, Execution::parallel);
  const FemField u = solve_fine(sys, mesh, point_source_load(*mesh, {0.0, 0.0}));
  std::vector<Complex> samples, green;
  for (std::size_t v = 0; v < mesh->num_nodes(); ++v) {
    const double r = std::hypot(mesh->nodes[v].x, mesh->nodes[v].y);
    if (r < 4.0 / spec.wavenumber || r > 8.0 / spec.wavenumber) continue;
    samples.push_back(u.values[static_cast<Eigen::Index>(v)]);
    green.push_back(oracle::green_2d(spec.wavenumber, r));
  }
  REQUIRE(samples.size() > 100);
  const double mismatch = oracle::scaled_mismatch(samples, green);
  MESSAGE("annulus mismatch " << mismatch);
  CHECK(mismatch <= 0.10);
}

TEST_CASE("first-order H1 convergence under refinement") {
  const DomainSpec spec = unit_square(BoundaryKind::robin, 16.0);
  auto solve = [&](double h) {
    auto mesh = std::make_shared<const FineMesh>(build_fine_mesh(spec, h));
    const AssembledSystem sys = assemble(spec, *mesh, Execution::parallel);
    return std::make_pair(mesh, solve_fine(sys, mesh, sys.unit_load));
  };
  const auto [m0, u0] = solve(1.0 / 64.0);
  const auto [m1, u1] = solve(1.0 / 128.0);
  const auto [mr, ur] = solve(1.0 / 512.0);
  const AssembledSystem ref_sys = assemble(spec, *mr, Execution::parallel);
  auto distance = [&](const FineMesh& m, const FemField& u) {
    const ComplexVector diff = ur.values - prolong(m, u.values, *mr);
    return std::sqrt(energy(ref_sys.norms.stiffness, diff));
  };
  const double ratio = distance(*m0, u0) / distance(*m1, u1);
  MESSAGE("H1 reduction factor " << ratio);
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);
}
