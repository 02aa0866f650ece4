#include "wemsfem/fem.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace wemsfem {

namespace {

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double parse_double(std::string_view token) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw IoError("field dump: cannot parse number '" + std::string(token) + "'");
  return v;
}

struct PmlWeights {
  Complex gx{1.0, 0.0};
  Complex gy{1.0, 0.0};
};

PmlWeights pml_weights(const DomainSpec& spec, Point p) {
  if (spec.bc_kind != BoundaryKind::pml) return {};
  const Box& b = spec.outer_box;
  const double xn = std::clamp((p.x - b.xmin) / b.width(), 0.0, 1.0);
  const double yn = std::clamp((p.y - b.ymin) / b.height(), 0.0, 1.0);
  return {pml_stretch(spec, xn, b.width()), pml_stretch(spec, yn, b.height())};
}

}  // namespace

Complex pml_stretch(const DomainSpec& spec, double x, double axis_length) {
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream msg;
    msg << "PML coordinate " << x << " lies outside [0, 1]";
    throw GeometryError(msg.str());
  }
  const double xi = spec.pml_thickness / axis_length;
  if (!(xi > 0.0 && xi < 0.5)) throw GeometryError("PML thickness must be below half the axis length");
  const double c = spec.pml_strength;
  double d = 0.0;
  if (x < xi) {
    const double s = (x - xi) / xi;
    d = c / xi * s * s;
  } else if (x > 1.0 - xi) {
    const double s = (x - 1.0 + xi) / xi;
    d = c / xi * s * s;
  }
  return 1.0 / Complex(1.0, d / spec.wavenumber);
}

bool in_physical_region(const DomainSpec& spec, Point p) {
  if (spec.bc_kind != BoundaryKind::pml) return true;
  const Box& b = spec.outer_box;
  const double xn = (p.x - b.xmin) / b.width();
  const double yn = (p.y - b.ymin) / b.height();
  const double xi_x = spec.pml_thickness / b.width();
  const double xi_y = spec.pml_thickness / b.height();
  return xn >= xi_x && xn <= 1.0 - xi_x && yn >= xi_y && yn <= 1.0 - xi_y;
}

AssembledSystem assemble(const DomainSpec& spec, const FineMesh& mesh, Execution exec) {
  if (!(spec.outer_box == mesh.box)) throw DimensionError("assemble: mesh was not built from this domain");
  const auto nt = static_cast<long>(mesh.num_triangles());
  const int nn = static_cast<int>(mesh.num_nodes());

  // One fixed slot per element entry keeps the reduction order independent
  // of the thread count.
  std::vector<Triplet> stiff(static_cast<std::size_t>(nt) * 9);
  std::vector<Triplet> mass(stiff.size());
  std::vector<Triplet> nstiff(stiff.size());
  std::vector<Triplet> nmass(stiff.size());
  std::vector<Complex> load(static_cast<std::size_t>(nt) * 3);

  auto element = [&](long t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Point& a = mesh.nodes[static_cast<std::size_t>(tri[0])];
    const Point& b = mesh.nodes[static_cast<std::size_t>(tri[1])];
    const Point& c = mesh.nodes[static_cast<std::size_t>(tri[2])];
    const double twice_area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double area = 0.5 * twice_area;
    const double gx[3] = {(b.y - c.y) / twice_area, (c.y - a.y) / twice_area, (a.y - b.y) / twice_area};
    const double gy[3] = {(c.x - b.x) / twice_area, (a.x - c.x) / twice_area, (b.x - a.x) / twice_area};
    const Point centroid{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
    const PmlWeights w = pml_weights(spec, centroid);
    const Complex cx = w.gx / w.gy;
    const Complex cy = w.gy / w.gx;
    const Complex cm = 1.0 / (w.gx * w.gy);
    const double physical = in_physical_region(spec, centroid) ? 1.0 : 0.0;
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) {
        const auto slot = static_cast<std::size_t>(t * 9 + p * 3 + q);
        const double sx = area * gx[p] * gx[q];
        const double sy = area * gy[p] * gy[q];
        const double m = area / 12.0 * (p == q ? 2.0 : 1.0);
        stiff[slot] = Triplet(tri[p], tri[q], cx * sx + cy * sy);
        mass[slot] = Triplet(tri[p], tri[q], cm * m);
        nstiff[slot] = Triplet(tri[p], tri[q], physical * (sx + sy));
        nmass[slot] = Triplet(tri[p], tri[q], physical * m);
      }
      load[static_cast<std::size_t>(t * 3 + p)] = area / 3.0;
    }
  };

  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (long t = 0; t < nt; ++t) element(t);
  } else {
    for (long t = 0; t < nt; ++t) element(t);
  }

  AssembledSystem sys;
  sys.k = spec.wavenumber;
  sys.stiffness = finalize(nn, nn, stiff);
  sys.mass = finalize(nn, nn, mass);
  sys.norms.stiffness = finalize(nn, nn, nstiff);
  sys.norms.mass = finalize(nn, nn, nmass);

  std::vector<Triplet> robin;
  if (spec.bc_kind == BoundaryKind::robin) {
    for (const Segment& s : mesh.outer_edges) {
      const Point& pa = mesh.nodes[static_cast<std::size_t>(s.a)];
      const Point& pb = mesh.nodes[static_cast<std::size_t>(s.b)];
      const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
      robin.emplace_back(s.a, s.a, len / 3.0);
      robin.emplace_back(s.b, s.b, len / 3.0);
      robin.emplace_back(s.a, s.b, len / 6.0);
      robin.emplace_back(s.b, s.a, len / 6.0);
    }
  }
  sys.robin = finalize(nn, nn, robin);

  const double k = spec.wavenumber;
  sys.system = sys.stiffness - (k * k) * sys.mass - Complex(0.0, k) * sys.robin;
  sys.system.prune([](const int&, const int&, const Complex& v) { return std::abs(v) >= kPruneMagnitude; });
  sys.system.makeCompressed();

  sys.unit_load = ComplexVector::Zero(nn);
  for (long t = 0; t < nt; ++t)
    for (int p = 0; p < 3; ++p)
      sys.unit_load[mesh.triangles[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]] +=
          load[static_cast<std::size_t>(t * 3 + p)];
  return sys;
}

int nearest_node(const FineMesh& mesh, Point p) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
    const double dx = mesh.nodes[v].x - p.x;
    const double dy = mesh.nodes[v].y - p.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(v);
    }
  }
  const double h = mesh.cell_width();
  if (best < 0 || std::sqrt(best_d2) > h * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "source (" << p.x << ", " << p.y << ") is farther than h from every retained node";
    throw GeometryError(msg.str());
  }
  return best;
}

ComplexVector point_source_load(const FineMesh& mesh, Point p) {
  ComplexVector b = ComplexVector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  b[nearest_node(mesh, p)] = 1.0;
  return b;
}

FemField solve_fine(const AssembledSystem& system, std::shared_ptr<const FineMesh> mesh,
                    const ComplexVector& load) {
  if (mesh && static_cast<Eigen::Index>(mesh->num_nodes()) != load.size())
    throw DimensionError("solve_fine: load does not live on this mesh");
  return {std::move(mesh), solve_sparse(system.system, load)};
}

RelativeErrors relative_errors(const ErrorNorms& norms, const FemField& reference, const FemField& approx) {
  if (reference.values.size() != approx.values.size() || reference.values.size() != norms.mass.rows())
    throw DimensionError("relative_errors: fields live on different meshes");
  const ComplexVector diff = reference.values - approx.values;
  const double ref_l2 = energy(norms.mass, reference.values);
  const double ref_h1 = energy(norms.stiffness, reference.values);
  if (!(ref_l2 > 0.0) || !(ref_h1 > 0.0)) throw Error("relative_errors: reference field has zero norm");
  return {std::sqrt(std::max(0.0, energy(norms.mass, diff)) / ref_l2),
          std::sqrt(std::max(0.0, energy(norms.stiffness, diff)) / ref_h1)};
}

void write_field(std::ostream& out, const FemField& field, double k) {
  const auto n = field.values.size();
  if (field.mesh && static_cast<Eigen::Index>(field.mesh->num_nodes()) != n)
    throw DimensionError("write_field: value count does not match the mesh");
  out << "field " << n << " k ";
  write_double(out, k);
  out << '\n';
  for (Eigen::Index v = 0; v < n; ++v) {
    const Complex z = field.values[v];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw IoError("write_field: non-finite value");
    const Point p = field.mesh ? field.mesh->nodes[static_cast<std::size_t>(v)] : Point{};
    write_double(out, p.x);
    out << ' ';
    write_double(out, p.y);
    out << ' ';
    write_double(out, z.real());
    out << ' ';
    write_double(out, z.imag());
    out << '\n';
  }
  if (!out) throw IoError("write_field: stream failure");
}

ComplexVector read_field(std::istream& in) {
  std::string tag, ktag;
  long n = -1;
  std::string kvalue;
  if (!(in >> tag >> n >> ktag >> kvalue) || tag != "field" || ktag != "k" || n < 0)
    throw IoError("field dump: bad header");
  ComplexVector values(n);
  std::string x, y, re, im;
  for (long v = 0; v < n; ++v) {
    if (!(in >> x >> y >> re >> im)) throw IoError("field dump: truncated at row " + std::to_string(v));
    values[v] = Complex(parse_double(re), parse_double(im));
  }
  return values;
}

}  // namespace wemsfem
