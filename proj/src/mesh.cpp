#include "wemsfem/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

namespace wemsfem {

namespace {

constexpr double kGridTol = 1e-9;

int cells_per_side(double size, const char* what) {
  if (!(size > 0.0 && size <= 1.0)) {
    std::ostringstream msg;
    msg << what << " = " << size << " must lie in (0, 1] (fraction of the outer-box side)";
    throw MeshError(msg.str());
  }
  const double inv = 1.0 / size;
  const long n = std::lround(inv);
  if (n < 1 || std::abs(inv - static_cast<double>(n)) > kGridTol * inv) {
    std::ostringstream msg;
    msg << what << " = " << size << " does not divide the outer-box side";
    throw MeshError(msg.str());
  }
  return static_cast<int>(n);
}

bool off_grid(double coord, double origin, double step) {
  const double s = (coord - origin) / step;
  return std::abs(s - std::round(s)) > kGridTol * std::max(1.0, std::abs(s));
}

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

std::string to_string(NodeClass c) {
  switch (c) {
    case NodeClass::interior: return "interior";
    case NodeClass::outer_boundary: return "outer_boundary";
    case NodeClass::interface: return "interface";
  }
  return "?";
}

double FineMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point& a = nodes[static_cast<std::size_t>(tri[0])];
  const Point& b = nodes[static_cast<std::size_t>(tri[1])];
  const Point& c = nodes[static_cast<std::size_t>(tri[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double FineMesh::retained_area() const {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) sum += triangle_area(t);
  return sum;
}

FineMesh build_fine_mesh(const DomainSpec& spec, double h) {
  spec.validate();
  FineMesh mesh;
  mesh.h = h;
  mesh.n = cells_per_side(h, "h");
  mesh.box = spec.outer_box;
  const int n = mesh.n;
  mesh.hx = spec.outer_box.width() / n;
  mesh.hy = spec.outer_box.height() / n;

  // Perforation removal by the cell-center rule.
  mesh.cell_retained.assign(static_cast<std::size_t>(n) * n, 1);
  int snapped_edges = 0;
  for (std::size_t p = 0; p < spec.perforations.size(); ++p) {
    const Box& b = spec.perforations[p];
    if (b.width() < 2.0 * mesh.hx * (1.0 - kGridTol) || b.height() < 2.0 * mesh.hy * (1.0 - kGridTol)) {
      std::ostringstream msg;
      msg << "perforation " << p << " (" << b.width() << " x " << b.height()
          << ") is thinner than two fine cells (h = " << mesh.hx << ")";
      throw MeshError(msg.str());
    }
    snapped_edges += off_grid(b.xmin, mesh.box.xmin, mesh.hx) + off_grid(b.xmax, mesh.box.xmin, mesh.hx) +
                     off_grid(b.ymin, mesh.box.ymin, mesh.hy) + off_grid(b.ymax, mesh.box.ymin, mesh.hy);
    const int i0 = std::max(0, static_cast<int>(std::floor((b.xmin - mesh.box.xmin) / mesh.hx)) - 1);
    const int i1 = std::min(n - 1, static_cast<int>(std::ceil((b.xmax - mesh.box.xmin) / mesh.hx)) + 1);
    const int j0 = std::max(0, static_cast<int>(std::floor((b.ymin - mesh.box.ymin) / mesh.hy)) - 1);
    const int j1 = std::min(n - 1, static_cast<int>(std::ceil((b.ymax - mesh.box.ymin) / mesh.hy)) + 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Point c{mesh.box.xmin + (i + 0.5) * mesh.hx, mesh.box.ymin + (j + 0.5) * mesh.hy};
        if (b.strictly_contains(c)) mesh.cell_retained[static_cast<std::size_t>(i + j * n)] = 0;
      }
    }
  }
  if (snapped_edges > 0) {
    mesh.warnings.push_back(std::to_string(snapped_edges) +
                            " perforation edges are off the fine grid; snapped by the cell-center rule");
  }

  // Edge connectivity of the retained cells.
  {
    std::vector<int> component(mesh.cell_retained.size(), -1);
    std::vector<int> stack;
    int components = 0;
    for (int start = 0; start < n * n; ++start) {
      if (!mesh.cell_retained[static_cast<std::size_t>(start)] || component[static_cast<std::size_t>(start)] >= 0)
        continue;
      ++components;
      if (components > 1) throw MeshError("retained fine mesh is disconnected");
      stack.push_back(start);
      component[static_cast<std::size_t>(start)] = 0;
      while (!stack.empty()) {
        const int c = stack.back();
        stack.pop_back();
        const int ci = c % n;
        const int cj = c / n;
        const int nb[4][2] = {{ci - 1, cj}, {ci + 1, cj}, {ci, cj - 1}, {ci, cj + 1}};
        for (const auto& q : nb) {
          if (q[0] < 0 || q[1] < 0 || q[0] >= n || q[1] >= n) continue;
          const int id = q[0] + q[1] * n;
          if (mesh.cell_retained[static_cast<std::size_t>(id)] && component[static_cast<std::size_t>(id)] < 0) {
            component[static_cast<std::size_t>(id)] = 0;
            stack.push_back(id);
          }
        }
      }
    }
    if (components == 0) throw MeshError("every fine cell lies inside a perforation");
  }

  // Node numbering in lattice order.
  const int np = n + 1;
  auto kept = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < n && j < n && mesh.cell_retained[static_cast<std::size_t>(i + j * n)];
  };
  mesh.lattice_to_node.assign(static_cast<std::size_t>(np) * np, -1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const bool any = kept(i - 1, j - 1) || kept(i, j - 1) || kept(i - 1, j) || kept(i, j);
      if (!any) continue;
      const bool all_in_box_kept = [&] {
        for (int dj = -1; dj <= 0; ++dj)
          for (int di = -1; di <= 0; ++di) {
            const int ci = i + di, cj = j + dj;
            if (ci < 0 || cj < 0 || ci >= n || cj >= n) continue;
            if (!kept(ci, cj)) return false;
          }
        return true;
      }();
      const bool on_outer = i == 0 || j == 0 || i == n || j == n;
      mesh.lattice_to_node[static_cast<std::size_t>(i + j * np)] = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(mesh.lattice_point(i, j));
      mesh.node_lattice.push_back({i, j});
      mesh.node_class.push_back(on_outer ? NodeClass::outer_boundary
                                         : (all_in_box_kept ? NodeClass::interior : NodeClass::interface));
    }
  }

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!kept(i, j)) continue;
      const int n00 = mesh.node_at(i, j);
      const int n10 = mesh.node_at(i + 1, j);
      const int n11 = mesh.node_at(i + 1, j + 1);
      const int n01 = mesh.node_at(i, j + 1);
      mesh.triangles.push_back({n00, n10, n11});
      mesh.triangles.push_back({n00, n11, n01});
      mesh.triangle_cell.push_back(i + j * n);
      mesh.triangle_cell.push_back(i + j * n);
    }
  }

  // Boundary and interface edges (cell sides).
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i < n; ++i) {
      const bool below = kept(i, j - 1);
      const bool above = kept(i, j);
      if (!below && !above) continue;
      const Segment s{mesh.node_at(i, j), mesh.node_at(i + 1, j)};
      if (j == 0 || j == n)
        mesh.outer_edges.push_back(s);
      else if (below != above)
        mesh.interface_edges.push_back(s);
    }
  }
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool left = kept(i - 1, j);
      const bool right = kept(i, j);
      if (!left && !right) continue;
      const Segment s{mesh.node_at(i, j), mesh.node_at(i, j + 1)};
      if (i == 0 || i == n)
        mesh.outer_edges.push_back(s);
      else if (left != right)
        mesh.interface_edges.push_back(s);
    }
  }
  return mesh;
}

void write_mesh(std::ostream& out, const FineMesh& mesh) {
  out << "nodes " << mesh.num_nodes() << " triangles " << mesh.num_triangles() << " h ";
  write_double(out, mesh.h);
  out << '\n';
  for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
    write_double(out, mesh.nodes[v].x);
    out << ' ';
    write_double(out, mesh.nodes[v].y);
    out << ' ' << to_string(mesh.node_class[v]) << '\n';
  }
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

std::array<int, 4> CoarseGrid::element_lattice_box(int element) const {
  const auto [a, b] = element_position(element);
  return {a * ratio, b * ratio, (a + 1) * ratio, (b + 1) * ratio};
}

std::array<int, 4> CoarseGrid::neighborhood_lattice_box(int node) const {
  const auto [a, b] = node_position(node);
  const int n = nc * ratio;
  return {std::max(0, (a - 1) * ratio), std::max(0, (b - 1) * ratio), std::min(n, (a + 1) * ratio),
          std::min(n, (b + 1) * ratio)};
}

double CoarseGrid::hat(int node, Point p) const {
  const Point& o = coarse_nodes[static_cast<std::size_t>(node)];
  const double wx = std::max(0.0, 1.0 - std::abs(p.x - o.x) / Hx);
  const double wy = std::max(0.0, 1.0 - std::abs(p.y - o.y) / Hy);
  return wx * wy;
}

CoarseGrid build_coarse_grid(const DomainSpec& spec, const FineMesh& fine, double H) {
  CoarseGrid grid;
  grid.H = H;
  grid.nc = cells_per_side(H, "H");
  if (fine.n % grid.nc != 0) {
    std::ostringstream msg;
    msg << "coarse size H = " << H << " is not an integer multiple of h = " << fine.h;
    throw MeshError(msg.str());
  }
  grid.ratio = fine.n / grid.nc;
  grid.Hx = spec.outer_box.width() / grid.nc;
  grid.Hy = spec.outer_box.height() / grid.nc;
  const int nc = grid.nc;
  const int r = grid.ratio;

  for (int b = 0; b <= nc; ++b)
    for (int a = 0; a <= nc; ++a) grid.coarse_nodes.push_back(fine.lattice_point(a * r, b * r));

  auto node_id = [nc](int a, int b) { return a + b * (nc + 1); };
  for (int b = 0; b < nc; ++b) {
    for (int a = 0; a < nc; ++a) {
      const int e = static_cast<int>(grid.coarse_elements.size());
      grid.coarse_elements.push_back({node_id(a, b), node_id(a + 1, b), node_id(a + 1, b + 1), node_id(a, b + 1)});
      bool any = false;
      for (int j = b * r; j < (b + 1) * r && !any; ++j)
        for (int i = a * r; i < (a + 1) * r && !any; ++i) any = fine.cell_kept(i, j);
      if (!any) throw MeshError("coarse element " + std::to_string(e) + " lies entirely inside a perforation");
    }
  }

  grid.neighborhoods.resize(grid.coarse_nodes.size());
  for (std::size_t e = 0; e < grid.coarse_elements.size(); ++e)
    for (int v : grid.coarse_elements[e]) grid.neighborhoods[static_cast<std::size_t>(v)].push_back(static_cast<int>(e));
  for (auto& nb : grid.neighborhoods) std::sort(nb.begin(), nb.end());

  const int n = fine.n;
  grid.edge_chains.resize(grid.coarse_nodes.size());
  for (int v = 0; v < static_cast<int>(grid.coarse_nodes.size()); ++v) {
    const auto [i0, j0, i1, j1] = grid.neighborhood_lattice_box(v);
    // Counterclockwise sides: bottom, right, top, left; a side on the outer
    // boundary is not a chain.
    const std::array<bool, 4> present = {j0 > 0, i1 < n, j1 < n, i0 > 0};
    const std::array<LatticeIndex, 4> from = {LatticeIndex{i0, j0}, {i1, j0}, {i1, j1}, {i0, j1}};
    const std::array<LatticeIndex, 4> to = {LatticeIndex{i1, j0}, {i1, j1}, {i0, j1}, {i0, j0}};
    for (int s = 0; s < 4; ++s) {
      if (!present[static_cast<std::size_t>(s)]) continue;
      EdgeChain chain;
      const LatticeIndex a = from[static_cast<std::size_t>(s)];
      const LatticeIndex b = to[static_cast<std::size_t>(s)];
      const int di = (b.i > a.i) - (b.i < a.i);
      const int dj = (b.j > a.j) - (b.j < a.j);
      const int steps = std::abs(b.i - a.i) + std::abs(b.j - a.j);
      for (int q = 0; q <= steps; ++q) {
        const LatticeIndex li{a.i + q * di, a.j + q * dj};
        chain.lattice.push_back(li);
        chain.nodes.push_back(fine.node_at(li.i, li.j));
        chain.t.push_back(q == steps ? 1.0 : static_cast<double>(q) / steps);
      }
      chain.start = fine.lattice_point(a.i, a.j);
      chain.end = fine.lattice_point(b.i, b.j);
      chain.length = steps * (di != 0 ? fine.hx : fine.hy);
      chain.owns_end = !present[static_cast<std::size_t>((s + 1) % 4)];
      grid.edge_chains[static_cast<std::size_t>(v)].push_back(std::move(chain));
    }
  }

  grid.fine_to_coarse.resize(fine.num_nodes());
  for (std::size_t v = 0; v < fine.num_nodes(); ++v) {
    const auto [i, j] = fine.node_lattice[v];
    for (int b = std::max(0, j / r - 1); b <= std::min(nc - 1, j / r); ++b) {
      for (int a = std::max(0, i / r - 1); a <= std::min(nc - 1, i / r); ++a) {
        if (a * r <= i && i <= (a + 1) * r && b * r <= j && j <= (b + 1) * r)
          grid.fine_to_coarse[v].push_back(a + b * nc);
      }
    }
  }
  return grid;
}

int overlap_constant(const CoarseGrid& grid) {
  std::vector<int> count(grid.num_elements(), 0);
  for (const auto& nb : grid.neighborhoods)
    for (int e : nb) ++count[static_cast<std::size_t>(e)];
  return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
}

}  // namespace wemsfem
