#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "wemsfem/geometry.hpp"

namespace wemsfem {

enum class NodeClass { interior, outer_boundary, interface };

std::string to_string(NodeClass c);

/// Fine-mesh edge between two retained nodes.
struct Segment {
  int a = -1;
  int b = -1;
};

/// Integer position on the fine lattice.
struct LatticeIndex {
  int i = 0;
  int j = 0;
};

/// Structured triangulation of the perforated domain. The outer box is
/// cut into n x n rectangular cells (n = 1/h), each split along its
/// lower-left to upper-right diagonal. Cells whose center lies strictly
/// inside a perforation are removed, and nodes touching no retained cell
/// are dropped from the numbering.
class FineMesh {
public:
  /// Normalized mesh size: fraction of the outer-box side length.
  double h = 0.0;
  int n = 0;
  Box box;
  /// Physical cell sizes along x and y.
  double hx = 0.0;
  double hy = 0.0;

  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<NodeClass> node_class;
  std::vector<Segment> outer_edges;
  std::vector<Segment> interface_edges;

  std::vector<LatticeIndex> node_lattice;
  /// Lattice (i + j*(n+1)) to retained node index, -1 when dropped.
  std::vector<int> lattice_to_node;
  /// Cell (i + j*n) retained flag.
  std::vector<char> cell_retained;
  /// Owning cell of each triangle.
  std::vector<int> triangle_cell;

  std::vector<std::string> warnings;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  double cell_width() const { return std::max(hx, hy); }

  int node_at(int i, int j) const {
    if (i < 0 || j < 0 || i > n || j > n) return -1;
    return lattice_to_node[static_cast<std::size_t>(i + j * (n + 1))];
  }
  bool cell_kept(int i, int j) const {
    return cell_retained[static_cast<std::size_t>(i + j * n)] != 0;
  }
  Point lattice_point(int i, int j) const {
    return {box.xmin + hx * i, box.ymin + hy * j};
  }
  double triangle_area(std::size_t t) const;
  double retained_area() const;
};

FineMesh build_fine_mesh(const DomainSpec& spec, double h);

/// Text dump: `nodes N triangles T h h`, then `x y class` per node and
/// `i j k` per triangle.
void write_mesh(std::ostream& out, const FineMesh& mesh);

/// Straight run of fine lattice nodes along one side of a coarse
/// neighborhood boundary, parameterized by arc length onto [0, 1].
struct EdgeChain {
  std::vector<LatticeIndex> lattice;
  /// Retained node index per lattice point (-1 inside a perforation).
  std::vector<int> nodes;
  std::vector<double> t;
  Point start;
  Point end;
  double length = 0.0;
  /// Whether the node at t = 1 belongs to this chain. It does not when the
  /// next chain (counterclockwise) starts there.
  bool owns_end = false;
};

/// Regular quadrilateral partition nested in the fine lattice.
class CoarseGrid {
public:
  /// Normalized coarse size: fraction of the outer-box side length.
  double H = 0.0;
  int nc = 0;
  /// Fine cells per coarse cell along each axis.
  int ratio = 0;
  double Hx = 0.0;
  double Hy = 0.0;

  std::vector<Point> coarse_nodes;
  /// Corner node indices, counterclockwise from the lower-left corner.
  std::vector<std::array<int, 4>> coarse_elements;
  /// Elements of omega_i per coarse node.
  std::vector<std::vector<int>> neighborhoods;
  std::vector<std::vector<EdgeChain>> edge_chains;
  /// Coarse elements whose closure contains each retained fine node.
  std::vector<std::vector<int>> fine_to_coarse;

  std::size_t num_nodes() const { return coarse_nodes.size(); }
  std::size_t num_elements() const { return coarse_elements.size(); }

  LatticeIndex node_position(int node) const { return {node % (nc + 1), node / (nc + 1)}; }
  LatticeIndex element_position(int element) const { return {element % nc, element / nc}; }

  /// Fine lattice bounds [i0, i1] x [j0, j1] of coarse element K.
  std::array<int, 4> element_lattice_box(int element) const;
  /// Fine lattice bounds of the neighborhood omega_i.
  std::array<int, 4> neighborhood_lattice_box(int node) const;

  /// Bilinear hat of coarse node i; equals the affine boundary data g_i on
  /// the coarse skeleton.
  double hat(int node, Point p) const;
};

CoarseGrid build_coarse_grid(const DomainSpec& spec, const FineMesh& fine, double H);

/// max over coarse elements K of #{i : K is contained in omega_i}.
int overlap_constant(const CoarseGrid& grid);

}  // namespace wemsfem
