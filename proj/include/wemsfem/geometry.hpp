#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wemsfem/common.hpp"

namespace wemsfem {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Closed axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  bool contains(Point p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
  bool strictly_contains(Point p) const { return p.x > xmin && p.x < xmax && p.y > ymin && p.y < ymax; }
  bool contains(const Box& b) const {
    return b.xmin >= xmin && b.xmax <= xmax && b.ymin >= ymin && b.ymax <= ymax;
  }
  /// Chebyshev gap between two boxes; negative when the interiors overlap.
  double separation(const Box& b) const;

  bool operator==(const Box&) const = default;
};

enum class ModelId { m1, m2, m3, m4 };
enum class BoundaryKind { robin, pml };
enum class PointClass { perforation_interior, fluid };

std::string to_string(ModelId id);
ModelId parse_model_id(const std::string& name);
std::string to_string(BoundaryKind kind);
BoundaryKind parse_boundary_kind(const std::string& name);

/// Perforated domain: the outer box minus a set of closed rectangular
/// perforations placed inside the crystal box.
struct DomainSpec {
  Box outer_box{-2.4, -2.4, 2.4, 2.4};
  Box crystal_box{-1.0, -1.0, 1.0, 1.0};
  double cell_size = 1.0 / 6.0;
  std::vector<Box> perforations;
  double wavenumber = 64.0;
  BoundaryKind bc_kind = BoundaryKind::pml;
  double pml_strength = 100.0;
  /// Physical thickness of the absorbing layer (one wavelength by default).
  double pml_thickness = 0.0;
  std::uint64_t seed = 1;
  std::optional<ModelId> model;

  /// Throws GeometryError when an invariant is violated.
  void validate() const;
};

/// Keys accepted by build_model: "k", "seed", "perforation_count".
struct ModelOverrides {
  std::optional<double> k;
  std::optional<std::uint64_t> seed;
  std::optional<int> perforation_count;

  static ModelOverrides from_map(const std::map<std::string, std::string>& values);
};

inline constexpr double kReferenceWavenumber = 64.0;
inline constexpr double kPerforationSideM3 = 0.08;
inline constexpr double kPerforationSideM4 = 0.24;
inline constexpr int kDefaultCountM3 = 144;
inline constexpr int kDefaultCountM4 = 20;
/// Minimum gap between random perforations (one desk-scale fine cell).
inline constexpr double kRandomMinGap = 0.04;
inline constexpr int kPlacementBudget = 1'000'000;

/// Wavelength 2*pi/k.
double wavelength(double k);

DomainSpec build_model(ModelId id, const ModelOverrides& overrides = {});

/// Strict-interior membership test; throws if p lies outside the outer box.
PointClass classify_point(const DomainSpec& spec, Point p);

}  // namespace wemsfem
