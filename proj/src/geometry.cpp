#include "wemsfem/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace wemsfem {

double Box::separation(const Box& b) const {
  const double gx = std::max(b.xmin - xmax, xmin - b.xmax);
  const double gy = std::max(b.ymin - ymax, ymin - b.ymax);
  return std::max(gx, gy);
}

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::m1: return "m1";
    case ModelId::m2: return "m2";
    case ModelId::m3: return "m3";
    case ModelId::m4: return "m4";
  }
  return "?";
}

ModelId parse_model_id(const std::string& name) {
  if (name == "m1") return ModelId::m1;
  if (name == "m2") return ModelId::m2;
  if (name == "m3") return ModelId::m3;
  if (name == "m4") return ModelId::m4;
  throw ConfigError("unknown model '" + name + "' (expected m1, m2, m3 or m4)");
}

std::string to_string(BoundaryKind kind) { return kind == BoundaryKind::robin ? "robin" : "pml"; }

BoundaryKind parse_boundary_kind(const std::string& name) {
  if (name == "robin") return BoundaryKind::robin;
  if (name == "pml") return BoundaryKind::pml;
  throw ConfigError("unknown boundary kind '" + name + "' (expected robin or pml)");
}

double wavelength(double k) { return 2.0 * std::numbers::pi / k; }

void DomainSpec::validate() const {
  if (!(outer_box.width() > 0.0 && outer_box.height() > 0.0))
    throw GeometryError("outer box is empty");
  if (!outer_box.contains(crystal_box)) throw GeometryError("crystal box is not inside the outer box");
  if (!(cell_size > 0.0)) throw GeometryError("cell size must be positive");
  if (!(wavenumber > 0.0)) throw GeometryError("wavenumber must be positive");
  if (!(pml_thickness > 0.0)) throw GeometryError("PML thickness must be positive");
  if (pml_strength < 0.0) throw GeometryError("PML strength must be nonnegative");
  for (std::size_t a = 0; a < perforations.size(); ++a) {
    const Box& p = perforations[a];
    if (!(p.width() > 0.0 && p.height() > 0.0))
      throw GeometryError("perforation " + std::to_string(a) + " is empty");
    if (!crystal_box.contains(p))
      throw GeometryError("perforation " + std::to_string(a) + " leaves the crystal box");
    for (std::size_t b = a + 1; b < perforations.size(); ++b) {
      if (p.separation(perforations[b]) <= 0.0)
        throw GeometryError("perforations " + std::to_string(a) + " and " + std::to_string(b) +
                            " are not disjoint");
    }
  }
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw GeometryError("override '" + key + "': cannot parse '" + text + "'");
  return value;
}

std::vector<Box> periodic_perforations(const Box& crystal, double eps, double lo, double hi) {
  const int nx = static_cast<int>(std::lround(crystal.width() / eps));
  const int ny = static_cast<int>(std::lround(crystal.height() / eps));
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(nx * ny));
  for (int b = 0; b < ny; ++b) {
    for (int a = 0; a < nx; ++a) {
      const double x0 = crystal.xmin + eps * a;
      const double y0 = crystal.ymin + eps * b;
      out.push_back({x0 + eps * lo, y0 + eps * lo, x0 + eps * hi, y0 + eps * hi});
    }
  }
  return out;
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Box> random_perforations(const Box& crystal, double side, int count, double gap,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(count));
  const double half = 0.5 * side;
  int tries = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++tries > kPlacementBudget) {
      std::ostringstream msg;
      msg << "random perforation placement failed: placed " << out.size() << " of " << count
          << " squares of side " << side << " after " << kPlacementBudget
          << " draws (seed " << seed << ")";
      throw GeometryError(msg.str());
    }
    const double cx = crystal.xmin + half + unit_uniform(rng) * (crystal.width() - side);
    const double cy = crystal.ymin + half + unit_uniform(rng) * (crystal.height() - side);
    const Box candidate{cx - half, cy - half, cx + half, cy + half};
    const bool fits = std::all_of(out.begin(), out.end(), [&](const Box& b) {
      return candidate.separation(b) >= gap;
    });
    if (fits) out.push_back(candidate);
  }
  return out;
}

}  // namespace

ModelOverrides ModelOverrides::from_map(const std::map<std::string, std::string>& values) {
  ModelOverrides o;
  for (const auto& [key, text] : values) {
    if (key == "k") {
      o.k = parse_number<double>(key, text);
    } else if (key == "seed") {
      o.seed = parse_number<std::uint64_t>(key, text);
    } else if (key == "perforation_count") {
      o.perforation_count = parse_number<int>(key, text);
    } else {
      throw GeometryError("invalid model override key '" + key +
                          "' (allowed: k, seed, perforation_count)");
    }
  }
  return o;
}

DomainSpec build_model(ModelId id, const ModelOverrides& overrides) {
  DomainSpec spec;
  spec.model = id;
  spec.wavenumber = overrides.k.value_or(kReferenceWavenumber);
  if (!(spec.wavenumber > 0.0)) throw GeometryError("override k must be positive");
  spec.pml_thickness = wavelength(spec.wavenumber);
  spec.seed = overrides.seed.value_or(1);
  if (overrides.perforation_count && *overrides.perforation_count < 0)
    throw GeometryError("override perforation_count must be nonnegative");

  switch (id) {
    case ModelId::m1:
    case ModelId::m2: {
      const double lo = id == ModelId::m1 ? 0.25 : 0.1;
      const double hi = id == ModelId::m1 ? 0.75 : 0.9;
      spec.perforations = periodic_perforations(spec.crystal_box, spec.cell_size, lo, hi);
      if (overrides.perforation_count) {
        const auto n = static_cast<std::size_t>(*overrides.perforation_count);
        if (n > spec.perforations.size())
          throw GeometryError("periodic models hold at most " +
                              std::to_string(spec.perforations.size()) + " perforations");
        spec.perforations.resize(n);
      }
      break;
    }
    case ModelId::m3:
    case ModelId::m4: {
      const double side = id == ModelId::m3 ? kPerforationSideM3 : kPerforationSideM4;
      const int count = overrides.perforation_count.value_or(id == ModelId::m3 ? kDefaultCountM3
                                                                                : kDefaultCountM4);
      spec.perforations = random_perforations(spec.crystal_box, side, count, kRandomMinGap, spec.seed);
      break;
    }
  }
  spec.validate();
  return spec;
}

PointClass classify_point(const DomainSpec& spec, Point p) {
  if (!spec.outer_box.contains(p)) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ") lies outside the outer box";
    throw GeometryError(msg.str());
  }
  for (const Box& b : spec.perforations) {
    if (b.strictly_contains(p)) return PointClass::perforation_interior;
  }
  return PointClass::fluid;
}

}  // namespace wemsfem
