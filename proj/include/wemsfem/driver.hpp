#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wemsfem/fem.hpp"
#include "wemsfem/geometry.hpp"
#include "wemsfem/mesh.hpp"

namespace wemsfem {

/// Parameters of a run or study. Mesh sizes are fractions of the outer box
/// side; k and the PML thickness are physical.
struct RunConfig {
  ModelId model = ModelId::m1;
  double k = 16.0;
  double h = 1.0 / 128.0;
  std::vector<double> H_values{1.0 / 8.0};
  std::vector<int> levels{0, 1, 2, 3};
  Point source{0.0, 0.0};
  BoundaryKind bc_kind = BoundaryKind::pml;
  double pml_strength = 100.0;
  /// Defaults to one wavelength 2 pi / k.
  std::optional<double> pml_thickness;
  /// Defaults to k; 0 gives an exact partition of unity.
  std::optional<double> pu_wavenumber;
  std::uint64_t seed = 1;
  std::optional<int> perforation_count;
  int threads = 1;
  std::filesystem::path output_dir;
  bool dump_fields = false;
  /// When false the wall_seconds column is written as 0.
  bool record_timing = true;

  /// k = 64, h = 1/320, H = 1/10.
  static RunConfig paper_scale();

  /// Applies `key = value` settings; unknown keys raise ConfigError.
  void apply(const std::map<std::string, std::string>& values);
  void validate() const;

  double pu_k() const { return pu_wavenumber.value_or(k); }
  DomainSpec domain() const;
};

/// Reads a flat `key = value` file. Blank lines and `#` comments are
/// skipped; repeated keys keep the last value.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Accepts decimals and fractions such as `1/8`.
double parse_real(const std::string& text);
/// Accepts `0,1,3` and ranges such as `0..3`.
std::vector<int> parse_levels(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

/// Fine reference problem shared by all rows of a study.
struct FineRun {
  std::shared_ptr<const DomainSpec> spec;
  std::shared_ptr<const FineMesh> mesh;
  std::shared_ptr<const AssembledSystem> system;
  ComplexVector load;
  FemField reference;
};

FineRun run_fine(const RunConfig& config);

struct StudyRow {
  ModelId model = ModelId::m1;
  Point source;
  double H = 0.0;
  int level = 0;
  std::size_t n_ms = 0;
  double eL2 = 0.0;
  double eH1 = 0.0;
  double wall_seconds = 0.0;
  /// Empty on success.
  std::string error;
  std::filesystem::path field_path;

  bool ok() const { return error.empty(); }
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::filesystem::path reference_path;
  std::vector<std::string> warnings;

  bool ok() const;
  /// `model,source_x,source_y,H,level,n_ms,eL2,eH1,wall_seconds`; failed
  /// rows leave n_ms and both errors empty.
  void write_csv(std::ostream& out) const;
};

/// Sweeps every (H, level) pair against one fine reference. Module errors
/// are recorded on the affected rows and the sweep continues. Progress
/// lines go to `log` when given.
StudyReport run_study(const RunConfig& config, std::ostream* log = nullptr);

void dump_field(const FemField& field, double k, const std::filesystem::path& path);

}  // namespace wemsfem
