#include "wemsfem/driver.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wemsfem/msbasis.hpp"

namespace wemsfem {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_plain(const std::string& text, const char* what) {
  T value{};
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(std::string("cannot parse ") + what + " '" + text + "'");
  return value;
}

bool parse_bool(const std::string& text) {
  const std::string t = trim(text);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ConfigError("cannot parse boolean '" + text + "'");
}

// Integer ratio test tolerant to the rounding of values such as 1/3.
bool near_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

void write_number(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

std::string number_tag(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void set_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double parse_real(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_plain<double>(text, "number");
  const double num = parse_plain<double>(text.substr(0, slash), "numerator");
  const double den = parse_plain<double>(text.substr(slash + 1), "denominator");
  if (den == 0.0) throw ConfigError("zero denominator in '" + text + "'");
  return num / den;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split(text, ',')) out.push_back(parse_real(item));
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  for (const std::string& item : split(text, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_plain<int>(item, "level"));
      continue;
    }
    const int lo = parse_plain<int>(item.substr(0, dots), "level");
    const int hi = parse_plain<int>(item.substr(dots + 2), "level");
    if (hi < lo) throw ConfigError("empty level range '" + item + "'");
    for (int l = lo; l <= hi; ++l) out.push_back(l);
  }
  return out;
}

RunConfig RunConfig::paper_scale() {
  RunConfig c;
  c.k = kReferenceWavenumber;
  c.h = 1.0 / 320.0;
  c.H_values = {1.0 / 10.0};
  return c;
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "model") {
      model = parse_model_id(trim(value));
    } else if (key == "k") {
      k = parse_real(value);
    } else if (key == "h") {
      h = parse_real(value);
    } else if (key == "H") {
      H_values = parse_real_list(value);
    } else if (key == "levels") {
      levels = parse_levels(value);
    } else if (key == "source") {
      const auto xy = parse_real_list(value);
      if (xy.size() != 2) throw ConfigError("source needs two coordinates, got '" + value + "'");
      source = {xy[0], xy[1]};
    } else if (key == "bc") {
      bc_kind = parse_boundary_kind(trim(value));
    } else if (key == "pml_strength") {
      pml_strength = parse_real(value);
    } else if (key == "pml_thickness") {
      pml_thickness = parse_real(value);
    } else if (key == "pu_wavenumber") {
      pu_wavenumber = parse_real(value);
    } else if (key == "seed") {
      seed = parse_plain<std::uint64_t>(value, "seed");
    } else if (key == "perforation_count") {
      perforation_count = parse_plain<int>(value, "perforation count");
    } else if (key == "threads") {
      threads = parse_plain<int>(value, "thread count");
    } else if (key == "out") {
      output_dir = trim(value);
    } else if (key == "dump_fields") {
      dump_fields = parse_bool(value);
    } else if (key == "timing") {
      record_timing = parse_bool(value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

void RunConfig::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("k must be positive");
  if (!(h > 0.0) || !near_integer(1.0 / h)) throw ConfigError("1/h must be a positive integer");
  if (H_values.empty()) throw ConfigError("at least one H is required");
  for (double H : H_values) {
    if (!(H > 0.0) || !near_integer(1.0 / H) || !near_integer(H / h) || H < h)
      throw ConfigError("H = " + number_tag(H) + " must divide 1 and be a multiple of h = " + number_tag(h));
  }
  if (levels.empty()) throw ConfigError("at least one level is required");
  for (int l : levels)
    if (l < 0 || l > 20) throw ConfigError("level " + std::to_string(l) + " out of range");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (pu_wavenumber && *pu_wavenumber < 0.0) throw ConfigError("pu_wavenumber must be nonnegative");
  if (pml_thickness && !(*pml_thickness > 0.0)) throw ConfigError("pml_thickness must be positive");
  if (pml_strength < 0.0) throw ConfigError("pml_strength must be nonnegative");
}

DomainSpec RunConfig::domain() const {
  ModelOverrides o;
  o.k = k;
  o.seed = seed;
  o.perforation_count = perforation_count;
  DomainSpec spec = build_model(model, o);
  spec.bc_kind = bc_kind;
  spec.pml_strength = pml_strength;
  if (pml_thickness) spec.pml_thickness = *pml_thickness;
  spec.validate();
  return spec;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

FineRun run_fine(const RunConfig& config) {
  config.validate();
  set_threads(config.threads);
  const Execution exec = config.threads > 1 ? Execution::parallel : Execution::serial;
  FineRun run;
  run.spec = std::make_shared<const DomainSpec>(config.domain());
  run.mesh = std::make_shared<const FineMesh>(build_fine_mesh(*run.spec, config.h));
  run.system = std::make_shared<const AssembledSystem>(assemble(*run.spec, *run.mesh, exec));
  run.load = point_source_load(*run.mesh, config.source);
  run.reference = solve_fine(*run.system, run.mesh, run.load);
  return run;
}

bool StudyReport::ok() const {
  for (const StudyRow& r : rows)
    if (!r.ok()) return false;
  return true;
}

void StudyReport::write_csv(std::ostream& out) const {
  out << "model,source_x,source_y,H,level,n_ms,eL2,eH1,wall_seconds\n";
  for (const StudyRow& r : rows) {
    out << to_string(r.model) << ',';
    write_number(out, r.source.x);
    out << ',';
    write_number(out, r.source.y);
    out << ',';
    write_number(out, r.H);
    out << ',' << r.level << ',';
    if (r.ok()) {
      out << r.n_ms << ',';
      write_number(out, r.eL2);
      out << ',';
      write_number(out, r.eH1);
    } else {
      out << ",,";
    }
    out << ',';
    write_number(out, r.wall_seconds);
    out << '\n';
  }
}

void dump_field(const FemField& field, double k, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_field(out, field, k);
}

StudyReport run_study(const RunConfig& config, std::ostream* log) {
  config.validate();
  StudyReport report;

  auto make_row = [&](double H, int level) {
    StudyRow row;
    row.model = config.model;
    row.source = config.source;
    row.H = H;
    row.level = level;
    return row;
  };
  auto fail_rows = [&](double H, const std::string& what) {
    for (int level : config.levels) {
      StudyRow row = make_row(H, level);
      row.error = what;
      report.rows.push_back(std::move(row));
    }
    if (log) *log << "H = " << H << ": " << what << '\n';
  };

  std::optional<FineRun> fine;
  try {
    fine = run_fine(config);
  } catch (const Error& e) {
    for (double H : config.H_values) fail_rows(H, std::string("fine reference: ") + e.what());
  }

  if (fine) {
    report.warnings = fine->mesh->warnings;
    if (log) *log << "fine mesh: " << fine->mesh->num_nodes() << " nodes\n";
    if (config.dump_fields && !config.output_dir.empty()) {
      report.reference_path = config.output_dir / "fine.txt";
      dump_field(fine->reference, config.k, report.reference_path);
    }
    const Execution exec = config.threads > 1 ? Execution::parallel : Execution::serial;
    for (double H : config.H_values) {
      std::shared_ptr<const CoarseGrid> grid;
      std::optional<MultiscaleContext> ctx;
      std::optional<PartitionOfUnity> pu;
      try {
        grid = std::make_shared<const CoarseGrid>(build_coarse_grid(*fine->spec, *fine->mesh, H));
        ctx.emplace(fine->spec, fine->mesh, grid, fine->system);
        pu = build_pu(*ctx, config.pu_k(), exec);
      } catch (const Error& e) {
        fail_rows(H, e.what());
        continue;
      }
      for (int level : config.levels) {
        StudyRow row = make_row(H, level);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const MultiscaleSpace space = build_space(*ctx, *pu, level, exec);
          const MultiscaleSolution sol = solve_multiscale(*fine->system, fine->mesh, fine->load, space);
          const RelativeErrors err = relative_errors(fine->system->norms, fine->reference, sol.field);
          if (!std::isfinite(err.l2) || !std::isfinite(err.h1)) throw Error("non-finite relative error");
          row.n_ms = space.size();
          row.eL2 = err.l2;
          row.eH1 = err.h1;
          if (config.dump_fields && !config.output_dir.empty()) {
            row.field_path = config.output_dir / ("ms_H" + number_tag(H) + "_l" + std::to_string(level) + ".txt");
            dump_field(sol.field, config.k, row.field_path);
          }
        } catch (const Error& e) {
          row.error = e.what();
        }
        row.wall_seconds = config.record_timing ? seconds_since(t0) : 0.0;
        if (log) {
          *log << "H = " << H << " level " << level << ": ";
          if (row.ok())
            *log << "n_ms " << row.n_ms << " eL2 " << row.eL2 << " eH1 " << row.eH1 << '\n';
          else
            *log << "failed: " << row.error << '\n';
        }
        report.rows.push_back(std::move(row));
      }
    }
  }

  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    std::ofstream csv(config.output_dir / "study.csv");
    if (!csv) throw IoError("cannot write " + (config.output_dir / "study.csv").string());
    report.write_csv(csv);
  }
  return report;
}

}  // namespace wemsfem
