// Command-line front end: fine reference solves, single multiscale solves,
// (H, level) studies and mesh dumps.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "wemsfem/driver.hpp"
#include "wemsfem/msbasis.hpp"

namespace {

using namespace wemsfem;

struct Options {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bool paper_scale = false;
  bool dump_fields = false;
  bool no_timing = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  // -h would collide with the mesh-size option --h.
  cmd->set_help_flag("--help", "print this help");
  cmd->add_option("-c,--config", opt.config_file, "key = value config file");
  cmd->add_flag("--paper-scale", opt.paper_scale, "k = 64, h = 1/320, H = 1/10 (slow, several GB)");
  const std::pair<const char*, const char*> keys[] = {
      {"model", "m1, m2, m3 or m4"},
      {"k", "wavenumber"},
      {"h", "fine mesh size as a fraction of the box side"},
      {"H", "coarse sizes, comma separated (1/8,1/16)"},
      {"levels", "wavelet levels (0..3 or 0,2)"},
      {"source", "point source x,y"},
      {"seed", "seed of the random models"},
      {"threads", "OpenMP threads"},
      {"out", "output directory"},
      {"bc", "pml or robin"},
      {"pu-k", "partition-of-unity wavenumber (0 gives an exact PU)"},
      {"pml-strength", "PML damping constant"},
      {"pml-thickness", "PML thickness (physical)"},
      {"perforation-count", "number of perforations"},
  };
  for (const auto& [key, help] : keys) {
    std::string name = key;
    std::string config_key = name == "pu-k" ? "pu_wavenumber" : name;
    for (char& ch : config_key)
      if (ch == '-') ch = '_';
    cmd->add_option_function<std::string>(
        "--" + name, [&opt, config_key](const std::string& v) { opt.overrides[config_key] = v; }, help);
  }
  cmd->add_flag("--dump-fields", opt.dump_fields, "write field dumps to the output directory");
  cmd->add_flag("--no-timing", opt.no_timing, "write wall_seconds as 0 for byte-stable reports");
}

RunConfig resolve(const Options& opt) {
  RunConfig config = opt.paper_scale ? RunConfig::paper_scale() : RunConfig{};
  if (opt.paper_scale)
    std::cerr << "warning: paper-scale runs take tens of minutes and several GB of memory\n";
  if (!opt.config_file.empty()) config.apply(read_config_file(opt.config_file));
  config.apply(opt.overrides);
  if (opt.dump_fields) config.dump_fields = true;
  if (opt.no_timing) config.record_timing = false;
  if (config.output_dir.empty()) config.output_dir = "out";
  config.validate();
  return config;
}

void report_warnings(const FineMesh& mesh) {
  for (const auto& w : mesh.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_solve_fine(const RunConfig& config) {
  const FineRun run = run_fine(config);
  report_warnings(*run.mesh);
  const auto path = config.output_dir / "fine.txt";
  dump_field(run.reference, config.k, path);
  std::cout << "fine solve: " << run.mesh->num_nodes() << " nodes, field written to " << path.string() << '\n';
  return 0;
}

int cmd_solve_ms(const RunConfig& config) {
  const FineRun run = run_fine(config);
  report_warnings(*run.mesh);
  const Execution exec = config.threads > 1 ? Execution::parallel : Execution::serial;
  const double H = config.H_values.front();
  const int level = config.levels.front();
  auto grid = std::make_shared<const CoarseGrid>(build_coarse_grid(*run.spec, *run.mesh, H));
  const MultiscaleContext ctx(run.spec, run.mesh, grid, run.system);
  const PartitionOfUnity pu = build_pu(ctx, config.pu_k(), exec);
  const MultiscaleSpace space = build_space(ctx, pu, level, exec);
  const MultiscaleSolution sol = solve_multiscale(*run.system, run.mesh, run.load, space);
  const RelativeErrors err = relative_errors(run.system->norms, run.reference, sol.field);
  const auto path = config.output_dir / "ms.txt";
  dump_field(sol.field, config.k, path);
  std::cout << "multiscale solve: H " << H << " level " << level << " n_ms " << space.size() << " (dropped "
            << space.dropped.size() << ") eL2 " << err.l2 << " eH1 " << err.h1 << '\n'
            << "field written to " << path.string() << '\n';
  return 0;
}

int cmd_study(const RunConfig& config) {
  const StudyReport report = run_study(config, &std::cerr);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  report.write_csv(std::cout);
  int failed = 0;
  for (const StudyRow& row : report.rows) {
    if (row.ok()) continue;
    ++failed;
    std::cerr << "row H=" << row.H << " level=" << row.level << " failed: " << row.error << '\n';
  }
  std::cerr << "report written to " << (config.output_dir / "study.csv").string() << '\n';
  return failed == 0 ? 0 : 1;
}

int cmd_dump_mesh(const RunConfig& config) {
  const DomainSpec spec = config.domain();
  const FineMesh mesh = build_fine_mesh(spec, config.h);
  report_warnings(mesh);
  std::filesystem::create_directories(config.output_dir);
  const auto path = config.output_dir / "mesh.txt";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_mesh(out, mesh);
  std::cout << "mesh: " << mesh.num_nodes() << " nodes, " << mesh.num_triangles() << " triangles, written to "
            << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet edge multiscale solver for the Helmholtz equation in perforated domains"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help");

  Options opt;
  auto* fine = app.add_subcommand("solve-fine", "solve the fine P1 reference problem");
  auto* ms = app.add_subcommand("solve-ms", "solve with the multiscale space for the first H and level");
  auto* study = app.add_subcommand("study", "sweep every (H, level) pair and write a CSV report");
  auto* mesh = app.add_subcommand("dump-mesh", "write the fine mesh");
  for (auto* cmd : {fine, ms, study, mesh}) add_common(cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  RunConfig config;
  try {
    config = resolve(opt);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (fine->parsed()) return cmd_solve_fine(config);
    if (ms->parsed()) return cmd_solve_ms(config);
    if (study->parsed()) return cmd_study(config);
    return cmd_dump_mesh(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
