#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "wemsfem/driver.hpp"

using namespace wemsfem;
namespace fs = std::filesystem;

namespace {

// Small open-domain study that finishes in a few seconds.
RunConfig small_config() {
  RunConfig c;
  c.model = ModelId::m1;
  c.perforation_count = 0;
  c.k = 6.0;
  c.h = 1.0 / 64.0;
  c.H_values = {1.0 / 4.0, 1.0 / 8.0};
  c.levels = {0, 1, 2, 3};
  c.pu_wavenumber = 0.0;
  c.record_timing = false;
  return c;
}

std::string csv_of(const StudyReport& report) {
  std::ostringstream out;
  report.write_csv(out);
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wemsfem_driver_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("WEMSFEM_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("value parsers") {
  CHECK(parse_real("0.25") == 0.25);
  CHECK(parse_real("1/8") == 0.125);
  CHECK(parse_real(" 3 ") == 3.0);
  CHECK_THROWS_AS(parse_real("1/0"), ConfigError);
  CHECK_THROWS_AS(parse_real("abc"), ConfigError);
  CHECK(parse_levels("0..3") == std::vector<int>{0, 1, 2, 3});
  CHECK(parse_levels("0,2") == std::vector<int>{0, 2});
  CHECK_THROWS_AS(parse_levels("3..1"), ConfigError);
  CHECK(parse_real_list("1/8,1/16") == std::vector<double>{0.125, 0.0625});
}

TEST_CASE("configuration keys and validation") {
  RunConfig c;
  c.apply({{"model", "m3"}, {"k", "12"}, {"H", "1/4,1/8"}, {"levels", "0..2"}, {"source", "1.44,0"},
           {"bc", "robin"}, {"pu_wavenumber", "0"}, {"seed", "9"}, {"threads", "2"}, {"timing", "false"}});
  CHECK(c.model == ModelId::m3);
  CHECK(c.k == 12.0);
  CHECK(c.H_values == std::vector<double>{0.25, 0.125});
  CHECK(c.levels == std::vector<int>{0, 1, 2});
  CHECK(c.source.x == 1.44);
  CHECK(c.source.y == 0.0);
  CHECK(c.bc_kind == BoundaryKind::robin);
  CHECK(c.pu_k() == 0.0);
  CHECK(c.seed == 9u);
  CHECK(c.threads == 2);
  CHECK_FALSE(c.record_timing);
  CHECK_NOTHROW(c.validate());

  CHECK_THROWS_AS(c.apply({{"colour", "blue"}}), ConfigError);
  RunConfig bad;
  bad.h = 1.0 / 100.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.H_values = {3.0 / 128.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.levels.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.threads = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  RunConfig defaults;
  CHECK(defaults.pu_k() == defaults.k);
  const RunConfig full = RunConfig::paper_scale();
  CHECK(full.k == 64.0);
  CHECK(full.h == 1.0 / 320.0);
  CHECK(full.H_values == std::vector<double>{0.1});
}

TEST_CASE("config files") {
  const fs::path dir = scratch("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# desk run\nmodel = m2\n\nk = 8\nk = 10\nlevels = 1\n";
  }
  const auto values = read_config_file(dir / "run.cfg");
  CHECK(values.at("model") == "m2");
  CHECK(values.at("k") == "10");
  CHECK(values.size() == 3);
  {
    std::ofstream f(dir / "broken.cfg");
    f << "model m2\n";
  }
  CHECK_THROWS_AS(read_config_file(dir / "broken.cfg"), ConfigError);
  CHECK_THROWS(read_config_file(dir / "missing.cfg"));
  fs::remove_all(dir);
}

TEST_CASE("study sweep, CSV schema and determinism") {
  const RunConfig c = small_config();
  const StudyReport a = run_study(c);
  REQUIRE(a.rows.size() == 8);
  CHECK(a.ok());
  for (const StudyRow& row : a.rows) {
    CHECK(row.ok());
    CHECK(std::isfinite(row.eL2));
    CHECK(std::isfinite(row.eH1));
    CHECK(row.eL2 >= 0.0);
    CHECK(row.eH1 >= 0.0);
    CHECK(row.n_ms > 0);
    CHECK(row.wall_seconds == 0.0);
  }
  CHECK(a.rows[0].H == 0.25);
  CHECK(a.rows[4].H == 0.125);
  CHECK(a.rows[3].level == 3);

  const std::string csv = csv_of(a);
  CHECK(csv.substr(0, csv.find('\n')) == "model,source_x,source_y,H,level,n_ms,eL2,eH1,wall_seconds");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.find("m1,0,0,0.25,0,") != std::string::npos);

  CHECK(csv_of(run_study(c)) == csv);

  RunConfig threaded = c;
  threaded.threads = 3;
  CHECK(csv_of(run_study(threaded)) == csv);
}

TEST_CASE("failed rows are recorded and the CSV stays rectangular") {
  RunConfig c = small_config();
  c.H_values = {0.25};
  c.levels = {0, 1};
  c.source = {5.0, 5.0};
  const StudyReport report = run_study(c);
  REQUIRE(report.rows.size() == 2);
  CHECK_FALSE(report.ok());
  for (const StudyRow& row : report.rows) CHECK_FALSE(row.error.empty());
  std::istringstream csv(csv_of(report));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
    CHECK(line.find(",,,") != std::string::npos);
  }
}

TEST_CASE("study output directory and field dumps") {
  RunConfig c = small_config();
  c.H_values = {0.25};
  c.levels = {1};
  c.output_dir = scratch("study");
  c.dump_fields = true;
  const StudyReport report = run_study(c);
  REQUIRE(report.ok());
  CHECK(fs::exists(c.output_dir / "study.csv"));
  REQUIRE(fs::exists(report.reference_path));
  REQUIRE(fs::exists(report.rows[0].field_path));
  std::ifstream in(report.rows[0].field_path);
  CHECK(read_field(in).allFinite());
  fs::remove_all(c.output_dir);
}

TEST_CASE("dump_field round trip") {
  const RunConfig c = small_config();
  const FineRun fine = run_fine(c);
  const fs::path dir = scratch("dump");
  dump_field(fine.reference, c.k, dir / "u.txt");
  std::ifstream in(dir / "u.txt");
  const ComplexVector back = read_field(in);
  REQUIRE(back.size() == fine.reference.values.size());
  CHECK(std::equal(back.begin(), back.end(), fine.reference.values.begin()));

  const FemField zero{fine.mesh, ComplexVector::Zero(fine.reference.values.size())};
  dump_field(zero, c.k, dir / "zero.txt");
  std::ifstream zin(dir / "zero.txt");
  std::string header;
  std::getline(zin, header);
  CHECK(header.rfind("field " + std::to_string(zero.values.size()), 0) == 0);
  std::size_t rows = 0;
  double x, y, re, im;
  while (zin >> x >> y >> re >> im) {
    CHECK(re == 0.0);
    CHECK(im == 0.0);
    ++rows;
  }
  CHECK(rows == static_cast<std::size_t>(zero.values.size()));
  CHECK_THROWS(dump_field(zero, c.k, dir / "u.txt" / "z.txt"));
  fs::remove_all(dir);
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  const std::string small = "--model m1 --perforation-count 0 --k 6 --h 1/64 --H 1/4 --levels 0 --pu-k 0 --no-timing";
  CHECK(run_cli("study " + small + " --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "study.csv"));
  CHECK(run_cli("study " + small + " --source 5,5 --out " + dir.string()) == 1);
  CHECK(run_cli("study " + small + " --h 1/100.5") == 2);
  CHECK(run_cli("study --model m9") == 2);
  {
    std::ofstream f(dir / "bad.cfg");
    f << "unknown_key = 1\n";
  }
  CHECK(run_cli("study -c " + (dir / "bad.cfg").string()) == 2);
  CHECK(run_cli("dump-mesh " + small + " --out " + dir.string()) == 0);
  CHECK(run_cli("--help") == 0);
  fs::remove_all(dir);
}
