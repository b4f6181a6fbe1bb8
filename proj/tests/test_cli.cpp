#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "helpers.hpp"
#include "medfx/simlab.hpp"

using json = nlohmann::json;
using namespace medfx;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  const std::string out_file = "/tmp/medfx_test_stdout.txt";
  const std::string err_file = "/tmp/medfx_test_stderr.txt";
  std::string cmd = std::string(MEDFX_CLI_PATH) + " " + args + " >" + out_file + " 2>" +
                    err_file;
  int rc = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WEXITSTATUS(rc);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string example_csv() {
  static std::string path = [] {
    SimConfig cfg;
    cfg.n = 60;
    cfg.p = 5;
    cfg.q = 4;
    cfg.s = 2;
    cfg.k1 = 2;
    cfg.k2 = 2;
    cfg.sigma2 = 0.25;
    SimWorld w = gen_world(cfg, 7);
    SimDraw d = gen_data(w, cfg, 1);
    std::string p = "/tmp/medfx_example.csv";
    std::ofstream out(p);
    out << "Y,A";
    for (int j = 1; j <= cfg.p; ++j) out << ",X" << j;
    for (int j = 1; j <= cfg.q; ++j) out << ",M" << j;
    out << "\n";
    char buf[40];
    auto num = [&buf](double v) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      return std::string(buf);
    };
    for (int i = 0; i < cfg.n; ++i) {
      out << num(d.data.Y(i)) << "," << d.data.A(i);
      for (int j = 0; j < cfg.p; ++j) out << "," << num(d.data.X(i, j));
      for (int j = 0; j < cfg.q; ++j) out << "," << num(d.data.M(i, j));
      out << "\n";
    }
    return p;
  }();
  return path;
}

const char* kFast = " --cv-folds 4 --cv-grid 15";

}  // namespace

TEST_CASE("estimate emits a complete document on the bundled example") {
  CliResult r = run_cli("estimate --input " + example_csv() + " --seed 3" + kFast);
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(r.out);
  for (const char* key : {"theta_hat", "theta_naive", "se", "sigma_n2", "ci", "level",
                          "theta_01", "theta_02", "overlap_correction", "K1_used",
                          "K2_used", "sigma1_hat2", "omega_hat2"})
    CHECK(doc["result"].contains(key));
  CHECK(doc["manifest"]["seeds"]["seed"] == 3);
  CHECK(doc["manifest"].contains("wall_clock_sec"));
  // step-5 identity survives the serialization round trip
  double lhs = doc["result"]["theta_hat"].get<double>();
  double rhs = doc["result"]["theta_01"].get<double>() +
               doc["result"]["theta_02"].get<double>() -
               doc["result"]["overlap_correction"].get<double>();
  CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("a malformed header exits 2 and names the column") {
  std::string bad = "/tmp/medfx_bad_header.csv";
  {
    std::ofstream out(bad);
    out << "Y,A,X1,WAT,M1\n1,0,0.5,0.1,0.2\n2,1,0.3,0.4,0.5\n";
  }
  CliResult r = run_cli("estimate --input " + bad);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("WAT") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("an undersized treatment arm exits 3") {
  std::string tiny = "/tmp/medfx_tiny.csv";
  {
    std::ofstream out(tiny);
    out << "Y,A,X1,M1\n";
    for (int i = 0; i < 12; ++i)
      out << i * 0.1 << "," << (i < 3 ? 1 : 0) << "," << 0.2 * i << "," << 0.1 * i << "\n";
  }
  CliResult r = run_cli("estimate --input " + tiny);
  CHECK(r.exit_code == 3);
}

TEST_CASE("a hopeless tuning constant exits 4 with the escalation log") {
  CliResult r = run_cli("estimate --input " + example_csv() + " --seed 3 --k1 1e-9 --k2 1e-9" + kFast);
  CHECK(r.exit_code == 4);
  CHECK(r.err.find("K=") != std::string::npos);
}

TEST_CASE("narrower level narrows the interval on the same seed") {
  CliResult a = run_cli("estimate --input " + example_csv() + " --seed 3 --level 0.95" + kFast);
  CliResult b = run_cli("estimate --input " + example_csv() + " --seed 3 --level 0.9" + kFast);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  json da = json::parse(a.out), db = json::parse(b.out);
  double wa = da["result"]["ci"][1].get<double>() - da["result"]["ci"][0].get<double>();
  double wb = db["result"]["ci"][1].get<double>() - db["result"]["ci"][0].get<double>();
  CHECK(wb < wa);
  CHECK(da["result"]["theta_hat"] == db["result"]["theta_hat"]);
}

TEST_CASE("documents are byte-stable across reruns and thread counts") {
  std::string base = "estimate --input " + example_csv() + " --seed 5" + kFast;
  CliResult a = run_cli(base + " --threads 1");
  CliResult b = run_cli(base + " --threads 2");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  json da = json::parse(a.out), db = json::parse(b.out);
  CHECK(da["result"] == db["result"]);  // manifest timings may differ
  CliResult c = run_cli(base + " --threads 1");
  json dc = json::parse(c.out);
  CHECK(da["result"] == dc["result"]);
}

TEST_CASE("numbers reparse to identical doubles") {
  CliResult r = run_cli("estimate --input " + example_csv() + " --seed 9" + kFast);
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(r.out);
  // serialize the parsed document's theta_hat again: must match the original text
  double theta = doc["result"]["theta_hat"].get<double>();
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", theta);
  CHECK(r.out.find(buf) != std::string::npos);
}

TEST_CASE("effects document telescopes and bootstrap adds quantile fields") {
  std::string base = "effects --input " + example_csv() + " --seed 11" + kFast;
  CliResult r = run_cli(base);
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(r.out);
  double ate = doc["result"]["ate"]["estimate"].get<double>();
  double nie = doc["result"]["nie"]["estimate"].get<double>();
  double nde = doc["result"]["nde"]["estimate"].get<double>();
  CHECK(std::abs(ate - (nie + nde)) < 1e-12);
  CHECK_FALSE(doc["result"].contains("bootstrap"));

  CliResult rb = run_cli(base + " --bootstrap 50");
  REQUIRE(rb.exit_code == 0);
  json docb = json::parse(rb.out);
  REQUIRE(docb["result"].contains("bootstrap"));
  CHECK(docb["result"]["bootstrap"]["nie"].contains("quantile_ci"));
  CHECK(docb["result"]["bootstrap"]["B"] == 50);

  CliResult rb2 = run_cli(base + " --bootstrap 50");
  json docb2 = json::parse(rb2.out);
  CHECK(docb["result"] == docb2["result"]);
}

TEST_CASE("benchmark emits one csv row per grid cell and replays exactly") {
  std::string csv = "/tmp/medfx_bench.csv";
  std::string args = "benchmark --n 100,140 --p 8 --q 6 --sigma2 0.2 --reps 10 "
                     "--master-seed 4 --csv " + std::string(csv) + kFast;
  CliResult r = run_cli(args);
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(r.out);
  REQUIRE(doc["result"]["rows"].size() == 2);
  std::ifstream in(csv);
  int lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 3);  // header + 2 cells

  // replay from the manifest's config: same numbers bit for bit
  CliResult r2 = run_cli(args + " --threads 1");
  json doc2 = json::parse(r2.out);
  CHECK(doc["result"] == doc2["result"]);
}

TEST_CASE("sensitivity emits one row per K cell") {
  CliResult r = run_cli(
      "sensitivity --n 120 --p 8 --q 6 --sigma2 0.2 --reps 10 --master-seed 4 "
      "--K-grid \"2.5,2.5;2.75,2.75;3,3\"" + std::string(kFast));
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["result"]["rows"].size() == 3);
  CHECK(doc["result"]["rows"][1]["K1"] == 2.75);
}

TEST_CASE("config file values apply beneath command-line flags") {
  std::string conf = "/tmp/medfx_conf.ini";
  {
    std::ofstream out(conf);
    out << "level=0.9\nseed=21\n";
  }
  CliResult a = run_cli("estimate --input " + example_csv() + " --config " + conf + kFast);
  REQUIRE(a.exit_code == 0);
  json da = json::parse(a.out);
  CHECK(da["result"]["level"] == 0.9);
  CHECK(da["manifest"]["seeds"]["seed"] == 21);
  CliResult b = run_cli("estimate --input " + example_csv() + " --config " + conf +
                        " --level 0.8" + kFast);
  json db = json::parse(b.out);
  CHECK(db["result"]["level"] == 0.8);
  CHECK(db["manifest"]["seeds"]["seed"] == 21);
}

TEST_CASE("the seed falls back to MEDFX_SEED") {
  setenv("MEDFX_SEED", "33", 1);
  CliResult r = run_cli("estimate --input " + example_csv() + kFast);
  unsetenv("MEDFX_SEED");
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["manifest"]["seeds"]["seed"] == 33);
}

TEST_CASE("--out writes the document to a file") {
  std::string out_file = "/tmp/medfx_doc.json";
  CliResult r = run_cli("estimate --input " + example_csv() + " --seed 3 --out " +
                        out_file + kFast);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.empty());
  json doc = json::parse(slurp(out_file));
  CHECK(doc["result"].contains("theta_hat"));
}
