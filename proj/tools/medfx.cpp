// medfx: debiased estimation of mediation effects from csv data, plus the
// simulation benchmark and sensitivity commands.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "medfx/effects.hpp"
#include "medfx/pipeline.hpp"
#include "medfx/simlab.hpp"

using json = nlohmann::ordered_json;
using namespace medfx;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// json writing with fixed 17-significant-digit numbers so that every emitted
// value reparses to the identical double (replay fidelity)

void write_json(std::ostream& os, const json& j) {
  switch (j.type()) {
    case json::value_t::object: {
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        os << json(it.key()).dump() << ':';
        write_json(os, it.value());
      }
      os << '}';
      break;
    }
    case json::value_t::array: {
      os << '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ',';
        first = false;
        write_json(os, v);
      }
      os << ']';
      break;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        os << "null";
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
      }
      break;
    }
    default:
      os << j.dump();
  }
}

std::string dump_json(const json& j) {
  std::ostringstream os;
  write_json(os, j);
  return os.str();
}

// ---------------------------------------------------------------------------
// csv input: header row with Y, A, X1..Xp, M1..Mq in any column order

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open input file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty input file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  int y_col = -1, a_col = -1;
  std::vector<int> x_cols, m_cols;
  auto suffix_index = [](const std::string& name, char prefix) -> int {
    if (name.size() < 2 || name[0] != prefix) return -1;
    for (size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
    return std::stoi(name.substr(1));
  };
  std::vector<int> x_index, m_index;
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == "Y") {
      if (y_col >= 0) throw CsvError("duplicate column Y");
      y_col = static_cast<int>(c);
    } else if (name == "A") {
      if (a_col >= 0) throw CsvError("duplicate column A");
      a_col = static_cast<int>(c);
    } else if (int k = suffix_index(name, 'X'); k >= 1) {
      x_cols.push_back(static_cast<int>(c));
      x_index.push_back(k);
    } else if (int k2 = suffix_index(name, 'M'); k2 >= 1) {
      m_cols.push_back(static_cast<int>(c));
      m_index.push_back(k2);
    } else {
      throw CsvError("unrecognized column '" + name + "' (expect Y, A, X1..Xp, M1..Mq)");
    }
  }
  if (y_col < 0) throw CsvError("missing required column Y");
  if (a_col < 0) throw CsvError("missing required column A");
  if (x_cols.empty()) throw CsvError("no covariate columns X1..Xp found");
  if (m_cols.empty()) throw CsvError("no mediator columns M1..Mq found");
  auto check_contiguous = [](std::vector<int> idx, char prefix) {
    std::sort(idx.begin(), idx.end());
    for (size_t i = 0; i < idx.size(); ++i)
      if (idx[i] != static_cast<int>(i) + 1)
        throw CsvError(std::string("columns ") + prefix + "1.." + prefix +
                       std::to_string(idx.size()) + " must be numbered without gaps");
  };
  check_contiguous(x_index, 'X');
  check_contiguous(m_index, 'M');

  const int p = static_cast<int>(x_cols.size());
  const int q = static_cast<int>(m_cols.size());
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty())
        throw CsvError("missing value at line " + std::to_string(line_no));
      size_t used = 0;
      double v;
      try {
        v = std::stod(tok, &used);
      } catch (...) {
        throw CsvError("unparseable value '" + tok + "' at line " + std::to_string(line_no));
      }
      if (used != tok.size())
        throw CsvError("unparseable value '" + tok + "' at line " + std::to_string(line_no));
      vals.push_back(v);
    }
    if (vals.size() != header.size())
      throw CsvError("line " + std::to_string(line_no) + " has " +
                     std::to_string(vals.size()) + " fields, header has " +
                     std::to_string(header.size()));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw CsvError("no data rows in " + path);

  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.X.resize(n, p);
  d.M.resize(n, q);
  d.A.resize(n);
  d.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<size_t>(i)];
    d.Y(i) = r[static_cast<size_t>(y_col)];
    double a = r[static_cast<size_t>(a_col)];
    if (a != 0.0 && a != 1.0)
      throw CsvError("treatment A must be 0 or 1 (line " + std::to_string(i + 2) + ")");
    d.A(i) = static_cast<int>(a);
    for (int j = 0; j < p; ++j)
      d.X(i, x_index[static_cast<size_t>(j)] - 1) = r[static_cast<size_t>(x_cols[static_cast<size_t>(j)])];
    for (int j = 0; j < q; ++j)
      d.M(i, m_index[static_cast<size_t>(j)] - 1) = r[static_cast<size_t>(m_cols[static_cast<size_t>(j)])];
  }
  auto rep = validate(d);
  if (!rep.ok) throw CsvError("invalid data: " + rep.problems.front());
  return d;
}

// ---------------------------------------------------------------------------

struct CommonOpts {
  double k1 = 2.75, k2 = 2.75;
  double level = 0.95;
  uint64_t seed = 1;
  int threads = 0;
  int cv_folds = 10;
  int cv_grid = 50;
  double threshold_phi = -1.0;  // <0: off, 0: default level, >0: explicit
  bool crossfit = false;
};

PipelineConfig to_pipeline(const CommonOpts& o) {
  PipelineConfig pc;
  pc.K1 = o.k1;
  pc.K2 = o.k2;
  pc.level = o.level;
  pc.seed = o.seed;
  pc.cv_folds = o.cv_folds;
  pc.cv_grid = o.cv_grid;
  pc.threads = o.threads > 0 ? o.threads
                             : static_cast<int>(std::thread::hardware_concurrency());
  if (o.threshold_phi >= 0.0) pc.threshold_phi = o.threshold_phi;
  return pc;
}

struct StepTimer {
  using clock = std::chrono::steady_clock;
  clock::time_point start = clock::now();
  clock::time_point last = clock::now();
  json timings = json::object();
  void lap(const std::string& name) {
    auto now = clock::now();
    timings[name] = std::chrono::duration<double>(now - last).count();
    last = now;
  }
  double total() const {
    return std::chrono::duration<double>(clock::now() - start).count();
  }
};

json make_manifest(const std::string& command, const json& config, uint64_t seed,
                   StepTimer& timer, const std::vector<std::string>& warnings) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seeds"] = {{"seed", seed}};
  m["versions"] = {{"medfx", kVersion}};
  m["wall_clock_sec"] = timer.total();
  m["timings"] = timer.timings;
  m["warnings"] = warnings;
  return m;
}

void emit(const json& doc, const std::string& out_path) {
  std::string text = dump_json(doc);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write output file: " + out_path);
    out << text << "\n";
  }
}

json estimate_to_json(const MediationEstimate& e) {
  json r;
  r["theta_hat"] = e.theta_hat;
  r["theta_naive"] = e.theta_naive;
  r["se"] = e.se;
  r["sigma_n2"] = e.sigma_n2;
  r["ci"] = {e.ci_lo, e.ci_hi};
  r["level"] = e.level;
  r["theta_01"] = e.theta_01;
  r["theta_02"] = e.theta_02;
  r["overlap_correction"] = e.overlap_correction;
  r["sigma1_hat2"] = e.sigma1_hat2;
  r["omega_hat2"] = e.omega_hat2;
  r["alpha_hat"] = e.alpha_hat;
  r["cb_hat"] = e.cb_hat;
  r["K1_used"] = e.tau1.K_used;
  r["K2_used"] = e.tau2.K_used;
  r["tau1_residual_inf"] = e.tau1.achieved_residual_inf;
  r["tau2_residual_inf"] = e.tau2.achieved_residual_inf;
  r["phi_active"] = static_cast<int>(e.phi1.active_set.size());
  r["b_active"] = static_cast<int>(e.b.active_set.size());
  if (e.crossfit) {
    r["crossfit"] = true;
    r["fold_estimates"] = e.fold_estimates;
    r["fold_ses"] = e.fold_ses;
  }
  return r;
}

void collect_escalation_warnings(const MediationEstimate& e, const std::string& tag,
                                 std::vector<std::string>& warnings) {
  if (e.tau1_log.size() > 1)
    warnings.push_back(tag + ": tau1 escalated to K=" + std::to_string(e.tau1.K_used));
  if (e.tau2_log.size() > 1)
    warnings.push_back(tag + ": tau2 escalated to K=" + std::to_string(e.tau2.K_used));
}

json effect_to_json(const EffectInterval& e) {
  return {{"estimate", e.estimate}, {"se", e.se}, {"ci", {e.ci_lo, e.ci_hi}}};
}

json benchmark_row_to_json(const BenchmarkRow& row) {
  json r;
  r["n"] = row.config.n;
  r["p"] = row.config.p;
  r["q"] = row.config.q;
  r["sigma2"] = row.config.sigma2;
  r["K1"] = row.config.K1;
  r["K2"] = row.config.K2;
  r["reps"] = row.config.reps;
  r["reps_used"] = row.reps_used;
  r["failures"] = row.failures;
  r["escalated"] = row.escalated;
  r["theta0"] = row.theta0;
  r["rmse_debiased"] = row.rmse_debiased;
  r["sd_debiased"] = row.sd_debiased;
  r["rmse_naive"] = row.rmse_naive;
  r["sd_naive"] = row.sd_naive;
  return r;
}

void write_rows_csv(const std::vector<BenchmarkRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv file: " + path);
  out << "n,p,q,sigma2,K1,K2,reps,reps_used,failures,escalated,theta0,"
         "rmse_debiased,sd_debiased,rmse_naive,sd_naive\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.config.n << ',' << r.config.p << ',' << r.config.q << ','
        << num(r.config.sigma2) << ',' << num(r.config.K1) << ',' << num(r.config.K2)
        << ',' << r.config.reps << ',' << r.reps_used << ',' << r.failures << ','
        << r.escalated << ',' << num(r.theta0) << ',' << num(r.rmse_debiased) << ','
        << num(r.sd_debiased) << ',' << num(r.rmse_naive) << ',' << num(r.sd_naive)
        << "\n";
  }
}

std::vector<std::pair<double, double>> parse_k_grid(const std::string& spec) {
  std::vector<std::pair<double, double>> grid;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ';')) {
    if (cell.empty()) continue;
    auto comma = cell.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("bad --K-grid cell '" + cell + "'; expected K1,K2");
    grid.emplace_back(std::stod(cell.substr(0, comma)), std::stod(cell.substr(comma + 1)));
  }
  if (grid.empty()) throw std::runtime_error("--K-grid is empty");
  return grid;
}

template <typename T>
std::vector<T> parse_list(const std::string& spec) {
  std::vector<T> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if constexpr (std::is_same_v<T, int>)
      out.push_back(std::stoi(tok));
    else
      out.push_back(std::stod(tok));
  }
  if (out.empty()) throw std::runtime_error("empty list option");
  return out;
}

}  // namespace

std::vector<std::string> load_config_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::vector<std::string> args;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line is not key=value: " + line);
    args.push_back("--" + line.substr(0, eq));
    args.push_back(line.substr(eq + 1));
  }
  return args;
}

int main(int argc, char** argv) {
  CLI::App app{"debiased mediation-functional estimation"};

  CommonOpts opt;
  std::string input, out_path, csv_path, k_grid_spec, config_path;
  std::string n_list = "500", sigma2_list = "0.1";
  int bootstrap_b = 0;
  int opt_p = 50, opt_q = 50, opt_reps = 100;
  uint64_t opt_master = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "flat key=value config file; flags take precedence");
    cmd->add_option("--k1", opt.k1, "tuning constant K1")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--k2", opt.k2, "tuning constant K2")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--level", opt.level, "confidence level")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--seed", opt.seed, "rng seed")
        ->envname("MEDFX_SEED")
        ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)")
        ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--cv-folds", opt.cv_folds, "cross-validation folds")
        ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--cv-grid", opt.cv_grid, "lambda grid size")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--threshold-phi", opt.threshold_phi,
                    "hard-threshold level for the outcome fit; 0 = lambda_1se/2")
        ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--out", out_path, "write the json document here instead of stdout");
  };

  CLI::App* est = app.add_subcommand("estimate", "debiased mediation functional from csv");
  est->add_option("--input", input, "csv with Y, A, X1..Xp, M1..Mq")->required();
  est->add_flag("--crossfit", opt.crossfit, "average the fold-swapped estimates");
  add_common(est);

  CLI::App* eff = app.add_subcommand("effects", "counterfactual means, NIE/NDE/ATE");
  eff->add_option("--input", input, "csv with Y, A, X1..Xp, M1..Mq")->required();
  eff->add_option("--bootstrap", bootstrap_b, "bootstrap replicates (0 = off)")
      ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_common(eff);

  CLI::App* bench = app.add_subcommand("benchmark", "simulation benchmark rows");
  bench->add_option("--n", n_list, "sample sizes, comma separated")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench->add_option("--p", opt_p, "covariate dimension")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench->add_option("--q", opt_q, "mediator dimension")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench->add_option("--sigma2", sigma2_list, "noise variances, comma separated")
      ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench->add_option("--reps", opt_reps, "replications per row")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench->add_option("--master-seed", opt_master, "benchmark world seed")
      ->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench->add_option("--csv", csv_path, "also write the rows as csv here");
  add_common(bench);

  CLI::App* sens = app.add_subcommand("sensitivity", "benchmark over a (K1,K2) grid");
  sens->add_option("--n", n_list, "sample size")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sens->add_option("--p", opt_p, "covariate dimension")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sens->add_option("--q", opt_q, "mediator dimension")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sens->add_option("--sigma2", sigma2_list, "noise variance")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sens->add_option("--reps", opt_reps, "replications per cell")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sens->add_option("--master-seed", opt_master, "world seed")->capture_default_str()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sens->add_option("--K-grid", k_grid_spec, "cells as \"K1,K2;K1,K2;...\"")->required();
  sens->add_option("--csv", csv_path, "also write the cells as csv here");
  add_common(sens);

  app.require_subcommand(1);

  // config precedence: defaults < config file < command-line flags.
  // Implemented by splicing the file's key=value pairs in directly after the
  // subcommand token; later (explicit) flags then take precedence.
  std::vector<std::string> args(argv + 1, argv + argc);
  for (size_t i = 0; i < args.size(); ++i) {
    std::string file;
    size_t remove = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
      remove = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      remove = 1;
    }
    if (remove > 0) {
      std::vector<std::string> pairs;
      try {
        pairs = load_config_pairs(file);
      } catch (const std::exception& e) {
        std::cerr << "medfx: " << e.what() << "\n";
        return 2;
      }
      // keep --config visible for the manifest, but apply pairs before the
      // remaining flags (insertion right after the subcommand token)
      args.insert(args.begin() + 1, pairs.begin(), pairs.end());
      break;
    }
  }
  std::vector<const char*> cargv;
  cargv.push_back(argv[0]);
  for (const auto& a : args) cargv.push_back(a.c_str());
  CLI11_PARSE(app, static_cast<int>(cargv.size()), cargv.data());

  StepTimer timer;
  std::vector<std::string> warnings;

  auto config_snapshot = [&](const std::string& command) {
    json c;
    c["command"] = command;
    c["k1"] = opt.k1;
    c["k2"] = opt.k2;
    c["level"] = opt.level;
    c["seed"] = opt.seed;
    c["threads"] = opt.threads;
    c["cv_folds"] = opt.cv_folds;
    c["cv_grid"] = opt.cv_grid;
    c["threshold_phi"] = opt.threshold_phi;
    if (!input.empty()) c["input"] = input;
    return c;
  };

  try {
    if (*est) {
      Dataset data = read_csv(input);
      timer.lap("read_input");
      PipelineConfig pc = to_pipeline(opt);
      MediationEstimate e =
          opt.crossfit ? estimate_crossfit(data, pc) : estimate_debiased(data, pc);
      timer.lap("estimate");
      collect_escalation_warnings(e, "estimate", warnings);
      if (e.crossfit)
        warnings.push_back("crossfit se combines fold ses heuristically; folds share data");
      json doc;
      doc["result"] = estimate_to_json(e);
      doc["result"]["n"] = static_cast<int>(data.n());
      doc["result"]["p"] = static_cast<int>(data.p());
      doc["result"]["q"] = static_cast<int>(data.q());
      json cfg = config_snapshot("estimate");
      cfg["crossfit"] = opt.crossfit;
      doc["manifest"] = make_manifest("estimate", cfg, opt.seed, timer, warnings);
      emit(doc, out_path);
      return 0;
    }

    if (*eff) {
      Dataset data = read_csv(input);
      timer.lap("read_input");
      PipelineConfig pc = to_pipeline(opt);
      EffectsReport rep = effects(data, pc);
      timer.lap("effects");
      collect_escalation_warnings(rep.ey11, "ey11", warnings);
      collect_escalation_warnings(rep.ey00, "ey00", warnings);
      collect_escalation_warnings(rep.ey10, "ey10", warnings);
      collect_escalation_warnings(rep.ey01, "ey01", warnings);
      warnings.push_back(
          "analytic effect CIs sum component variances; the four runs share data "
          "(bootstrap is the recommended inference)");
      json r;
      r["ey11"] = estimate_to_json(rep.ey11);
      r["ey00"] = estimate_to_json(rep.ey00);
      r["ey10"] = estimate_to_json(rep.ey10);
      r["ey01"] = estimate_to_json(rep.ey01);
      r["nie"] = effect_to_json(rep.nie);
      r["nde"] = effect_to_json(rep.nde);
      r["ate"] = effect_to_json(rep.ate);
      if (bootstrap_b > 0) {
        BootstrapRecord rec = bootstrap_effects(data, pc, bootstrap_b, opt.level);
        timer.lap("bootstrap");
        json b;
        b["B"] = rec.requested;
        b["used"] = rec.used;
        b["failed"] = rec.failed;
        b["nie"] = {{"mean", rec.nie_mean}, {"quantile_ci", {rec.nie_lo, rec.nie_hi}}};
        b["nde"] = {{"mean", rec.nde_mean}, {"quantile_ci", {rec.nde_lo, rec.nde_hi}}};
        b["ate"] = {{"mean", rec.ate_mean}, {"quantile_ci", {rec.ate_lo, rec.ate_hi}}};
        r["bootstrap"] = b;
      }
      json doc;
      doc["result"] = r;
      json cfg = config_snapshot("effects");
      cfg["bootstrap"] = bootstrap_b;
      doc["manifest"] = make_manifest("effects", cfg, opt.seed, timer, warnings);
      emit(doc, out_path);
      return 0;
    }

    if (*bench || *sens) {
      SimConfig base;
      base.p = opt_p;
      base.q = opt_q;
      base.reps = opt_reps;
      base.K1 = opt.k1;
      base.K2 = opt.k2;
      base.master_seed = opt_master;
      base.threads = opt.threads > 0
                         ? opt.threads
                         : static_cast<int>(std::thread::hardware_concurrency());
      base.pipeline.level = opt.level;
      base.pipeline.cv_folds = opt.cv_folds;
      base.pipeline.cv_grid = opt.cv_grid;
      if (opt.threshold_phi >= 0.0) base.pipeline.threshold_phi = opt.threshold_phi;

      std::vector<BenchmarkRow> rows;
      std::string command;
      if (*bench) {
        command = "benchmark";
        for (int n : parse_list<int>(n_list))
          for (double s2 : parse_list<double>(sigma2_list)) {
            SimConfig cfg = base;
            cfg.n = n;
            cfg.sigma2 = s2;
            rows.push_back(benchmark(cfg));
            timer.lap("benchmark_n" + std::to_string(n) + "_s" + std::to_string(s2));
          }
      } else {
        command = "sensitivity";
        SimConfig cfg = base;
        cfg.n = parse_list<int>(n_list).front();
        cfg.sigma2 = parse_list<double>(sigma2_list).front();
        rows = sensitivity(cfg, parse_k_grid(k_grid_spec));
        timer.lap("sensitivity");
      }

      json r;
      r["rows"] = json::array();
      for (const auto& row : rows) r["rows"].push_back(benchmark_row_to_json(row));
      if (!csv_path.empty()) write_rows_csv(rows, csv_path);
      json doc;
      doc["result"] = r;
      json cfg = config_snapshot(command);
      cfg["n"] = n_list;
      cfg["p"] = opt_p;
      cfg["q"] = opt_q;
      cfg["sigma2"] = sigma2_list;
      cfg["reps"] = opt_reps;
      cfg["master_seed"] = opt_master;
      if (*sens) cfg["K_grid"] = k_grid_spec;
      doc["manifest"] = make_manifest(command, cfg, opt_master, timer, warnings);
      emit(doc, out_path);
      return 0;
    }
  } catch (const CsvError& e) {
    std::cerr << "medfx: " << e.what() << "\n";
    return 2;
  } catch (const GroupTooSmall& e) {
    std::cerr << "medfx: " << e.what() << "\n";
    return 3;
  } catch (const StillInfeasible& e) {
    std::cerr << "medfx: " << e.what() << "\n";
    return 4;
  } catch (const TooManyFailures& e) {
    std::cerr << "medfx: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "medfx: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
