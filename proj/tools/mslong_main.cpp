// mslong: impute longitudinal clinical records and benchmark
// imputation / prediction method pairs on synthetic MS-like cohorts.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mslong/benchmark.hpp"
#include "mslong/csv.hpp"
#include "mslong/metrics.hpp"
#include "mslong/split.hpp"
#include "mslong/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

class Manifest {
 public:
  Manifest(const fs::path& dir, const std::string& command, uint64_t seed, ordered_json config)
      : path_(dir / "run_manifest.json") {
    fs::create_directories(dir);
    data_["tool"] = "mslong";
    data_["version"] = kVersion;
    data_["command"] = command;
    data_["seed"] = seed;
    data_["config"] = std::move(config);
    data_["status"] = "failed";  // pessimistic until finish()
    data_["stages_ms"] = ordered_json::object();
    write();
  }

  void stage_done(const std::string& name, long ms) {
    data_["stages_ms"][name] = ms;
    write();
  }

  void note(const std::string& key, const ordered_json& value) {
    data_[key] = value;
    write();
  }

  void finish() {
    data_["status"] = "ok";
    write();
  }

 private:
  void write() const {
    std::ofstream out(path_);
    out << data_.dump(2) << '\n';
  }
  fs::path path_;
  ordered_json data_;
};

long ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               t0)
      .count();
}

std::map<std::string, double> load_rates_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mslong::DataError("cannot open rates file '" + path + "'");
  std::map<std::string, double> rates;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw mslong::DataError("rates file: expected feature=rate, got '" + line + "'");
    rates[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return rates;
}

mslong::PredictorGrids load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mslong::DataError("cannot open grid file '" + path + "'");
  nlohmann::json j;
  in >> j;
  mslong::PredictorGrids grids = mslong::default_grids();
  for (const auto& [name, points] : j.items()) {
    const auto kind = mslong::predictor_kind_from(name);
    std::vector<std::map<std::string, double>> pts;
    for (const auto& p : points) {
      std::map<std::string, double> h;
      for (const auto& [k, v] : p.items()) h[k] = v.get<double>();
      pts.push_back(std::move(h));
    }
    if (pts.empty()) throw mslong::DataError("grid file: empty grid for '" + name + "'");
    grids[kind] = std::move(pts);
  }
  return grids;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void snap_to_domain(mslong::LongitudinalDataset& d) {
  for (auto& r : d.records)
    for (size_t f = 0; f < d.schema.size(); ++f)
      if (!mslong::is_missing(r.values[f])) r.values[f] = d.schema.at(f).domain.snap(r.values[f]);
}

struct GenFlags {
  mslong::CohortGenConfig cfg;
  std::string trajectory = "mvn_latent";
  std::string mechanism = "mcar";
  std::string rates_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--patients", cfg.n_patients, "number of patients");
    cmd->add_option("--visits-min", cfg.visits_per_patient.first, "min visits per patient");
    cmd->add_option("--visits-max", cfg.visits_per_patient.second, "max visits per patient");
    cmd->add_option("--gap-min", cfg.visit_gap_days.first, "min days between visits");
    cmd->add_option("--gap-max", cfg.visit_gap_days.second, "max days between visits");
    cmd->add_option("--trajectory", trajectory,
                    "piecewise_linear | random_walk | mvn_latent");
    cmd->add_option("--noise-sd", cfg.noise_sd, "trajectory noise sd");
    cmd->add_option("--edss-noise-sd", cfg.edss_noise_sd, "EDSS formula noise sd");
    cmd->add_option("--rates-file", rates_file, "feature=rate lines (default: registry rates)");
    cmd->add_option("--mechanism", mechanism, "mcar | mar");
  }

  mslong::CohortGenConfig resolve(uint64_t seed) {
    cfg.trajectory = mslong::trajectory_from(trajectory);
    if (!rates_file.empty()) cfg.missing_rates = load_rates_file(rates_file);
    cfg.seed = seed;
    return cfg;
  }

  mslong::MaskMechanism mask_mechanism() const {
    if (mechanism == "mcar") return mslong::MaskMechanism::MCAR;
    if (mechanism == "mar") return mslong::MaskMechanism::MAR;
    throw mslong::DataError("unknown mechanism '" + mechanism + "' (use mcar or mar)");
  }
};

ordered_json echo_config(const CLI::App* cmd) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_name().empty() || opt->get_name() == "--help") continue;
    if (opt->count() == 0 && opt->get_default_str().empty()) continue;
    j[opt->get_name()] =
        opt->count() > 0 ? ordered_json(opt->results()) : ordered_json(opt->get_default_str());
  }
  return j;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"longitudinal imputation and EDSS prediction benchmark"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags (--seed, --jobs) may follow the subcommand
  app.set_config("--config", "", "key=value file mirroring the flags (flags win)");
  app.get_config_formatter_base()->comment('#');

  uint64_t seed = 0;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--seed", seed, "master seed (default 0)")->capture_default_str();
  app.add_option("--jobs", jobs, "worker threads (outputs do not depend on it)")
      ->capture_default_str();

  // --- generate ---
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic cohort CSV");
  GenFlags gen;
  gen.attach(gen_cmd);
  std::string gen_out = "cohort.csv", gen_truth;
  bool gen_complete = false;
  gen_cmd->add_option("-o,--out", gen_out, "output CSV (degraded cohort)")->required();
  gen_cmd->add_option("--truth-out", gen_truth, "also write the complete cohort here");
  gen_cmd->add_flag("--complete", gen_complete, "skip degradation, write the complete cohort");

  // --- impute ---
  auto* imp_cmd = app.add_subcommand("impute", "complete one dataset with a named method");
  std::string imp_method, imp_in, imp_out, imp_diag;
  bool round_to_domain = false, use_target = false;
  mslong::ImputerOptions imp_opts;
  imp_cmd->add_option("--method", imp_method, "one of: linear spline locf ewma pmm cart rf blg lg lgp lgnob jm_single jm_clustered jm_lg")->required();
  imp_cmd->add_option("-i,--in", imp_in, "input CSV")->required();
  imp_cmd->add_option("-o,--out", imp_out, "output CSV")->required();
  imp_cmd->add_option("--m", imp_opts.m, "imputation count for multiple-imputation methods");
  imp_cmd->add_option("--cycles", imp_opts.n_cycles, "chained-equation sweeps");
  imp_cmd->add_option("--donors", imp_opts.donors, "PMM donors");
  imp_cmd->add_option("--trees", imp_opts.fcs_trees, "RF kernel trees");
  imp_cmd->add_option("--min-leaf", imp_opts.fcs_min_leaf, "CART/RF kernel min leaf");
  imp_cmd->add_option("--jm-burn", imp_opts.jm_burn, "Gibbs burn-in iterations");
  imp_cmd->add_option("--jm-between", imp_opts.jm_between, "Gibbs iterations between draws");
  imp_cmd->add_option("--mh-step", imp_opts.mh_step, "Metropolis-Hastings proposal scale");
  imp_cmd->add_option("--jm-diagnostics", imp_diag, "write chain diagnostics CSV here");
  imp_cmd->add_flag("--round-to-domain", round_to_domain, "snap output to the schema grid");
  imp_cmd->add_flag("--use-target-in-imputation", use_target,
                    "allow EDSS among imputation predictors");

  // --- bench-impute ---
  auto* bi_cmd = app.add_subcommand("bench-impute", "mask-and-score imputation benchmark");
  std::string bi_in, bi_dir = ".", bi_methods, bi_rates, bi_mech = "mcar";
  bi_cmd->add_option("-i,--in", bi_in, "input cohort CSV")->required();
  bi_cmd->add_option("-o,--out-dir", bi_dir, "report directory");
  bi_cmd->add_option("--methods", bi_methods, "comma list (default: all 14)");
  bi_cmd->add_option("--rates-file", bi_rates, "feature=rate lines");
  bi_cmd->add_option("--mechanism", bi_mech, "mcar | mar");
  bi_cmd->add_flag("--use-target-in-imputation", use_target,
                   "allow EDSS among imputation predictors");

  // --- bench-predict ---
  auto* bp_cmd = app.add_subcommand("bench-predict", "CV pair selection + test evaluation");
  std::string bp_in, bp_dir = ".", bp_imputers = "linear,ewma,cart,rf,jm_clustered";
  std::string bp_predictors = "knn,gbt,rf,svr", bp_grid;
  int bp_k = 10;
  double bp_test_fraction = 0.2;
  bp_cmd->add_option("-i,--in", bp_in, "input cohort CSV (incomplete)")->required();
  bp_cmd->add_option("-o,--out-dir", bp_dir, "report directory");
  bp_cmd->add_option("--imputers", bp_imputers, "comma list of imputation methods");
  bp_cmd->add_option("--predictors", bp_predictors, "comma list of predictors");
  bp_cmd->add_option("--grid-file", bp_grid, "JSON hyperparameter grids");
  bp_cmd->add_option("--k", bp_k, "CV folds");
  bp_cmd->add_option("--test-fraction", bp_test_fraction, "held-out record share");
  bp_cmd->add_flag("--use-target-in-imputation", use_target,
                   "allow EDSS among imputation predictors");

  // --- full ---
  auto* full_cmd = app.add_subcommand("full", "generate + bench-impute + bench-predict");
  GenFlags full_gen;
  full_gen.attach(full_cmd);
  std::string full_dir = ".";
  int full_k = 10;
  double full_test_fraction = 0.2;
  full_cmd->add_option("-o,--out-dir", full_dir, "output directory");
  full_cmd->add_option("--k", full_k, "CV folds");
  full_cmd->add_option("--test-fraction", full_test_fraction, "held-out record share");
  full_cmd->add_flag("--use-target-in-imputation", use_target,
                     "allow EDSS among imputation predictors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto schema = mslong::FeatureSchema::default_schema();

  if (gen_cmd->parsed()) {
    const auto cfg = gen.resolve(seed);
    Manifest manifest(fs::path(gen_out).parent_path().empty()
                          ? fs::path(".")
                          : fs::path(gen_out).parent_path(),
                      "generate", seed, echo_config(gen_cmd));
    const auto t0 = std::chrono::steady_clock::now();
    auto [complete, truth] = mslong::generate_cohort(cfg);
    if (!gen_truth.empty()) mslong::write_csv_file(gen_truth, truth);
    if (gen_complete) {
      mslong::write_csv_file(gen_out, complete);
    } else {
      auto [incomplete, plan] =
          mslong::degrade(complete, cfg.missing_rates, gen.mask_mechanism(),
                          mslong::derive_seed(seed, "degrade"));
      mslong::write_csv_file(gen_out, incomplete);
      manifest.note("masked_cells", plan.cells.size());
    }
    manifest.stage_done("generate", ms_since(t0));
    manifest.finish();
    std::cout << "wrote " << gen_out << " (" << complete.n_records() << " records, "
              << complete.n_patients() << " patients)\n";
    return 0;
  }

  if (imp_cmd->parsed()) {
    imp_opts.use_target = use_target;
    Manifest manifest(fs::path(imp_out).parent_path().empty()
                          ? fs::path(".")
                          : fs::path(imp_out).parent_path(),
                      "impute", seed, echo_config(imp_cmd));
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = mslong::load_csv_file(imp_in, schema);

    mslong::CompletedDataset completed;
    if (!imp_diag.empty() && imp_method.rfind("jm_", 0) == 0) {
      mslong::JmConfig cfg;
      cfg.level = imp_method == "jm_single"      ? mslong::JmLevel::Single
                  : imp_method == "jm_clustered" ? mslong::JmLevel::Clustered
                                                 : mslong::JmLevel::Lg;
      cfg.n_burn = imp_opts.jm_burn;
      cfg.n_between = imp_opts.jm_between;
      cfg.m = imp_opts.m;
      cfg.mh_step = imp_opts.mh_step;
      cfg.use_target = use_target;
      cfg.seed = mslong::derive_seed(seed, "impute/" + imp_method);
      mslong::JmDiagnostics diag;
      completed = mslong::pool_mean(mslong::jm_impute(d, cfg, &diag));
      std::ofstream dout(imp_diag);
      for (size_t i = 0; i < diag.trace_header.size(); ++i)
        dout << (i ? "," : "") << diag.trace_header[i];
      dout << '\n';
      for (const auto& row : diag.trace) {
        for (size_t i = 0; i < row.size(); ++i)
          dout << (i ? "," : "") << mslong::format_double(row[i]);
        dout << '\n';
      }
      manifest.note("mh_acceptance_rate", diag.acceptance_rate());
    } else {
      const auto imputer = mslong::make_imputer(imp_method, imp_opts);
      completed = imputer.run(d, mslong::derive_seed(seed, "impute/" + imp_method));
    }
    if (round_to_domain) snap_to_domain(completed.dataset);
    mslong::write_csv_file(imp_out, completed.dataset);
    manifest.stage_done("impute", ms_since(t0));
    manifest.note("imputed_cells", completed.imputed_cells.size());
    manifest.finish();
    std::cout << "imputed " << completed.imputed_cells.size() << " cells with " << imp_method
              << " -> " << imp_out << "\n";
    return 0;
  }

  if (bi_cmd->parsed()) {
    mslong::ImputerOptions opts;
    opts.use_target = use_target;
    Manifest manifest(bi_dir, "bench-impute", seed, echo_config(bi_cmd));
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = mslong::load_csv_file(bi_in, schema);
    std::vector<mslong::NamedImputer> methods;
    for (const auto& id :
         bi_methods.empty() ? mslong::default_imputer_ids() : split_list(bi_methods))
      methods.push_back(mslong::make_imputer(id, opts));
    const auto rates = bi_rates.empty() ? mslong::table1_rates() : load_rates_file(bi_rates);
    const auto mech = bi_mech == "mar" ? mslong::MaskMechanism::MAR : mslong::MaskMechanism::MCAR;

    const auto result = mslong::run_imputation_benchmark(d, methods, rates, mech, seed, jobs);
    {
      std::ofstream out(fs::path(bi_dir) / "imputation_report.csv");
      mslong::write_imputation_report(out, result.rows);
      std::ofstream pf(fs::path(bi_dir) / "imputation_report_per_feature.csv");
      mslong::write_per_feature_report(pf, result.rows);
    }
    manifest.stage_done("bench-impute", ms_since(t0));
    for (const auto& row : result.rows)
      std::cout << row.method << "\t" << mslong::format_double(row.rmse) << "\n";
    if (!result.failures.empty()) {
      for (const auto& f : result.failures)
        std::cerr << "method failed: " << f.method << ": " << f.error << "\n";
      throw mslong::MethodError(result.failures.front().method, result.failures.front().error);
    }
    manifest.finish();
    return 0;
  }

  auto run_predict = [&](const mslong::LongitudinalDataset& d, const std::string& dir,
                         const std::vector<std::string>& imputer_ids,
                         const std::string& predictor_list, const std::string& grid_file, int k,
                         double test_fraction, Manifest& manifest) {
    mslong::ImputerOptions opts;
    opts.use_target = use_target;
    std::vector<mslong::NamedImputer> imputers;
    for (const auto& id : imputer_ids) imputers.push_back(mslong::make_imputer(id, opts));
    std::vector<mslong::PredictorKind> kinds;
    for (const auto& name : split_list(predictor_list))
      kinds.push_back(mslong::predictor_kind_from(name));
    const auto grids = grid_file.empty() ? mslong::default_grids() : load_grid_file(grid_file);

    const auto t0 = std::chrono::steady_clock::now();
    const auto split = mslong::split_by_patient(d, test_fraction, seed);
    {  // patient-disjointness assertion, recorded in the manifest
      std::set<std::string> train_set(split.train_patients.begin(), split.train_patients.end());
      for (const auto& pid : split.test_patients)
        if (train_set.count(pid))
          throw mslong::DataError("split leak: patient '" + pid + "' in both sets");
      manifest.note("split_disjoint", true);
      manifest.note("n_train_patients", split.train_patients.size());
      manifest.note("n_test_patients", split.test_patients.size());
    }
    const auto train = mslong::subset_by_patients(d, split.train_patients);
    const auto test = mslong::subset_by_patients(d, split.test_patients);
    manifest.stage_done("split", ms_since(t0));

    const auto t1 = std::chrono::steady_clock::now();
    auto pairs = mslong::run_pair_selection(train, imputers, kinds, grids, k, seed, jobs);
    manifest.stage_done("pair-selection", ms_since(t1));

    const auto t2 = std::chrono::steady_clock::now();
    const auto finals = mslong::run_test_evaluation(train, test, imputers, pairs, 5, seed, jobs);
    manifest.stage_done("test-evaluation", ms_since(t2));

    // merge the test scores into the CV report rows
    for (auto& pr : pairs)
      for (const auto& fin : finals)
        if (fin.imputer == pr.imputer && fin.predictor == pr.predictor) pr.r2_test = fin.r2_test;

    std::ofstream out(fs::path(dir) / "prediction_report.csv");
    mslong::write_prediction_report(out, pairs);
    for (const auto& fin : finals)
      std::cout << fin.imputer << "+" << fin.predictor << "\tcv=" << fin.mean_r2_cv
                << "\ttest=" << (fin.r2_test ? mslong::format_double(*fin.r2_test) : "-") << "\n";
  };

  if (bp_cmd->parsed()) {
    Manifest manifest(bp_dir, "bench-predict", seed, echo_config(bp_cmd));
    const auto d = mslong::load_csv_file(bp_in, schema);
    run_predict(d, bp_dir, split_list(bp_imputers), bp_predictors, bp_grid, bp_k,
                bp_test_fraction, manifest);
    manifest.finish();
    return 0;
  }

  if (full_cmd->parsed()) {
    Manifest manifest(full_dir, "full", seed, echo_config(full_cmd));
    const auto cfg = full_gen.resolve(seed);

    const auto t0 = std::chrono::steady_clock::now();
    auto [complete, truth] = mslong::generate_cohort(cfg);
    mslong::write_csv_file((fs::path(full_dir) / "truth.csv").string(), truth);
    auto [incomplete, plan] = mslong::degrade(complete, cfg.missing_rates,
                                              full_gen.mask_mechanism(),
                                              mslong::derive_seed(seed, "degrade"));
    mslong::write_csv_file((fs::path(full_dir) / "cohort.csv").string(), incomplete);
    manifest.stage_done("generate", ms_since(t0));

    mslong::ImputerOptions opts;
    opts.use_target = use_target;
    const auto t1 = std::chrono::steady_clock::now();
    const auto bench = mslong::run_imputation_benchmark(
        incomplete, mslong::default_imputers(opts), cfg.missing_rates, full_gen.mask_mechanism(),
        seed, jobs);
    {
      std::ofstream out(fs::path(full_dir) / "imputation_report.csv");
      mslong::write_imputation_report(out, bench.rows);
      std::ofstream pf(fs::path(full_dir) / "imputation_report_per_feature.csv");
      mslong::write_per_feature_report(pf, bench.rows);
    }
    manifest.stage_done("bench-impute", ms_since(t1));
    if (!bench.failures.empty())
      throw mslong::MethodError(bench.failures.front().method, bench.failures.front().error);
    for (const auto& row : bench.rows)
      std::cout << row.method << "\t" << mslong::format_double(row.rmse) << "\n";

    const auto top = mslong::select_top_imputers(bench.rows, 5);
    manifest.note("top_imputers", top);

    run_predict(incomplete, full_dir, top, "knn,gbt,rf,svr", "", full_k, full_test_fraction,
                manifest);
    manifest.finish();
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const mslong::MethodError& e) {
    std::cerr << "method error: " << e.what() << "\n";
    return 3;
  } catch (const mslong::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
