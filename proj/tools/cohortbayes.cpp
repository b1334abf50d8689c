#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cohortbayes/compositional.hpp"
#include "cohortbayes/diagnostics.hpp"
#include "cohortbayes/io.hpp"
#include "cohortbayes/samplers.hpp"
#include "cohortbayes/simulation.hpp"
#include "cohortbayes/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cohortbayes;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

Eigen::VectorXd vector_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
}

PriorSpec parse_prior(const json& j) {
  PriorSpec p;
  const std::string kind = j.value("kind", "improper_uniform");
  if (kind == "improper_uniform") {
    p.kind = PriorKind::improper_uniform;
  } else if (kind == "student_t") {
    p.kind = PriorKind::student_t;
    p.df = j.value("df", 3.0);
    if (!j.contains("scale"))
      throw ConfigError("student_t prior requires an explicit scale");
    p.scale = vector_from_json(j.at("scale"));
    if (j.contains("center")) p.center = vector_from_json(j.at("center"));
  } else {
    throw ConfigError("unknown prior kind: " + kind);
  }
  return p;
}

ChainConfig parse_chain_config(const json& j, int dim) {
  ChainConfig c;
  c.n_iters = j.value("n_iters", 0L);
  c.burn_in = j.value("burn_in", 0L);
  c.b_copies = j.value("b_copies", 1);
  c.rho_xi = j.value("rho_xi", 0.0);
  c.rho_z = j.value("rho_z", 0.0);
  const std::string alg = j.value("algorithm", "alg1");
  if (alg == "alg1") c.algorithm = Algorithm::alg1;
  else if (alg == "alg2") c.algorithm = Algorithm::alg2;
  else if (alg == "alg3") c.algorithm = Algorithm::alg3;
  else throw ConfigError("unknown algorithm: " + alg);

  if (j.contains("proposal_cov")) {
    const json& pc = j.at("proposal_cov");
    Eigen::MatrixXd m(pc.size(), pc.size());
    for (std::size_t r = 0; r < pc.size(); ++r) {
      if (pc.at(r).size() != pc.size())
        throw ConfigError("proposal_cov must be square");
      for (std::size_t cidx = 0; cidx < pc.size(); ++cidx)
        m(r, cidx) = pc.at(r).at(cidx).get<double>();
    }
    c.proposal_cov = m;
  } else if (j.contains("proposal_scale")) {
    if (dim <= 0) throw ConfigError("proposal_scale given but dimension unknown");
    c.proposal_cov = j.at("proposal_scale").get<double>() *
                     Eigen::MatrixXd::Identity(dim, dim);
  }
  if (j.contains("prior")) c.prior = parse_prior(j.at("prior"));
  if (j.contains("init_beta")) c.init_beta = vector_from_json(j.at("init_beta"));
  if (c.n_iters <= c.burn_in || c.burn_in < 0)
    throw ConfigError("chain config requires n_iters > burn_in >= 0");
  return c;
}

SimConfig parse_sim_config(const json& j) {
  SimConfig cfg;
  cfg.n = j.value("n", cfg.n);
  cfg.beta0 = j.value("beta0", cfg.beta0);
  cfg.eta = j.value("eta", cfg.eta);
  cfg.nu = j.value("nu", cfg.nu);
  cfg.subcohort_p = j.value("subcohort_p", cfg.subcohort_p);
  cfg.censor_point = j.value("censor_point", cfg.censor_point);
  cfg.censor_point_prob = j.value("censor_point_prob", cfg.censor_point_prob);
  cfg.replicates = j.value("replicates", cfg.replicates);
  return cfg;
}

AppAnalogueConfig parse_app_config(const json& j) {
  AppAnalogueConfig cfg;
  cfg.n = j.value("n", cfg.n);
  cfg.subcohort_p = j.value("subcohort_p", cfg.subcohort_p);
  cfg.eta = j.value("eta", cfg.eta);
  cfg.nu = j.value("nu", cfg.nu);
  cfg.admin_censor_lo = j.value("admin_censor_lo", cfg.admin_censor_lo);
  cfg.admin_censor_hi = j.value("admin_censor_hi", cfg.admin_censor_hi);
  return cfg;
}

void warn_if_no_events(const CohortData& cohort) {
  if (cohort.n_events() == 0)
    std::cerr << "warning: cohort has zero events; the partial likelihood is "
                 "constant\n";
}

int default_workers() {
  if (const char* env = std::getenv("COHORTBAYES_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

struct CommonOpts {
  std::string config_path;
  std::string data_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int chains = 1;
  int workers = default_workers();
};

int cmd_simulate(const CommonOpts& opt) {
  Timer timer;
  json j = load_json(opt.config_path);
  const std::string design = j.value("design", "weibull_case_cohort");
  fs::create_directories(opt.out_dir);
  const std::string out_csv = (fs::path(opt.out_dir) / "cohort.csv").string();

  RngStream rng(opt.seed);
  if (design == "weibull_case_cohort") {
    SimConfig cfg = parse_sim_config(j);
    cfg.seed = opt.seed;
    write_cohort_csv(out_csv, gen_cohort(cfg, rng));
  } else if (design == "application_analogue") {
    AppAnalogueConfig cfg = parse_app_config(j);
    cfg.seed = opt.seed;
    write_cohort_csv(out_csv, gen_app_analogue(cfg, rng).case_cohort);
  } else {
    throw ConfigError("unknown design: " + design);
  }

  RunManifest m;
  m.command = "simulate";
  m.config_path = opt.config_path;
  m.seed = opt.seed;
  m.outputs = {out_csv};
  m.wall_clock_seconds = timer.elapsed();
  write_manifest(opt.out_dir, m);
  return 0;
}

int cmd_fit(const CommonOpts& opt) {
  Timer timer;
  json j = load_json(opt.config_path);
  CohortData cohort = read_cohort_csv(opt.data_path);
  warn_if_no_events(cohort);
  const int dim = cohort.dz() + cohort.dw();
  ChainConfig base = parse_chain_config(j, dim);
  if (base.proposal_cov.size() == 0)
    throw ConfigError("fit config requires proposal_cov or proposal_scale");
  std::string imputation = j.value(
      "imputation", base.algorithm == Algorithm::alg1 ? "bootstrap" : "conjugate");
  if (base.algorithm != Algorithm::alg1 && imputation != "conjugate")
    throw ConfigError("alg2/alg3 require the conjugate imputation model");

  fs::create_directories(opt.out_dir);

  std::unique_ptr<PredictiveModel> model;
  RestrictedPosterior post;
  if (imputation == "bootstrap") {
    model = std::make_unique<BootstrapPredictive>(make_bootstrap_model(cohort));
  } else if (imputation == "conjugate") {
    post = fit_restricted_posterior(cohort);
    model = std::make_unique<ConjugatePredictive>(post, cohort);
  } else {
    throw ConfigError("unknown imputation model: " + imputation);
  }

  std::vector<ChainOutput> outputs(opt.chains);
  std::vector<std::string> chain_paths(opt.chains);
  std::atomic<int> next{0};
  std::vector<std::string> errors(opt.chains);
  auto run_one = [&](int c) {
    try {
      ChainConfig cc = base;
      cc.seed = opt.seed ^ static_cast<std::uint64_t>(c);
      RngStream rng(opt.seed, static_cast<std::uint64_t>(c));
      switch (base.algorithm) {
        case Algorithm::alg1:
          outputs[c] = run_alg1(cohort, *model, cc, rng);
          break;
        case Algorithm::alg2:
          outputs[c] = run_alg2(cohort, post, cc, rng);
          break;
        case Algorithm::alg3:
          outputs[c] = run_alg3(cohort, post, cc, rng);
          break;
      }
      chain_paths[c] =
          (fs::path(opt.out_dir) / ("chain_" + std::to_string(c) + ".jsonl")).string();
      write_chain_jsonl(chain_paths[c], outputs[c]);
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  };
  if (opt.workers > 1 && opt.chains > 1) {
    auto worker = [&] {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= opt.chains) return;
        run_one(c);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(opt.workers, opt.chains); ++t)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    for (int c = 0; c < opt.chains; ++c) run_one(c);
  }
  for (int c = 0; c < opt.chains; ++c) {
    if (!errors[c].empty())
      throw std::runtime_error("chain " + std::to_string(c) + ": " + errors[c]);
  }

  // Component-wise hazard-ratio summary over all post-burn-in draws.
  CsvTable summary;
  summary.header = {"component", "hr_mean", "hr_lo", "hr_hi", "p_le_1"};
  std::vector<std::string> component_names;
  for (int k = 0; k < cohort.dz(); ++k)
    component_names.push_back("z" + std::to_string(k + 1));
  for (int k = 0; k < cohort.dw(); ++k)
    component_names.push_back("w" + std::to_string(k + 1));

  std::ofstream sum_out((fs::path(opt.out_dir) / "summary.csv").string());
  sum_out << "group,component,hr_mean,hr_lo,hr_hi,p_le_1\n";
  const long kept_per_chain = base.n_iters - base.burn_in;
  for (int k = 0; k < dim; ++k) {
    Eigen::VectorXd pooled(kept_per_chain * opt.chains);
    for (int c = 0; c < opt.chains; ++c)
      pooled.segment(c * kept_per_chain, kept_per_chain) =
          outputs[c].draws.col(k).tail(kept_per_chain);
    PosteriorSummary s = summarize(pooled, 0);
    sum_out << (k < cohort.dz() ? "z" : "w") << ',' << component_names[k] << ','
            << format_double(s.hr_mean) << ',' << format_double(s.hr_ci_low) << ','
            << format_double(s.hr_ci_high) << ',' << format_double(s.p_hr_le_1)
            << "\n";
  }
  sum_out.close();

  if (opt.chains >= 2) {
    std::ofstream rhat_out((fs::path(opt.out_dir) / "rhat.csv").string());
    rhat_out << "component,rhat,ess_per_chain\n";
    for (int k = 0; k < dim; ++k) {
      std::vector<Eigen::VectorXd> comp;
      double ess_sum = 0.0;
      for (int c = 0; c < opt.chains; ++c) {
        comp.push_back(outputs[c].draws.col(k).tail(kept_per_chain));
        ess_sum += ess(comp.back());
      }
      rhat_out << component_names[k] << ',' << format_double(gelman_rubin(comp))
               << ',' << format_double(ess_sum / opt.chains) << "\n";
    }
  }

  RunManifest m;
  m.command = "fit";
  m.config_path = opt.config_path;
  m.seed = opt.seed;
  m.inputs = {opt.data_path};
  m.outputs = chain_paths;
  m.outputs.push_back((fs::path(opt.out_dir) / "summary.csv").string());
  m.wall_clock_seconds = timer.elapsed();
  write_manifest(opt.out_dir, m);
  return 0;
}

int cmd_study(const CommonOpts& opt) {
  Timer timer;
  json j = load_json(opt.config_path);
  SimConfig cfg = parse_sim_config(j.value("sim", json::object()));
  cfg.seed = opt.seed;

  std::vector<EstimatorKind> estimators;
  for (const auto& name : j.value("estimators", std::vector<std::string>{
                                                    "full", "prentice", "ipw",
                                                    "post_strat", "bayes"})) {
    if (name == "full") estimators.push_back(EstimatorKind::full);
    else if (name == "prentice") estimators.push_back(EstimatorKind::prentice);
    else if (name == "ipw") estimators.push_back(EstimatorKind::ipw);
    else if (name == "post_strat") estimators.push_back(EstimatorKind::post_strat);
    else if (name == "bayes") estimators.push_back(EstimatorKind::bayes);
    else throw ConfigError("unknown estimator: " + name);
  }

  ChainConfig chain;
  if (j.contains("chain")) chain = parse_chain_config(j.at("chain"), 1);
  chain.algorithm = Algorithm::alg1;

  ReplicationTable table = run_study(cfg, estimators, chain, opt.workers);
  fs::create_directories(opt.out_dir);
  const std::string csv = (fs::path(opt.out_dir) / "table.csv").string();
  const std::string jsn = (fs::path(opt.out_dir) / "table.json").string();
  write_replication_table_csv(csv, table);
  write_replication_table_json(jsn, table);

  RunManifest m;
  m.command = "study";
  m.config_path = opt.config_path;
  m.seed = opt.seed;
  m.outputs = {csv, jsn};
  m.wall_clock_seconds = timer.elapsed();
  write_manifest(opt.out_dir, m);
  return 0;
}

int cmd_baselines(const CommonOpts& opt) {
  Timer timer;
  json j = load_json(opt.config_path);
  CohortData cohort = read_cohort_csv(opt.data_path);
  warn_if_no_events(cohort);

  std::vector<std::pair<std::string, WeightScheme>> schemes;
  const double p = j.value("sampling_prob", 1.0);
  for (const auto& name : j.value("schemes", std::vector<std::string>{
                                                 "prentice", "ipw", "post_strat"})) {
    WeightScheme s;
    s.sampling_prob = p;
    if (name == "full") s.kind = WeightKind::full;
    else if (name == "prentice") s.kind = WeightKind::prentice;
    else if (name == "ipw") s.kind = WeightKind::ipw;
    else if (name == "post_strat") s.kind = WeightKind::post_strat;
    else throw ConfigError("unknown scheme: " + name);
    schemes.emplace_back(name, std::move(s));
  }

  fs::create_directories(opt.out_dir);
  const std::string out_csv = (fs::path(opt.out_dir) / "estimates.csv").string();
  std::ofstream out(out_csv);
  out << "scheme,component,beta_hat,robust_se,converged,iterations\n";
  std::vector<std::string> names;
  for (int k = 0; k < cohort.dz(); ++k) names.push_back("z" + std::to_string(k + 1));
  for (int k = 0; k < cohort.dw(); ++k) names.push_back("w" + std::to_string(k + 1));
  for (const auto& [name, scheme] : schemes) {
    WeightedView view = build_weighted_view(cohort, scheme);
    WeightedFit fit = newton_solve(view, Eigen::VectorXd());
    for (int k = 0; k < view.d(); ++k) {
      out << name << ',' << names[k] << ',' << format_double(fit.beta_hat[k]) << ','
          << format_double(fit.robust_se[k]) << ',' << (fit.converged ? 1 : 0)
          << ',' << fit.iterations << "\n";
    }
  }
  out.close();

  RunManifest m;
  m.command = "baselines";
  m.config_path = opt.config_path;
  m.seed = opt.seed;
  m.inputs = {opt.data_path};
  m.outputs = {out_csv};
  m.wall_clock_seconds = timer.elapsed();
  write_manifest(opt.out_dir, m);
  return 0;
}

struct AlrOpts {
  bool inverse = false;
  bool percent = false;
  bool standardize_cols = true;
  double zero_half = 0.00005;  // fraction scale
  std::string sd_file;
};

int cmd_alr(const CommonOpts& opt, const AlrOpts& aopt) {
  Timer timer;
  CsvTable in = read_csv_table(opt.data_path);
  fs::create_directories(opt.out_dir);

  CsvTable out_table;
  std::string out_name;
  if (!aopt.inverse) {
    const std::size_t kp1 = in.header.size();
    if (kp1 < 2) throw ConfigError("alr: need at least two composition columns");
    out_name = "alr.csv";
    out_table.header.assign(in.header.begin(), in.header.end() - 1);
    Eigen::MatrixXd coords(in.rows.size(), kp1 - 1);
    for (std::size_t r = 0; r < in.rows.size(); ++r) {
      Eigen::Map<const Eigen::VectorXd> raw(in.rows[r].data(), kp1);
      Eigen::VectorXd parts = aopt.percent ? (raw / 100.0).eval() : raw.eval();
      const double half = aopt.percent ? aopt.zero_half / 100.0 : aopt.zero_half;
      coords.row(r) = alr(zero_replace(parts, half)).transpose();
    }
    Eigen::VectorXd sds = Eigen::VectorXd::Ones(coords.cols());
    if (aopt.standardize_cols) {
      std::vector<int> all_rows(coords.rows());
      std::iota(all_rows.begin(), all_rows.end(), 0);
      coords = standardize(coords, all_rows, &sds);
    }
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
      std::vector<double> row(coords.cols());
      for (Eigen::Index c = 0; c < coords.cols(); ++c) row[c] = coords(r, c);
      out_table.rows.push_back(std::move(row));
    }
    if (!aopt.sd_file.empty()) {
      std::ofstream sd_out((fs::path(opt.out_dir) / aopt.sd_file).string());
      sd_out << "component,sd\n";
      for (Eigen::Index c = 0; c < sds.size(); ++c)
        sd_out << out_table.header[c] << ',' << format_double(sds[c]) << "\n";
    }
  } else {
    out_name = "composition.csv";
    Eigen::VectorXd sds = Eigen::VectorXd::Ones(in.header.size());
    if (!aopt.sd_file.empty()) {
      std::ifstream sd_in(aopt.sd_file);
      if (!sd_in) throw ConfigError("alr: cannot open sd sidecar " + aopt.sd_file);
      std::string line;
      std::getline(sd_in, line);  // component,sd header
      std::size_t c = 0;
      while (std::getline(sd_in, line)) {
        if (line.empty()) continue;
        if (c >= in.header.size())
          throw ConfigError("alr: sd sidecar length mismatch");
        const auto comma = line.find(',');
        if (comma == std::string::npos)
          throw ConfigError("alr: malformed sd sidecar row: " + line);
        sds[c++] = std::stod(line.substr(comma + 1));
      }
      if (c != in.header.size())
        throw ConfigError("alr: sd sidecar length mismatch");
    }
    out_table.header = in.header;
    out_table.header.push_back("_other");
    for (auto& row : in.rows) {
      Eigen::Map<const Eigen::VectorXd> coords(row.data(), row.size());
      Eigen::VectorXd parts = alr_inverse(coords.cwiseProduct(sds));
      if (aopt.percent) parts *= 100.0;
      out_table.rows.push_back(
          std::vector<double>(parts.data(), parts.data() + parts.size()));
    }
  }
  const std::string out_csv = (fs::path(opt.out_dir) / out_name).string();
  write_csv_table(out_csv, out_table);

  RunManifest m;
  m.command = "alr";
  m.inputs = {opt.data_path};
  m.outputs = {out_csv};
  m.wall_clock_seconds = timer.elapsed();
  write_manifest(opt.out_dir, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian case-cohort Cox regression toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonOpts opt;
  AlrOpts aopt;

  auto add_common = [&](CLI::App* sub, bool needs_config, bool needs_data) {
    if (needs_config)
      sub->add_option("--config", opt.config_path, "JSON config file")->required();
    if (needs_data)
      sub->add_option("--data", opt.data_path, "input CSV")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "RNG seed");
    sub->add_option("--workers", opt.workers, "worker threads");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic cohort CSV");
  add_common(sim, true, false);

  CLI::App* fit = app.add_subcommand("fit", "run an MCMC chain on a cohort CSV");
  add_common(fit, true, true);
  fit->add_option("--chains", opt.chains, "number of chains");

  CLI::App* study = app.add_subcommand("study", "Monte Carlo replication study");
  add_common(study, true, false);

  CLI::App* base = app.add_subcommand("baselines", "weighted Cox comparators");
  add_common(base, true, true);

  CLI::App* alr_cmd = app.add_subcommand("alr", "additive logratio transform");
  add_common(alr_cmd, false, true);
  alr_cmd->add_flag("--inverse", aopt.inverse, "invert coordinates to compositions");
  alr_cmd->add_flag("--percent", aopt.percent, "values are percentages");
  alr_cmd->add_option("--zero-half", aopt.zero_half,
                      "half detection limit for zero replacement (fraction scale)");
  alr_cmd->add_flag("!--no-standardize", aopt.standardize_cols,
                    "skip standard-deviation scaling");
  alr_cmd->add_option("--sd-file", aopt.sd_file,
                      "sd sidecar file name (output forward, input inverse)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(opt);
    if (fit->parsed()) return cmd_fit(opt);
    if (study->parsed()) return cmd_study(opt);
    if (base->parsed()) return cmd_baselines(opt);
    if (alr_cmd->parsed()) return cmd_alr(opt, aopt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
