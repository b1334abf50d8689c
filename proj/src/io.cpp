#include "cohortbayes/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cohortbayes/version.hpp"

namespace cohortbayes {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error(std::string("invalid number in ") + what + ": '" + s + "'");
  return v;
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::alg1: return "alg1";
    case Algorithm::alg2: return "alg2";
    case Algorithm::alg3: return "alg3";
  }
  return "alg1";
}

Algorithm algorithm_from_name(const std::string& s) {
  if (s == "alg1") return Algorithm::alg1;
  if (s == "alg2") return Algorithm::alg2;
  if (s == "alg3") return Algorithm::alg3;
  throw std::runtime_error("unknown algorithm: " + s);
}

json prior_to_json(const PriorSpec& p) {
  json j;
  j["kind"] = p.kind == PriorKind::improper_uniform ? "improper_uniform" : "student_t";
  if (p.kind == PriorKind::student_t) {
    j["df"] = p.df;
    j["scale"] = std::vector<double>(p.scale.data(), p.scale.data() + p.scale.size());
    if (p.center.size() > 0)
      j["center"] = std::vector<double>(p.center.data(), p.center.data() + p.center.size());
  }
  return j;
}

PriorSpec prior_from_json(const json& j) {
  PriorSpec p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "improper_uniform") {
    p.kind = PriorKind::improper_uniform;
  } else if (kind == "student_t") {
    p.kind = PriorKind::student_t;
    p.df = j.value("df", 3.0);
    auto scale = j.at("scale").get<std::vector<double>>();
    p.scale = Eigen::Map<Eigen::VectorXd>(scale.data(), scale.size());
    if (j.contains("center")) {
      auto center = j.at("center").get<std::vector<double>>();
      p.center = Eigen::Map<Eigen::VectorXd>(center.data(), center.size());
    }
  } else {
    throw std::runtime_error("unknown prior kind: " + kind);
  }
  return p;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  if (rows == 0) return Eigen::MatrixXd();
  const std::size_t cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_cohort_csv(const std::string& path, const CohortData& cohort) {
  std::ofstream out = open_out(path);
  out << "time,event,selected";
  for (int k = 0; k < cohort.dz(); ++k) out << ",z" << (k + 1);
  for (int k = 0; k < cohort.dw(); ++k) out << ",w" << (k + 1);
  for (int k = 0; k < cohort.dx(); ++k) out << ",x" << (k + 1);
  out << "\n";
  for (int i = 0; i < cohort.n(); ++i) {
    out << format_double(cohort.time[i]) << ',' << int(cohort.event[i]) << ','
        << int(cohort.selected[i]);
    for (int k = 0; k < cohort.dz(); ++k) {
      out << ',';
      if (cohort.selected[i]) out << format_double(cohort.z(i, k));
    }
    for (int k = 0; k < cohort.dw(); ++k) out << ',' << format_double(cohort.w(i, k));
    for (int k = 0; k < cohort.dx(); ++k) out << ',' << format_double(cohort.x(i, k));
    out << "\n";
  }
}

CohortData read_cohort_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty cohort CSV: " + path);
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "time" || header[1] != "event" ||
      header[2] != "selected")
    throw std::runtime_error("cohort CSV must start with time,event,selected");
  int dz = 0, dw = 0, dx = 0;
  for (std::size_t i = 3; i < header.size(); ++i) {
    if (header[i].starts_with("z")) ++dz;
    else if (header[i].starts_with("w")) ++dw;
    else if (header[i].starts_with("x")) ++dx;
    else throw std::runtime_error("unexpected cohort CSV column: " + header[i]);
  }

  std::vector<SubjectRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("cohort CSV row width mismatch");
    SubjectRecord r;
    r.time = parse_double(fields[0], "time");
    r.event = parse_double(fields[1], "event") != 0.0;
    r.selected = parse_double(fields[2], "selected") != 0.0;
    std::size_t f = 3;
    if (r.selected) {
      Eigen::VectorXd z(dz);
      for (int k = 0; k < dz; ++k) z[k] = parse_double(fields[f + k], "z");
      r.z = std::move(z);
    } else {
      for (int k = 0; k < dz; ++k) {
        if (!fields[f + k].empty())
          throw std::runtime_error("cohort CSV: z present for unselected subject");
      }
    }
    f += dz;
    r.w.resize(dw);
    for (int k = 0; k < dw; ++k) r.w[k] = parse_double(fields[f + k], "w");
    f += dw;
    r.x.resize(dx);
    for (int k = 0; k < dx; ++k) r.x[k] = parse_double(fields[f + k], "x");
    records.push_back(std::move(r));
  }
  return build_cohort(records);
}

void write_chain_jsonl(const std::string& path, const ChainOutput& output) {
  std::ofstream out = open_out(path);
  json header;
  header["type"] = "header";
  header["seed"] = output.seed;
  header["acceptance_rate"] = output.acceptance_rate;
  json cfg;
  cfg["algorithm"] = algorithm_name(output.config.algorithm);
  cfg["n_iters"] = output.config.n_iters;
  cfg["burn_in"] = output.config.burn_in;
  cfg["b_copies"] = output.config.b_copies;
  cfg["rho_xi"] = output.config.rho_xi;
  cfg["rho_z"] = output.config.rho_z;
  cfg["prior"] = prior_to_json(output.config.prior);
  cfg["proposal_cov"] = matrix_to_json(output.config.proposal_cov);
  header["config"] = std::move(cfg);
  out << header.dump() << "\n";

  for (Eigen::Index r = 0; r < output.draws.rows(); ++r) {
    json rec;
    rec["iter"] = r;
    json beta = json::array();
    for (Eigen::Index c = 0; c < output.draws.cols(); ++c)
      beta.push_back(output.draws(r, c));
    rec["beta"] = std::move(beta);
    rec["accepted"] = output.accepted[r] != 0;
    rec["log_h"] = output.log_h_trace[r];
    out << rec.dump() << "\n";
  }
}

ChainOutput read_chain_jsonl(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty chain file: " + path);
  json header = json::parse(line);
  if (header.value("type", "") != "header")
    throw std::runtime_error("chain file missing header record: " + path);

  ChainOutput out;
  out.seed = header.at("seed").get<std::uint64_t>();
  out.acceptance_rate = header.value("acceptance_rate", 0.0);
  const json& cfg = header.at("config");
  out.config.algorithm = algorithm_from_name(cfg.at("algorithm").get<std::string>());
  out.config.n_iters = cfg.at("n_iters").get<long>();
  out.config.burn_in = cfg.at("burn_in").get<long>();
  out.config.b_copies = cfg.at("b_copies").get<int>();
  out.config.rho_xi = cfg.at("rho_xi").get<double>();
  out.config.rho_z = cfg.at("rho_z").get<double>();
  out.config.prior = prior_from_json(cfg.at("prior"));
  out.config.proposal_cov = matrix_from_json(cfg.at("proposal_cov"));
  out.config.seed = out.seed;

  std::vector<json> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index dim =
      n > 0 ? static_cast<Eigen::Index>(rows.front().at("beta").size()) : 0;
  out.draws.resize(n, dim);
  out.accepted.resize(n);
  out.log_h_trace.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const json& rec = rows[r];
    for (Eigen::Index c = 0; c < dim; ++c)
      out.draws(r, c) = rec.at("beta").at(c).get<double>();
    out.accepted[r] = rec.at("accepted").get<bool>() ? 1 : 0;
    out.log_h_trace[r] = rec.at("log_h").get<double>();
  }
  return out;
}

void write_replication_table_csv(const std::string& path,
                                 const ReplicationTable& table) {
  std::ofstream out = open_out(path);
  out << "estimator,bias,esd,rmse,re,coverage,replicates\n";
  for (const auto& row : table.rows) {
    out << row.estimator << ',' << format_double(row.bias) << ','
        << format_double(row.esd) << ',' << format_double(row.rmse) << ','
        << format_double(row.re) << ',' << format_double(row.coverage) << ','
        << row.replicates << "\n";
  }
}

void write_replication_table_json(const std::string& path,
                                  const ReplicationTable& table) {
  json j;
  j["replicates_requested"] = table.replicates_requested;
  j["replicates_failed"] = table.replicates_failed;
  json cfg;
  cfg["n"] = table.config.n;
  cfg["beta0"] = table.config.beta0;
  cfg["eta"] = table.config.eta;
  cfg["nu"] = table.config.nu;
  cfg["subcohort_p"] = table.config.subcohort_p;
  cfg["censor_point"] = table.config.censor_point;
  cfg["censor_point_prob"] = table.config.censor_point_prob;
  cfg["replicates"] = table.config.replicates;
  cfg["seed"] = table.config.seed;
  j["config"] = std::move(cfg);
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r;
    r["estimator"] = row.estimator;
    r["bias"] = row.bias;
    r["esd"] = row.esd;
    r["rmse"] = row.rmse;
    r["re"] = row.re;
    r["coverage"] = row.coverage;
    r["replicates"] = row.replicates;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  open_out(path) << j.dump(2) << "\n";
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  CsvTable table;
  table.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != table.header.size())
      throw std::runtime_error("CSV row width mismatch in " + path);
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i)
      row[i] = parse_double(fields[i], "csv cell");
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_csv_table(const std::string& path, const CsvTable& table) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    out << table.header[i];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << "\n";
  }
}

void write_manifest(const std::string& dir, const RunManifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config_path;
  j["seed"] = manifest.seed;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;
  j["version"] = manifest.version.empty() ? kVersion : manifest.version;
  j["wall_clock_seconds"] = manifest.wall_clock_seconds;
  open_out((std::filesystem::path(dir) / "manifest.json").string())
      << j.dump(2) << "\n";
}

}  // namespace cohortbayes
