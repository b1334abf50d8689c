#pragma once

#include <string>
#include <vector>

#include "cohortbayes/samplers.hpp"
#include "cohortbayes/simulation.hpp"
#include "cohortbayes/survival.hpp"

namespace cohortbayes {

// Cohort CSV: header time,event,selected,z1..,w1..,x1..; booleans as 0/1,
// missing z cells empty, '.' decimal, UTF-8.
void write_cohort_csv(const std::string& path, const CohortData& cohort);
CohortData read_cohort_csv(const std::string& path);

// Chain JSONL: one header record carrying the config echo and seed, then one
// record per iteration {iter, beta, accepted, log_h}.
void write_chain_jsonl(const std::string& path, const ChainOutput& output);
ChainOutput read_chain_jsonl(const std::string& path);

void write_replication_table_csv(const std::string& path,
                                 const ReplicationTable& table);
void write_replication_table_json(const std::string& path,
                                  const ReplicationTable& table);

// Generic numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv_table(const std::string& path);
void write_csv_table(const std::string& path, const CsvTable& table);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version;
  double wall_clock_seconds = 0.0;
};
void write_manifest(const std::string& dir, const RunManifest& manifest);

std::string format_double(double v);

}  // namespace cohortbayes
