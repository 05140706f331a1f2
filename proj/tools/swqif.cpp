// swqif command line: simulate / analyze / validate, built on the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "swqif/swqif.h"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kConfigError = 2;
constexpr int kEstimationError = 3;

int exit_code(swqif_status s) {
  if (s == SWQIF_OK) return kOk;
  if (s == SWQIF_VALIDATION_FAILED) return kValidationFailed;
  return swqif_status_is_config(s) ? kConfigError : kEstimationError;
}

int report_failure(swqif_status s) {
  // library messages usually lead with the status name already
  const std::string name = swqif_status_name(s);
  const std::string msg = swqif_last_error();
  std::cerr << "swqif: " << (msg.rfind(name, 0) == 0 ? msg : name + ": " + msg) << "\n";
  return exit_code(s);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << content;
  return static_cast<bool>(f);
}

int run_simulate(const std::string& config_path, const std::string& out_dir, int reps, int threads) {
  std::string config;
  if (!read_file(config_path, config)) {
    std::cerr << "swqif: cannot read config '" << config_path << "'\n";
    return kConfigError;
  }
  char* summary = nullptr;
  const swqif_status s = swqif_simulate(config.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), reps, threads, &summary);
  if (s != SWQIF_OK) return report_failure(s);
  std::cout << summary;
  swqif_string_free(summary);
  return kOk;
}

int run_analyze(const std::string& data_path, const std::string& config_path, const std::string& out_path) {
  std::string arm;
  if (!read_file(config_path, arm)) {
    std::cerr << "swqif: cannot read config '" << config_path << "'\n";
    return kConfigError;
  }
  // an optional "schema" object in the arm file describes the CSV columns
  std::string schema;
  try {
    const auto j = nlohmann::json::parse(arm);
    if (j.is_object() && j.contains("schema")) schema = j["schema"].dump();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "swqif: config is not valid JSON: " << e.what() << "\n";
    return kConfigError;
  }

  swqif_dataset* data = nullptr;
  swqif_status s = swqif_dataset_read_csv(data_path.c_str(), schema.empty() ? nullptr : schema.c_str(), &data);
  if (s != SWQIF_OK) return report_failure(s);
  swqif_report* report = nullptr;
  s = swqif_analyze(data, arm.c_str(), &report);
  swqif_dataset_free(data);
  if (s != SWQIF_OK) return report_failure(s);

  char* json = nullptr;
  char* csv = nullptr;
  s = swqif_report_to_json(report, &json);
  if (s == SWQIF_OK) s = swqif_report_to_csv(report, &csv);
  swqif_report_free(report);
  if (s != SWQIF_OK) return report_failure(s);

  int rc = kOk;
  if (out_path.empty()) {
    std::cout << json << "\n";
  } else {
    const std::string csv_path = std::filesystem::path(out_path).replace_extension(".csv").string();
    if (!write_file(out_path, std::string(json) + "\n") || !write_file(csv_path, csv)) {
      std::cerr << "swqif: cannot write report to '" << out_path << "'\n";
      rc = kConfigError;
    }
  }
  swqif_string_free(json);
  swqif_string_free(csv);
  return rc;
}

int run_validate(bool verbose) {
  char* text = nullptr;
  const swqif_status s = swqif_validate(verbose ? 1 : 0, &text);
  if (text != nullptr) {
    std::cout << text;
    swqif_string_free(text);
  }
  if (s != SWQIF_OK) return report_failure(s);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stepped-wedge treatment effects with cross-fitted adjustment and QIF"};
  app.set_version_flag("--version", std::string(swqif_version()));
  app.require_subcommand(1);

  std::string config, out_dir;
  int reps = 0, threads = 0;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiment; writes summary.csv, replicates.csv, runtime.csv");
  sim->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "output directory (overrides the config)");
  sim->add_option("--reps", reps, "replications (overrides the config)")->check(CLI::PositiveNumber);
  sim->add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);

  std::string data, arm, out;
  auto* ana = app.add_subcommand("analyze", "estimate effects for one long-format CSV dataset");
  ana->add_option("--data", data, "long-format CSV")->required();
  ana->add_option("--config", arm, "arm JSON (structure, correlation, learner, optional schema)")->required();
  ana->add_option("--out", out, "report JSON path; a CSV with the same stem is written alongside");

  bool verbose = false;
  auto* val = app.add_subcommand("validate", "run the built-in numerical self-checks");
  val->add_flag("--verbose,-v", verbose, "show details for passing checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  if (sim->parsed()) return run_simulate(config, out_dir, reps, threads);
  if (ana->parsed()) return run_analyze(data, arm, out);
  return run_validate(verbose);
}
