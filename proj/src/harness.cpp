#include "swqif/harness.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "swqif/error.hpp"
#include "swqif/format.hpp"
#include "swqif/rng.hpp"

namespace swqif {

using nlohmann::json;

void ExperimentConfig::check() const {
  if (replications < 1) throw Error(ErrorCode::ConfigError, "replications must be at least 1");
  if (threads < 1) throw Error(ErrorCode::ConfigError, "threads must be at least 1");
  if (arms.empty()) throw Error(ErrorCode::ConfigError, "experiment needs at least one arm");
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t b = a + 1; b < arms.size(); ++b) {
      if (arms[a].label == arms[b].label) throw Error(ErrorCode::ConfigError, "duplicate arm label '" + arms[a].label + "'");
    }
  }
  scenario.check();
}

ExperimentConfig experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("scenario") || !j.contains("arms")) {
    throw Error(ErrorCode::ConfigError, "experiment config needs 'scenario' and 'arms'");
  }
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known = {"scenario", "arms", "replications", "seed", "alpha", "threads", "output"};
    if (!known.count(key)) throw Error(ErrorCode::ConfigError, "unknown experiment field '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.scenario = scenario_from_json(j["scenario"].dump());
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    c.alpha = j.value("alpha", c.alpha);
    c.threads = j.value("threads", c.threads);
    c.output = j.value("output", std::string());
    for (const auto& a : j["arms"]) {
      ArmConfig arm = arm_from_json(a.dump());
      arm.alpha = c.alpha;
      c.arms.push_back(std::move(arm));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad experiment field: ") + e.what());
  }
  if (const char* env = std::getenv("SWQIF_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Error(ErrorCode::ConfigError, "SWQIF_SEED must be an unsigned integer");
    c.seed = v;
  }
  c.check();
  return c;
}

namespace {

struct ReplicateOutput {
  std::vector<ReplicateRecord> records;
  std::vector<double> seconds;  // per arm
};

ReplicateOutput run_replicate(const ExperimentConfig& config, int rep, const std::vector<std::string>& labels) {
  ReplicateOutput out;
  out.seconds.assign(config.arms.size(), 0.0);
  Scenario scenario = config.scenario;
  scenario.seed = config.seed;
  const Eigen::VectorXd truth = true_estimands(scenario);
  const auto contrasts = builtin_contrasts(scenario.design_config());
  const TrialDataset data = generate(scenario, static_cast<std::uint64_t>(rep));

  for (std::size_t a = 0; a < config.arms.size(); ++a) {
    ArmConfig arm = config.arms[a];
    arm.structure = scenario.structure;
    const auto start = std::chrono::steady_clock::now();
    ReplicateRecord base;
    base.replicate = rep;
    base.arm = arm.label;
    try {
      const EstimateReport r =
          analyze(data, arm, derive_seed({config.seed, static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(a)}));
      const auto coefs = r.coefficients();
      for (std::size_t k = 0; k < coefs.size(); ++k) {
        ReplicateRecord rec = base;
        rec.label = coefs[k].label;
        rec.truth = truth(static_cast<Eigen::Index>(k));
        rec.estimate = coefs[k].estimate;
        rec.se = coefs[k].se;
        rec.lower = coefs[k].lower;
        rec.upper = coefs[k].upper;
        rec.converged = r.converged;
        out.records.push_back(rec);
      }
      for (std::size_t k = 0; k < r.contrasts.size(); ++k) {
        const auto& e = r.contrasts[k];
        ReplicateRecord rec = base;
        rec.label = e.label;
        rec.truth = contrasts[k].weights.dot(truth);
        rec.estimate = e.estimate;
        rec.se = e.se;
        rec.lower = e.lower;
        rec.upper = e.upper;
        rec.converged = r.converged;
        out.records.push_back(rec);
      }
    } catch (const std::exception& e) {
      for (const auto& label : labels) {
        ReplicateRecord rec = base;
        rec.label = label;
        rec.error = e.what();
        out.records.push_back(rec);
      }
    }
    out.seconds[a] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.check();
  const DesignConfig design = config.scenario.design_config();
  std::vector<std::string> labels = param_labels(design);
  for (const auto& c : builtin_contrasts(design)) labels.push_back(c.label);

  const int R = config.replications;
  std::vector<ReplicateOutput> outputs(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int rep = next.fetch_add(1); rep < R; rep = next.fetch_add(1)) {
      outputs[static_cast<std::size_t>(rep)] = run_replicate(config, rep, labels);
    }
  };
  const int n_threads = std::min(config.threads, R);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  std::vector<double> seconds(config.arms.size(), 0.0);
  for (auto& o : outputs) {
    result.replicates.insert(result.replicates.end(), o.records.begin(), o.records.end());
    for (std::size_t a = 0; a < seconds.size(); ++a) seconds[a] += o.seconds[a];
  }
  result.metrics = compute_metrics(result.replicates);
  for (std::size_t a = 0; a < seconds.size(); ++a) result.runtime.push_back({config.arms[a].label, seconds[a] / R});
  if (!config.output.empty()) write_experiment(result, config.output);
  return result;
}

std::vector<MetricsRow> compute_metrics(const std::vector<ReplicateRecord>& records) {
  struct Acc {
    MetricsRow row;
    double truth = 0.0;
    std::vector<double> est;
    double se_sum = 0.0;
    int covered = 0;
  };
  std::vector<Acc> accs;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.arm, r.label);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, accs.size()).first;
      accs.push_back({});
      accs.back().row.arm = r.arm;
      accs.back().row.label = r.label;
    }
    Acc& acc = accs[it->second];
    if (!r.error.empty() || !r.converged) {
      ++acc.row.n_failed;
      continue;
    }
    acc.truth = r.truth;
    acc.est.push_back(r.estimate);
    acc.se_sum += r.se;
    if (r.lower <= r.truth && r.truth <= r.upper) ++acc.covered;
  }
  std::vector<MetricsRow> rows;
  rows.reserve(accs.size());
  for (auto& acc : accs) {
    MetricsRow row = acc.row;
    const int n = static_cast<int>(acc.est.size());
    row.n_converged = n;
    if (n > 0) {
      double sum = 0.0;
      for (double v : acc.est) sum += v;
      const double mean = sum / n;
      double ss = 0.0;
      for (double v : acc.est) ss += (v - mean) * (v - mean);
      row.bias = mean - acc.truth;
      row.ese = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
      row.ase = acc.se_sum / n;
      row.cp = static_cast<double>(acc.covered) / n;
    } else {
      row.bias = row.ese = row.ase = row.cp = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' || ch == '\r' ? ' ' : ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double to_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "not a number: '" + s + "'");
  }
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "arm,label,bias,ese,ase,cp,n_converged,n_failed\n";
  for (const auto& r : rows) {
    out << field(r.arm) << ',' << field(r.label) << ',' << format_double(r.bias) << ',' << format_double(r.ese) << ','
        << format_double(r.ase) << ',' << format_double(r.cp) << ',' << r.n_converged << ',' << r.n_failed << '\n';
  }
  return out.str();
}

std::string replicates_to_csv(const std::vector<ReplicateRecord>& records) {
  std::ostringstream out;
  out << "replicate,arm,label,truth,estimate,se,lower,upper,converged,error\n";
  for (const auto& r : records) {
    out << r.replicate << ',' << field(r.arm) << ',' << field(r.label) << ',' << format_double(r.truth) << ','
        << format_double(r.estimate) << ',' << format_double(r.se) << ',' << format_double(r.lower) << ','
        << format_double(r.upper) << ',' << (r.converged ? 1 : 0) << ',' << field(r.error) << '\n';
  }
  return out.str();
}

std::vector<ReplicateRecord> replicates_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "replicates CSV is empty");
  std::vector<ReplicateRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) {
      throw Error(ErrorCode::ParseError, "replicates CSV line " + std::to_string(line_no) + " has " +
                                             std::to_string(f.size()) + " fields, expected 10");
    }
    ReplicateRecord r;
    r.replicate = std::stoi(f[0]);
    r.arm = f[1];
    r.label = f[2];
    r.truth = to_double(f[3]);
    r.estimate = to_double(f[4]);
    r.se = to_double(f[5]);
    r.lower = to_double(f[6]);
    r.upper = to_double(f[7]);
    r.converged = f[8] == "1";
    r.error = f[9];
    out.push_back(std::move(r));
  }
  return out;
}

std::string runtime_to_csv(const std::vector<ArmRuntime>& rows) {
  std::ostringstream out;
  out << "arm,mean_seconds\n";
  for (const auto& r : rows) out << field(r.arm) << ',' << format_double(r.mean_seconds) << '\n';
  return out.str();
}

void write_experiment(const ExperimentResult& result, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory '" + dir + "': " + ec.message());
  auto write = [&](const char* name, const std::string& content) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f << content;
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  };
  write("summary.csv", metrics_to_csv(result.metrics));
  write("replicates.csv", replicates_to_csv(result.replicates));
  write("runtime.csv", runtime_to_csv(result.runtime));
}

}  // namespace swqif
