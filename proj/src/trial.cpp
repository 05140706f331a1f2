#include "swqif/trial.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "swqif/format.hpp"

namespace swqif {

std::string_view structure_name(TreatmentStructure s) {
  switch (s) {
    case TreatmentStructure::Constant: return "constant";
    case TreatmentStructure::Duration: return "duration";
    case TreatmentStructure::Period: return "period";
    case TreatmentStructure::Saturated: return "saturated";
  }
  return "constant";
}

TreatmentStructure parse_structure(std::string_view name) {
  if (name == "constant") return TreatmentStructure::Constant;
  if (name == "duration") return TreatmentStructure::Duration;
  if (name == "period") return TreatmentStructure::Period;
  if (name == "saturated") return TreatmentStructure::Saturated;
  throw Error(ErrorCode::ConfigError, "unknown treatment structure '" + std::string(name) + "'");
}

Sequence Sequence::starting_at(int period) {
  if (period < 1) {
    throw Error(ErrorCode::ParseError, "treatment sequence must be >= 1, got " + std::to_string(period));
  }
  Sequence s;
  s.start_ = period;
  return s;
}

int Sequence::start() const {
  if (is_never()) throw Error(ErrorCode::DimensionMismatch, "never-treated sequence has no start period");
  return start_;
}

std::string Sequence::to_string() const { return is_never() ? "inf" : std::to_string(start_); }

int ClusterData::enrolled_count(int period) const {
  return static_cast<int>(enrolled.row(period - 1).count());
}

std::string_view rule_name(ViolationRule rule) {
  switch (rule) {
    case ViolationRule::EmptyDataset: return "EmptyDataset";
    case ViolationRule::PeriodCountMismatch: return "PeriodCountMismatch";
    case ViolationRule::CovariateDimension: return "CovariateDimension";
    case ViolationRule::NonFiniteCovariate: return "NonFiniteCovariate";
    case ViolationRule::PopulationMismatch: return "PopulationMismatch";
    case ViolationRule::SequenceOutOfRange: return "SequenceOutOfRange";
    case ViolationRule::OrphanOutcome: return "OrphanOutcome";
    case ViolationRule::MissingOutcome: return "MissingOutcome";
    case ViolationRule::ProbLength: return "ProbLength";
    case ViolationRule::NegativeProb: return "NegativeProb";
    case ViolationRule::ProbSumViolation: return "ProbSumViolation";
    case ViolationRule::SingleSequence: return "SingleSequence";
  }
  return "Unknown";
}

std::vector<Violation> validate(const TrialDataset& dataset) {
  std::vector<Violation> out;
  auto add = [&out](ViolationRule rule, std::string cluster, int period, int individual, std::string msg) {
    out.push_back({rule, std::move(cluster), period, individual, std::move(msg)});
  };

  if (dataset.clusters.empty()) {
    add(ViolationRule::EmptyDataset, "", 0, -1, "dataset has no clusters");
    return out;
  }
  const int J = dataset.periods;
  const int q = dataset.covariate_count();
  std::set<int> observed_sequences;

  for (const auto& c : dataset.clusters) {
    const int n = c.population_size();
    if (c.enrolled.rows() != J || c.outcomes.rows() != J) {
      add(ViolationRule::PeriodCountMismatch, c.id, 0, -1,
          "cluster has " + std::to_string(c.enrolled.rows()) + " periods, dataset has " + std::to_string(J));
      continue;
    }
    if (c.covariates.cols() != q) {
      add(ViolationRule::CovariateDimension, c.id, 0, -1,
          "cluster has " + std::to_string(c.covariates.cols()) + " covariates, dataset has " + std::to_string(q));
    }
    if (n < 1 || c.enrolled.cols() != n || c.outcomes.cols() != n ||
        static_cast<int>(c.individual_ids.size()) != n) {
      add(ViolationRule::PopulationMismatch, c.id, 0, -1, "inconsistent population size");
      continue;
    }
    for (int k = 0; k < n; ++k) {
      for (int p = 0; p < c.covariates.cols(); ++p) {
        if (!std::isfinite(c.covariates(k, p))) {
          add(ViolationRule::NonFiniteCovariate, c.id, 0, k, "covariate " + std::to_string(p + 1) + " not finite");
        }
      }
    }
    if (!c.sequence.is_never() && c.sequence.start() > J) {
      add(ViolationRule::SequenceOutOfRange, c.id, 0, -1, "sequence " + c.sequence.to_string() + " exceeds J");
    }
    observed_sequences.insert(c.sequence.is_never() ? J + 1 : c.sequence.start());
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < n; ++k) {
        const double y = c.outcomes(j, k);
        if (!c.enrolled(j, k) && !std::isnan(y)) {
          add(ViolationRule::OrphanOutcome, c.id, j + 1, k, "outcome present for a non-enrolled cell");
        } else if (c.enrolled(j, k) && !std::isfinite(y)) {
          add(ViolationRule::MissingOutcome, c.id, j + 1, k, "enrolled cell lacks a finite outcome");
        }
      }
    }
  }

  if (dataset.sequence_probs) {
    const auto& pi = *dataset.sequence_probs;
    if (pi.size() != J + 1) {
      add(ViolationRule::ProbLength, "", 0, -1,
          "sequence probabilities need J+1 = " + std::to_string(J + 1) + " entries");
    } else {
      if ((pi.array() < 0.0).any()) add(ViolationRule::NegativeProb, "", 0, -1, "negative sequence probability");
      if (std::abs(pi.sum() - 1.0) > 1e-9) {
        add(ViolationRule::ProbSumViolation, "", 0, -1, "sequence probabilities sum to " + format_double(pi.sum()));
      }
    }
  }
  if (observed_sequences.size() < 2) {
    add(ViolationRule::SingleSequence, "", 0, -1, "fewer than two distinct treatment sequences observed");
  }
  return out;
}

Eigen::VectorXd empirical_sequence_probs(const TrialDataset& dataset) {
  const int J = dataset.periods;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(J + 1);
  for (const auto& c : dataset.clusters) {
    const int idx = c.sequence.index(J);
    if (idx >= 0 && idx <= J) counts(idx) += 1.0;
  }
  const double total = counts.sum();
  if (total > 0) counts /= total;
  return counts;
}

Eigen::VectorXd resolved_sequence_probs(const TrialDataset& dataset) {
  return dataset.sequence_probs ? *dataset.sequence_probs : empirical_sequence_probs(dataset);
}

SchemaConfig schema_from_json(const std::string& json_text) {
  SchemaConfig s;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("schema JSON: ") + e.what());
  }
  try {
    if (j.contains("cluster")) s.cluster = j.at("cluster").get<std::string>();
    if (j.contains("period")) s.period = j.at("period").get<std::string>();
    if (j.contains("individual")) s.individual = j.at("individual").get<std::string>();
    if (j.contains("z")) s.sequence = j.at("z").get<std::string>();
    if (j.contains("sequence")) s.sequence = j.at("sequence").get<std::string>();
    if (j.contains("y")) s.outcome = j.at("y").get<std::string>();
    if (j.contains("outcome")) s.outcome = j.at("outcome").get<std::string>();
    if (j.contains("covariates")) s.covariates = j.at("covariates").get<std::vector<std::string>>();
    if (j.contains("baselineCovariate")) s.baseline_covariate = j.at("baselineCovariate").get<std::string>();
    if (j.contains("periods")) s.periods = j.at("periods").get<int>();
    if (j.contains("sequenceProbs") && !j.at("sequenceProbs").is_string()) {
      s.sequence_probs = j.at("sequenceProbs").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("schema JSON: ") + e.what());
  }
  return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_real(const std::string& text, std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": column '" + column + "' is not numeric: '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& text, std::size_t line_no, const std::string& column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": column '" + column + "' is not an integer: '" + text + "'");
  }
  return v;
}

Sequence parse_sequence(const std::string& text, std::size_t line_no, const std::string& column) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "inf" || lower == "+inf" || lower == "infinity") return Sequence::never();
  const int z = parse_int(text, line_no, column);
  if (z < 1) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": sequence must be >= 1 or 'inf'");
  }
  return Sequence::starting_at(z);
}

struct PendingIndividual {
  std::string id;
  std::vector<double> covariates;
  std::optional<double> baseline;
  std::map<int, double> outcomes;
};

struct PendingCluster {
  std::string id;
  Sequence sequence;
  std::vector<PendingIndividual> individuals;
  std::unordered_map<std::string, int> index;
};

}  // namespace

TrialDataset ingest_csv(const std::string& path, const SchemaConfig& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, "'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto column = [&header](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::SchemaError, "missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  const int c_cluster = column(schema.cluster);
  const int c_period = column(schema.period);
  const int c_individual = column(schema.individual);
  const int c_seq = column(schema.sequence);
  const int c_y = column(schema.outcome);

  std::vector<std::string> cov_names;
  if (schema.covariates) {
    cov_names = *schema.covariates;
  } else {
    const std::set<std::string> reserved{schema.cluster, schema.period, schema.individual, schema.sequence,
                                         schema.outcome};
    for (const auto& h : header) {
      if (!reserved.count(h)) cov_names.push_back(h);
    }
  }
  std::vector<int> c_cov;
  for (const auto& name : cov_names) c_cov.push_back(column(name));

  std::vector<PendingCluster> clusters;
  std::unordered_map<std::string, int> cluster_index;
  int max_period = 0;
  std::size_t line_no = 1;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(f.size()));
    }
    for (auto& v : f) v = trim(v);

    const std::string& cid = f[c_cluster];
    const int period = parse_int(f[c_period], line_no, schema.period);
    const std::string& iid = f[c_individual];
    const Sequence z = parse_sequence(f[c_seq], line_no, schema.sequence);
    const double y = parse_real(f[c_y], line_no, schema.outcome);
    std::vector<double> x;
    x.reserve(c_cov.size());
    for (std::size_t p = 0; p < c_cov.size(); ++p) x.push_back(parse_real(f[c_cov[p]], line_no, cov_names[p]));

    if (period < 0 || (schema.periods && period > *schema.periods)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": period " + std::to_string(period) +
                                             " out of range");
    }

    auto [cit, inserted] = cluster_index.try_emplace(cid, static_cast<int>(clusters.size()));
    if (inserted) {
      clusters.push_back(PendingCluster{cid, z, {}, {}});
    }
    PendingCluster& pc = clusters[cit->second];
    if (!(pc.sequence == z)) {
      throw Error(ErrorCode::InconsistentSequence, "cluster '" + cid + "' has sequences " + pc.sequence.to_string() +
                                                       " and " + z.to_string() + " (line " +
                                                       std::to_string(line_no) + ")");
    }
    auto [iit, new_ind] = pc.index.try_emplace(iid, static_cast<int>(pc.individuals.size()));
    if (new_ind) {
      pc.individuals.push_back(PendingIndividual{iid, x, std::nullopt, {}});
    }
    PendingIndividual& ind = pc.individuals[iit->second];
    if (ind.covariates != x) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": covariates of individual '" + iid +
                                             "' in cluster '" + cid + "' differ across rows");
    }

    if (period == 0) {
      if (!schema.baseline_covariate) continue;
      if (ind.baseline) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": duplicate baseline row");
      }
      ind.baseline = y;
      continue;
    }
    if (!ind.outcomes.emplace(period, y).second) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": duplicate row for cluster '" + cid +
                                             "', period " + std::to_string(period) + ", individual '" + iid + "'");
    }
    max_period = std::max(max_period, period);
  }

  TrialDataset ds;
  ds.periods = schema.periods.value_or(max_period);
  ds.covariate_names = cov_names;
  if (schema.baseline_covariate) ds.covariate_names.push_back(*schema.baseline_covariate);
  const int J = ds.periods;
  const int q = ds.covariate_count();
  if (J < 1) throw Error(ErrorCode::SchemaError, "no post-baseline periods found");

  for (auto& pc : clusters) {
    ClusterData c;
    c.id = pc.id;
    c.sequence = pc.sequence;
    const int n = static_cast<int>(pc.individuals.size());
    c.covariates.resize(n, q);
    c.enrolled = BoolArray::Constant(J, n, false);
    c.outcomes = Eigen::MatrixXd::Constant(J, n, std::nan(""));
    for (int k = 0; k < n; ++k) {
      const auto& ind = pc.individuals[k];
      c.individual_ids.push_back(ind.id);
      for (std::size_t p = 0; p < ind.covariates.size(); ++p) c.covariates(k, static_cast<int>(p)) = ind.covariates[p];
      if (schema.baseline_covariate) {
        if (!ind.baseline) {
          throw Error(ErrorCode::SchemaError, "individual '" + ind.id + "' in cluster '" + pc.id +
                                                  "' has no baseline (period 0) row");
        }
        c.covariates(k, q - 1) = *ind.baseline;
      }
      for (const auto& [period, y] : ind.outcomes) {
        c.enrolled(period - 1, k) = true;
        c.outcomes(period - 1, k) = y;
      }
    }
    ds.clusters.push_back(std::move(c));
  }
  if (schema.sequence_probs) {
    ds.sequence_probs = Eigen::Map<const Eigen::VectorXd>(schema.sequence_probs->data(),
                                                          static_cast<Eigen::Index>(schema.sequence_probs->size()));
  }
  return ds;
}

void export_csv(const TrialDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "cluster,period,individual,z,y";
  for (const auto& name : dataset.covariate_names) out << ',' << name;
  out << '\n';
  for (const auto& c : dataset.clusters) {
    for (int k = 0; k < c.population_size(); ++k) {
      for (int j = 0; j < c.periods(); ++j) {
        if (!c.enrolled(j, k)) continue;
        out << c.id << ',' << (j + 1) << ',' << c.individual_ids[k] << ',' << c.sequence.to_string() << ','
            << format_double(c.outcomes(j, k));
        for (int p = 0; p < c.covariates.cols(); ++p) out << ',' << format_double(c.covariates(k, p));
        out << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace swqif
