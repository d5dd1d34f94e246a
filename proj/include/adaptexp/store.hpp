#pragma once

// Text formats: the JSON experiment config, the line-delimited run store, the
// run manifest, and a linter for stored records.

#include <adaptexp/harness.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace adaptexp {

using Json = nlohmann::ordered_json;

/// Malformed run store or config content. `line()` is 1-based, 0 when not line-oriented.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline Json config_to_json(const ExperimentConfig& c) {
  Json mechs = Json::array();
  for (auto m : c.mechanisms) mechs.push_back(std::string(mechanism_name(m)));
  return Json{{"k_arms", c.k_arms},
              {"n_total", c.n_total},
              {"wave_sizes", c.wave_sizes},
              {"mechanisms", mechs},
              {"gamma", c.gamma},
              {"prior", {{"alpha", c.prior.alpha}, {"beta", c.prior.beta}}},
              {"replications", c.replications},
              {"mc_draws", c.mc_draws},
              {"sp_draws", c.sp_draws},
              {"alpha", c.alpha},
              {"allocation_policy", std::string(allocation_policy_name(c.allocation_policy))},
              {"master_seed", c.master_seed}};
}

namespace detail {

template <class T>
T config_field(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("invalid value (") + e.what() + ")");
  }
}

}  // namespace detail

/// Keys absent from `j` keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config", "top level must be an object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "k_arms") {
      c.k_arms = detail::config_field<std::int64_t>(j, "k_arms");
    } else if (key == "n_total") {
      c.n_total = detail::config_field<std::int64_t>(j, "n_total");
    } else if (key == "wave_sizes") {
      c.wave_sizes = detail::config_field<std::vector<std::int64_t>>(j, "wave_sizes");
    } else if (key == "mechanisms") {
      c.mechanisms.clear();
      for (const auto& name : detail::config_field<std::vector<std::string>>(j, "mechanisms")) {
        const auto m = parse_mechanism(name);
        if (!m) throw ConfigError("mechanisms", "unknown mechanism '" + name + "'");
        c.mechanisms.push_back(*m);
      }
    } else if (key == "gamma") {
      c.gamma = detail::config_field<double>(j, "gamma");
    } else if (key == "prior") {
      if (!value.is_object()) throw ConfigError("prior", "must be an object with alpha and beta");
      c.prior.alpha = detail::config_field<double>(value, "alpha");
      c.prior.beta = detail::config_field<double>(value, "beta");
    } else if (key == "replications") {
      c.replications = detail::config_field<std::int64_t>(j, "replications");
    } else if (key == "mc_draws") {
      c.mc_draws = detail::config_field<std::int64_t>(j, "mc_draws");
    } else if (key == "sp_draws") {
      c.sp_draws = detail::config_field<std::int64_t>(j, "sp_draws");
    } else if (key == "alpha") {
      c.alpha = detail::config_field<double>(j, "alpha");
    } else if (key == "allocation_policy") {
      const auto name = detail::config_field<std::string>(j, "allocation_policy");
      const auto p = parse_allocation_policy(name);
      if (!p) throw ConfigError("allocation_policy", "expected 'iid' or 'largest-remainder'");
      c.allocation_policy = *p;
    } else if (key == "master_seed") {
      c.master_seed = detail::config_field<std::uint64_t>(j, "master_seed");
    } else {
      throw ConfigError(key, "unknown config key");
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// 64-bit FNV-1a, used to fingerprint configs in manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config_to_json(c).dump());
  return os.str();
}

inline Json record_to_json(const TrialRecord& r) {
  Json alpha = Json::array();
  Json beta = Json::array();
  for (const auto& arm : r.final_posteriors.arms) {
    alpha.push_back(arm.alpha);
    beta.push_back(arm.beta);
  }
  return Json{{"trial", r.trial},
              {"mechanism", std::string(mechanism_name(r.mechanism))},
              {"wave_size", r.wave_size},
              {"theta_star", r.truth.theta_star},
              {"r_sample", r.losses.r_sample},
              {"r_policy", r.losses.r_policy},
              {"prec_best", r.losses.prec_best},
              {"prec_avg", r.losses.prec_avg},
              {"sp", r.losses.sp},
              {"counts", r.counts},
              {"alpha_final", alpha},
              {"beta_final", beta},
              {"seed", r.seed},
              {"tie_flags", {{"k_hat", r.tie_flags.k_hat}, {"truth", r.tie_flags.truth}}}};
}

/// One store line, without the trailing newline.
inline std::string record_to_line(const TrialRecord& r) { return record_to_json(r).dump(); }

inline TrialRecord record_from_json(const Json& j) {
  TrialRecord r;
  r.trial = j.at("trial").get<std::int64_t>();
  const auto name = j.at("mechanism").get<std::string>();
  const auto m = parse_mechanism(name);
  if (!m) throw std::invalid_argument("unknown mechanism '" + name + "'");
  r.mechanism = *m;
  r.wave_size = j.at("wave_size").get<std::int64_t>();
  r.truth.theta_star = j.at("theta_star").get<std::vector<double>>();
  r.losses.r_sample = j.at("r_sample").get<double>();
  r.losses.r_policy = j.at("r_policy").get<double>();
  r.losses.prec_best = j.at("prec_best").get<double>();
  r.losses.prec_avg = j.at("prec_avg").get<double>();
  r.losses.sp = j.at("sp").get<int>();
  r.counts = j.at("counts").get<std::vector<std::int64_t>>();
  const auto alpha = j.at("alpha_final").get<std::vector<double>>();
  const auto beta = j.at("beta_final").get<std::vector<double>>();
  if (alpha.size() != beta.size()) throw std::invalid_argument("alpha_final/beta_final lengths differ");
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    r.final_posteriors.arms.push_back({alpha[k], beta[k]});
  }
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto& flags = j.at("tie_flags");
  r.tie_flags.k_hat = flags.at("k_hat").get<bool>();
  r.tie_flags.truth = flags.at("truth").get<bool>();
  const auto k = r.truth.size();
  if (r.counts.size() != k || r.final_posteriors.size() != k) {
    throw std::invalid_argument("per-arm fields have inconsistent lengths");
  }
  return r;
}

inline TrialRecord parse_record_line(const std::string& line, std::size_t line_no = 0) {
  try {
    return record_from_json(Json::parse(line));
  } catch (const std::exception& e) {
    throw FormatError(line_no, std::string("malformed record: ") + e.what());
  }
}

/// Reads every record; blank lines are skipped. Throws FormatError on the first bad line.
inline std::vector<TrialRecord> read_store(std::istream& in) {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record_line(line, line_no));
  }
  return out;
}

inline std::vector<TrialRecord> read_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(0, "cannot read run store '" + path + "'");
  return read_store(in);
}

/// Append-only line sink; every write is checked.
class StoreWriter {
 public:
  explicit StoreWriter(std::ostream& out) : out_(out) {}

  void operator()(const TrialRecord& r) {
    out_ << record_to_line(r) << '\n';
    if (!out_) throw std::runtime_error("write to run store failed");
    ++written_;
  }
  std::size_t written() const noexcept { return written_; }

 private:
  std::ostream& out_;
  std::size_t written_ = 0;
};

struct Manifest {
  std::string status;  // "complete" or "partial"
  std::size_t records = 0;
  double wall_seconds = 0.0;
  unsigned threads = 1;
  std::string error;
};

inline Json manifest_to_json(const ExperimentConfig& c, const Manifest& m) {
  Json j{{"status", m.status},
         {"records", m.records},
         {"expected_records", static_cast<std::int64_t>(study_cells(c).size()) * c.replications},
         {"master_seed", c.master_seed},
         {"config_hash", config_hash(c)},
         {"wall_seconds", m.wall_seconds},
         {"threads", m.threads},
         {"config", config_to_json(c)}};
  if (!m.error.empty()) j["error"] = m.error;
  return j;
}

inline std::string manifest_path(const std::string& store_path) {
  return store_path + ".manifest.json";
}

/// What a linter can check beyond the record itself.
struct LintExpectations {
  std::optional<std::int64_t> n_total;
  BetaParams prior{1.0, 1.0};
};

/// Problems with one record; empty when the record is consistent. Losses that
/// depend only on stored fields are recomputed and compared.
inline std::vector<std::string> lint_record(const TrialRecord& r, const LintExpectations& expect) {
  std::vector<std::string> problems;
  const std::size_t k = r.truth.size();
  if (k < 2) problems.push_back("fewer than two arms");
  if (r.counts.size() != k || r.final_posteriors.size() != k) {
    problems.push_back("per-arm fields have inconsistent lengths");
    return problems;
  }
  for (double t : r.truth.theta_star) {
    if (!(t >= 0.0 && t <= 1.0)) problems.push_back("theta_star outside [0, 1]");
  }
  if (!r.losses.in_range()) problems.push_back("loss outside [0, 1] or sp not binary");

  std::int64_t total = 0;
  for (std::size_t a = 0; a < k; ++a) {
    const auto c = r.counts[a];
    if (c < 0) problems.push_back("negative count");
    total += c;
    const auto& arm = r.final_posteriors[a];
    const double observed = arm.alpha - expect.prior.alpha + arm.beta - expect.prior.beta;
    if (arm.alpha < expect.prior.alpha || arm.beta < expect.prior.beta ||
        observed != static_cast<double>(c)) {
      problems.push_back("posterior of arm " + std::to_string(a) +
                         " does not account for its count");
    }
  }
  if (expect.n_total && total != *expect.n_total) {
    problems.push_back("counts sum to " + std::to_string(total) + ", expected " +
                       std::to_string(*expect.n_total));
  }
  if (r.wave_size < 1 || total % r.wave_size != 0) {
    problems.push_back("wave size does not divide the participant total");
  }
  if (!problems.empty()) return problems;

  constexpr double tol = 1e-12;
  if (std::abs(in_sample_regret(r.truth, std::span<const std::int64_t>(r.counts)) -
               r.losses.r_sample) > tol) {
    problems.push_back("r_sample does not match counts");
  }
  if (std::abs(policy_regret(r.truth, r.final_posteriors) - r.losses.r_policy) > tol) {
    problems.push_back("r_policy does not match final posteriors");
  }
  const auto prec = precision_losses(r.truth, r.final_posteriors);
  if (std::abs(prec.prec_best - r.losses.prec_best) > tol ||
      std::abs(prec.prec_avg - r.losses.prec_avg) > tol) {
    problems.push_back("precision losses do not match final posteriors");
  }
  if (estimated_best(r.final_posteriors).tied != r.tie_flags.k_hat ||
      truth_has_ties(r.truth) != r.tie_flags.truth) {
    problems.push_back("tie flags do not match record contents");
  }
  return problems;
}

struct LintReport {
  std::size_t records = 0;
  std::size_t bad_records = 0;
  std::vector<std::string> messages;  // capped; "record i: problem"

  bool ok() const noexcept { return bad_records == 0; }
};

inline LintReport lint_store(const std::vector<TrialRecord>& records, const LintExpectations& expect,
                             std::size_t max_messages = 20) {
  LintReport report;
  for (const auto& r : records) {
    const auto problems = lint_record(r, expect);
    if (!problems.empty()) {
      ++report.bad_records;
      for (const auto& p : problems) {
        if (report.messages.size() < max_messages) {
          report.messages.push_back("record " + std::to_string(report.records) + ": " + p);
        }
      }
    }
    ++report.records;
  }
  return report;
}

}  // namespace adaptexp
