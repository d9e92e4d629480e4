#pragma once

// JSON run configuration.
//
//   {
//     "n_names": 5,                      // optional when an array fixes it
//     "n_paths": 100000, "n_bins": 20, "seed": 42,
//     "method": "aad-binned",            // bump | forward | aad-per-path | aad-binned
//     "bump_size": 1e-4, "threads": 1,
//     "hazards": 0.02,                   // number or per-name array
//     "correlation": 0.3,                // uniform off-diagonal or full matrix
//     "contract": {
//       "seniority": 2, "maturity": 5.0,
//       "payments_per_year": 4,          // or "payment_times": [...]
//       "spreads": 0.0025,               // per payment; number or array
//       "recoveries": 0.4,               // number or per-name array
//       "discount_rate": 0.03,
//       "smoothing_width": 0.0125        // optional
//     },
//     "output": { "greeks": "greeks.csv", "benchmark": "bench.csv" }
//   }
//
// Unknown keys are rejected.  Errors name the offending key.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "corrisk/greeks.hpp"

namespace corrisk {

struct RunConfig {
  nlohmann::json document;
  std::optional<std::string> greeks_out;
  std::optional<std::string> benchmark_out;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "key '" + key + "': " + what);
}

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           const std::set<std::string>& allowed) {
  if (!obj.is_object()) config_error(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) config_error(where.empty() ? key : where + "." + key, "unknown key");
  }
}

inline double get_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) config_error(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(key, "expected a finite number");
  return x;
}

inline std::uint64_t get_count(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x >= 0.0 && x == std::floor(x) && x < 1.8e19) return static_cast<std::uint64_t>(x);
  }
  config_error(key, "expected a non-negative integer");
}

// Number broadcast to n entries, or an array that must have n entries.
inline std::vector<double> get_per_name(const nlohmann::json& v, const std::string& key, std::size_t n) {
  if (v.is_number()) return std::vector<double>(n, get_number(v, key));
  if (!v.is_array()) config_error(key, "expected a number or an array");
  if (v.size() != n) config_error(key, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(get_number(v[k], key + "[" + std::to_string(k) + "]"));
  return out;
}

inline std::optional<std::size_t> implied_names(const nlohmann::json& doc) {
  if (doc.contains("n_names")) return get_count(doc["n_names"], "n_names");
  if (doc.contains("correlation") && doc["correlation"].is_array()) return doc["correlation"].size();
  if (doc.contains("hazards") && doc["hazards"].is_array()) return doc["hazards"].size();
  if (doc.contains("contract") && doc["contract"].is_object() && doc["contract"].contains("recoveries") &&
      doc["contract"]["recoveries"].is_array())
    return doc["contract"]["recoveries"].size();
  return std::nullopt;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
  using namespace detail;
  reject_unknown(doc, "", {"n_names", "n_paths", "n_bins", "seed", "method", "bump_size", "threads",
                           "hazards", "correlation", "contract", "output"});
  RunConfig rc;
  rc.document = doc;
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    reject_unknown(o, "output", {"greeks", "benchmark"});
    for (const char* k : {"greeks", "benchmark"}) {
      if (o.contains(k) && !o[k].is_string()) config_error(std::string("output.") + k, "expected a string");
    }
    if (o.contains("greeks")) rc.greeks_out = o["greeks"].get<std::string>();
    if (o.contains("benchmark")) rc.benchmark_out = o["benchmark"].get<std::string>();
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, "'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

/// Builds the engine configuration, optionally with a different basket
/// size (only possible when per-name quantities are given as scalars).
inline EngineConfig build_engine_config(const RunConfig& rc, std::optional<std::size_t> names = std::nullopt) {
  using namespace detail;
  const auto& doc = rc.document;
  for (const char* k : {"hazards", "correlation", "contract", "n_paths", "seed"})
    if (!doc.contains(k)) config_error(k, "required key is missing");

  std::size_t n = 0;
  if (names) {
    n = *names;
  } else if (auto implied = implied_names(doc)) {
    n = *implied;
  } else {
    config_error("n_names", "required when hazards, correlation and recoveries are all scalars");
  }
  if (n == 0) config_error("n_names", "must be at least 1");

  EngineConfig cfg;
  cfg.n_paths = get_count(doc["n_paths"], "n_paths");
  cfg.seed = get_count(doc["seed"], "seed");
  if (doc.contains("n_bins")) cfg.n_bins = get_count(doc["n_bins"], "n_bins");
  if (doc.contains("bump_size")) cfg.bump_size = get_number(doc["bump_size"], "bump_size");
  if (doc.contains("threads")) cfg.threads = static_cast<unsigned>(get_count(doc["threads"], "threads"));
  if (doc.contains("method")) {
    if (!doc["method"].is_string()) config_error("method", "expected a string");
    const auto m = parse_method(doc["method"].get<std::string>());
    if (!m) config_error("method", "expected one of bump, forward, aad-per-path, aad-binned");
    cfg.method = *m;
  }

  cfg.hazards = get_per_name(doc["hazards"], "hazards", n);
  for (double h : cfg.hazards)
    if (!(h > 0.0)) config_error("hazards", "hazard rates must be positive");

  const auto& corr = doc["correlation"];
  try {
    if (corr.is_number()) {
      cfg.correlation = CorrelationMatrix::uniform(n, get_number(corr, "correlation"));
    } else if (corr.is_array()) {
      std::vector<std::vector<double>> m;
      for (std::size_t i = 0; i < corr.size(); ++i) {
        const std::string key = "correlation[" + std::to_string(i) + "]";
        if (!corr[i].is_array()) config_error(key, "expected an array");
        std::vector<double> row;
        for (std::size_t j = 0; j < corr[i].size(); ++j)
          row.push_back(get_number(corr[i][j], key + "[" + std::to_string(j) + "]"));
        m.push_back(std::move(row));
      }
      if (m.size() != n) config_error("correlation", "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
      cfg.correlation = validate_correlation(m);
    } else {
      config_error("correlation", "expected a number or a matrix");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    // Keep the code: an indefinite matrix is a numerical failure, not a
    // malformed file.
    throw Error(e.code(), std::string("key 'correlation': ") + e.what());
  }

  const auto& c = doc["contract"];
  reject_unknown(c, "contract", {"seniority", "maturity", "payment_times", "payments_per_year", "spreads",
                                 "recoveries", "discount_rate", "smoothing_width"});
  for (const char* k : {"seniority", "maturity", "spreads", "recoveries"})
    if (!c.contains(k)) config_error(std::string("contract.") + k, "required key is missing");
  BasketDefaultSwap& s = cfg.contract;
  s.seniority = get_count(c["seniority"], "contract.seniority");
  s.maturity = get_number(c["maturity"], "contract.maturity");
  if (c.contains("payment_times") == c.contains("payments_per_year"))
    config_error("contract.payment_times", "give exactly one of payment_times or payments_per_year");
  if (c.contains("payment_times")) {
    const auto& t = c["payment_times"];
    if (!t.is_array()) config_error("contract.payment_times", "expected an array");
    for (std::size_t k = 0; k < t.size(); ++k)
      s.payment_times.push_back(get_number(t[k], "contract.payment_times[" + std::to_string(k) + "]"));
  } else {
    const auto per_year = get_count(c["payments_per_year"], "contract.payments_per_year");
    if (per_year == 0) config_error("contract.payments_per_year", "must be positive");
    const auto count = static_cast<std::size_t>(std::floor(s.maturity * static_cast<double>(per_year) + 1e-9));
    for (std::size_t k = 1; k <= count; ++k) s.payment_times.push_back(static_cast<double>(k) / static_cast<double>(per_year));
  }
  s.spreads = get_per_name(c["spreads"], "contract.spreads", s.payment_times.size());
  s.recoveries = get_per_name(c["recoveries"], "contract.recoveries", n);
  if (c.contains("discount_rate")) s.discount_rate = get_number(c["discount_rate"], "contract.discount_rate");
  s.smoothing_width = c.contains("smoothing_width")
                          ? get_number(c["smoothing_width"], "contract.smoothing_width")
                          : default_smoothing_width(s.payment_times, s.maturity);
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("key 'contract': ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return cfg;
}

}  // namespace corrisk
