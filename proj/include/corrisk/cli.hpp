#pragma once

// Command-line front end: price, greeks and benchmark subcommands.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "corrisk/benchmark.hpp"
#include "corrisk/config.hpp"
#include "corrisk/greeks.hpp"

namespace corrisk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with one row per strictly-lower pair: i,j,rho,dV_drho,stderr.
inline void write_greeks_csv(std::ostream& out, const CorrelationMatrix& rho, const GreeksEstimate& g) {
  out << "i,j,rho,dV_drho,stderr\n";
  for (const Pair& p : all_pairs(rho.size())) {
    out << p.i << ',' << p.j << ',' << format_double(rho(p.i, p.j)) << ',' << format_double(g.mean[p]) << ',';
    if (g.std_error) out << format_double((*g.std_error)[p]);
    out << '\n';
  }
}

inline void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows) {
  out << "n_names,method,ratio,seconds_value,seconds_total\n";
  for (const auto& r : rows) {
    out << r.n_names << ',' << to_string(r.method) << ',' << format_double(r.ratio) << ','
        << format_double(r.seconds_value) << ',' << format_double(r.seconds_total) << '\n';
  }
}

namespace detail {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
};

inline void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("config", o.config_path, "JSON run configuration")->required();
  cmd->add_option("--seed", o.seed, "override the configured seed");
  cmd->add_option("--threads", o.threads, "maximum number of worker threads");
}

inline EngineConfig engine_from(const RunConfig& rc, const CommonOptions& o,
                                std::optional<std::size_t> names = std::nullopt) {
  auto cfg = build_engine_config(rc, names);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

// Writes to `path` when given, else to `fallback`.
template <class Writer>
void emit(const std::optional<std::string>& path, std::ostream& fallback, Writer&& write) {
  if (!path) {
    write(fallback);
    return;
  }
  std::ofstream file(*path, std::ios::binary);
  if (!file) throw Error(ErrorCode::InvalidConfig, "cannot write output file '" + *path + "'");
  write(file);
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Monte Carlo correlation Greeks for n-th to default basket swaps"};
  app.require_subcommand(1);

  detail::CommonOptions price_opt;
  auto* price_cmd = app.add_subcommand("price", "value and standard error of the sharp payout");
  detail::add_common(price_cmd, price_opt);

  detail::CommonOptions greeks_opt;
  std::string method_name;
  auto* greeks_cmd = app.add_subcommand("greeks", "correlation Greeks for every pair, as CSV");
  detail::add_common(greeks_cmd, greeks_opt);
  greeks_cmd->add_option("--method", method_name, "bump | forward | aad-per-path | aad-binned");
  greeks_cmd->add_option("--out", greeks_opt.out, "CSV output path (default: config or stdout)");

  detail::CommonOptions bench_opt;
  std::vector<std::size_t> names_grid;
  std::vector<std::string> method_names;
  BenchmarkOptions bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "cost ratios of Greeks over value, as CSV");
  detail::add_common(bench_cmd, bench_opt);
  bench_cmd->add_option("--names-grid", names_grid, "basket sizes, e.g. 8,16,32")->delimiter(',');
  bench_cmd->add_option("--methods", method_names, "methods to time")->delimiter(',');
  bench_cmd->add_option("--repeats", bench.repeats, "timed repeats per measurement (median reported)");
  bench_cmd->add_option("--bump-sample", bench.bump_sample,
                        "time this many bumped pairs and extrapolate (0 = all)");
  bench_cmd->add_option("--out", bench_opt.out, "CSV output path (default: config or stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*price_cmd) {
      const auto rc = load_run_config(price_opt.config_path);
      const auto cfg = detail::engine_from(rc, price_opt);
      const auto v = price(cfg);
      out << "value=" << format_double(v.value) << ", stderr=" << format_double(v.std_error)
          << ", n_paths=" << v.n_paths << '\n';
      return kExitOk;
    }

    if (*greeks_cmd) {
      const auto rc = load_run_config(greeks_opt.config_path);
      auto cfg = detail::engine_from(rc, greeks_opt);
      if (!method_name.empty()) {
        const auto m = parse_method(method_name);
        if (!m) throw Error(ErrorCode::InvalidConfig, "--method must be one of bump, forward, aad-per-path, aad-binned");
        cfg.method = *m;
      }
      const auto g = correlation_greeks(cfg);
      for (const auto& w : g.warnings) err << "warning: " << w << '\n';
      const auto path = greeks_opt.out ? greeks_opt.out : rc.greeks_out;
      detail::emit(path, out, [&](std::ostream& os) { write_greeks_csv(os, cfg.correlation, g); });
      return kExitOk;
    }

    if (*bench_cmd) {
      const auto rc = load_run_config(bench_opt.config_path);
      std::vector<Method> methods;
      if (method_names.empty()) method_names = {"bump", "aad-per-path", "aad-binned"};
      for (const auto& s : method_names) {
        const auto m = parse_method(s);
        if (!m) throw Error(ErrorCode::InvalidConfig, "--methods: unknown method '" + s + "'");
        methods.push_back(*m);
      }
      if (names_grid.empty()) names_grid.push_back(detail::engine_from(rc, bench_opt).n_names());

      std::vector<BenchmarkRow> rows;
      bool unstable = false;
      for (std::size_t n : names_grid) {
        const auto cfg = detail::engine_from(rc, bench_opt, n);
        for (Method m : methods) {
          auto row = benchmark_method(cfg, m, bench);
          if (row.unstable) {
            unstable = true;
            err << "warning: timings for n_names=" << n << ", method=" << to_string(m)
                << " vary by more than " << bench.max_cv * 100 << "% across repeats; reporting the median\n";
          }
          rows.push_back(row);
        }
      }
      const auto path = bench_opt.out ? bench_opt.out : rc.benchmark_out;
      detail::emit(path, out, [&](std::ostream& os) { write_benchmark_csv(os, rows); });
      return unstable ? kExitNumerical : kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_configuration() ? kExitConfig : kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace corrisk
