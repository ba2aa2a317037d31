#ifndef SWITCHFIT_TOOLS_CLI_HPP
#define SWITCHFIT_TOOLS_CLI_HPP

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "switchfit/bench.hpp"
#include "switchfit/em.hpp"
#include "switchfit/filters.hpp"
#include "switchfit/io.hpp"
#include "switchfit/oracle.hpp"
#include "switchfit/simulator.hpp"

namespace switchfit::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kNotConverged = 3, kDegenerate = 4 };

inline void configure_logging() {
  static const bool once = [] {
    const char* level = std::getenv("SWITCHFIT_LOG");
    spdlog::set_level(level != nullptr ? spdlog::level::from_str(level) : spdlog::level::warn);
    return true;
  }();
  (void)once;
}

/// `data.csv` -> `data.truth.json`.
inline std::string truth_path(const std::string& csv_path) {
  const auto dot = csv_path.rfind('.');
  const auto slash = csv_path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? csv_path.substr(0, dot) : csv_path) + ".truth.json";
}

inline ObservationSeries load_series(const std::string& path, std::size_t p) {
  std::vector<double> values = io::read_series_csv(path);
  if (values.size() < p + 1) {
    throw InputError(path + ": need at least " + std::to_string(p + 1) + " rows for order " + std::to_string(p));
  }
  return ObservationSeries(std::move(values), p);
}

inline EStepAlgorithm parse_algo(const std::string& name) {
  if (name == "forward-only") return EStepAlgorithm::forward_only;
  if (name == "baum-welch") return EStepAlgorithm::baum_welch;
  throw InputError("unknown --algo '" + name + "' (expected forward-only or baum-welch)");
}

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 ok, 2 input error, 3 fit did not converge, 4 numerical
/// degeneracy.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Markov-switching autoregression estimation by forward-only EM", "switchfit"};
  app.require_subcommand(1);

  std::string model_path, data_path, out_path, trace_path, algo_name = "forward-only";
  std::size_t length = 0, states = 0, order = 0;
  std::uint64_t seed = 0;
  FitConfig config;
  std::vector<std::size_t> states_grid{2, 4, 8}, order_grid{1};

  auto* sim_cmd = app.add_subcommand("simulate", "simulate a series from a model");
  sim_cmd->add_option("--model", model_path, "model JSON")->required();
  sim_cmd->add_option("--length", length, "number of emissions T")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", seed, "random seed");
  sim_cmd->add_option("--out", out_path, "output CSV; truth goes to <stem>.truth.json")->required();

  auto* fit_cmd = app.add_subcommand("fit", "fit a model by EM");
  fit_cmd->add_option("--data", data_path, "series CSV")->required();
  fit_cmd->add_option("--states", states, "number of regimes N")->required()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--order", order, "autoregressive order p")->required();
  fit_cmd->add_option("--algo", algo_name, "forward-only or baum-welch");
  fit_cmd->add_option("--max-iter", config.max_iter, "maximum EM iterations")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--tol", config.rel_tol, "relative log-likelihood tolerance")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", config.seed, "initialization seed");
  fit_cmd->add_option("--sigma-floor", config.sigma_floor, "lower bound on sigma")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--ridge-eps", config.ridge_eps, "ridge weight for ill-conditioned regressions")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--out", out_path, "output fit JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "log-likelihood and final filter probabilities");
  eval_cmd->add_option("--data", data_path, "series CSV")->required();
  eval_cmd->add_option("--model", model_path, "model JSON")->required();
  eval_cmd->add_option("--trace", trace_path, "optional per-step CSV: step, scale, q_1..q_N");

  auto* cmp_cmd = app.add_subcommand("compare", "forward-only vs forward-backward E-step deviations");
  cmp_cmd->add_option("--data", data_path, "series CSV")->required();
  cmp_cmd->add_option("--model", model_path, "model JSON")->required();

  auto* bench_cmd = app.add_subcommand("bench", "operation counts and timings of both E-steps");
  bench_cmd->add_option("--states-grid", states_grid, "regime counts")->delimiter(',');
  bench_cmd->add_option("--order-grid", order_grid, "AR orders")->delimiter(',');
  bench_cmd->add_option("--length", length, "series length")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", seed, "random seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (*sim_cmd) {
      const SwitchingModel model = io::read_model(model_path);
      const SimOutput sim = simulate(model, length, seed);
      std::ostringstream csv;
      io::write_series_csv(csv, sim.series.values());
      io::write_text(out_path, csv.str());
      io::write_text(truth_path(out_path), io::truth_to_json(sim, model).dump(2) + "\n");
      spdlog::info("simulated {} emissions to {}", length, out_path);
      return kOk;
    }
    if (*fit_cmd) {
      config.algo = parse_algo(algo_name);
      const ObservationSeries series = load_series(data_path, order);
      if (series.length() < 2) throw InputError(data_path + ": need at least p + 2 rows");
      const FitReport report = fit(series, states, order, config);
      io::write_text(out_path, io::report_to_json(report, config).dump(2) + "\n");
      if (report.failure) {
        err << "error: " << *report.failure << '\n';
        return kDegenerate;
      }
      spdlog::info("fit finished after {} iterations (converged: {})", report.iterations, report.converged);
      return report.converged ? kOk : kNotConverged;
    }
    if (*eval_cmd) {
      const SwitchingModel model = io::read_model(model_path);
      const ObservationSeries series = load_series(data_path, model.ar_order());
      std::ofstream trace_file;
      if (!trace_path.empty()) {
        trace_file.open(trace_path, std::ios::binary);
        if (!trace_file) throw InputError("cannot write " + trace_path);
        trace_file << std::setprecision(17);
      }
      const FilterState state = run_filter(model, series, trace_path.empty() ? nullptr : &trace_file);
      const Vector probs = state.q() / state.q().sum();
      const io::json result{{"loglik", log_likelihood(state, series)},
                            {"final_filter_probs", std::vector<double>(probs.begin(), probs.end())}};
      out << result.dump(2) << '\n';
      return kOk;
    }
    if (*cmp_cmd) {
      const SwitchingModel model = io::read_model(model_path);
      const ObservationSeries series = load_series(data_path, model.ar_order());
      out << io::deviation_to_json(compare_esteps(model, series)).dump(2) << '\n';
      return kOk;
    }
    if (*bench_cmd) {
      const auto rows = run_bench(states_grid, order_grid, length, seed);
      out << std::left << std::setw(4) << "N" << std::setw(4) << "p" << std::setw(8) << "T" << std::setw(18)
          << "fwd_only_macs" << std::setw(18) << "fwd_bwd_macs" << std::setw(12) << "ratio" << std::setw(14)
          << "fwd_only_ms" << "fwd_bwd_ms\n";
      for (const auto& r : rows) {
        out << std::left << std::setw(4) << r.n_regimes << std::setw(4) << r.ar_order << std::setw(8) << r.length
            << std::setw(18) << r.forward_only_macs_per_step << std::setw(18) << r.forward_backward_macs_per_step
            << std::setw(12) << std::setprecision(4) << r.cost_ratio() << std::setw(14) << r.forward_only_ms
            << r.forward_backward_ms << '\n';
      }
      return kOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalDegeneracy& e) {
    err << "error: " << e.what() << '\n';
    return kDegenerate;
  } catch (const EstimationDegenerate& e) {
    err << "error: " << e.what() << '\n';
    return kDegenerate;
  }
  return kInputError;
}

}  // namespace switchfit::cli

#endif  // SWITCHFIT_TOOLS_CLI_HPP
