#ifndef SWITCHFIT_IO_HPP
#define SWITCHFIT_IO_HPP

// File formats:
//   series CSV   header line `y`, one decimal value per line, `\n` endings;
//                the first p rows are the conditioning window.
//   model JSON   {n_regimes, ar_order, transition, regimes, initial_dist};
//                transition[j][i] = P(next = regime i+1 | current = regime j+1),
//                i.e. the array lists COLUMNS of the column-stochastic matrix.
//   truth JSON   {seed, length, hidden_path (1-based labels), model}.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchfit/em.hpp"
#include "switchfit/model.hpp"
#include "switchfit/oracle.hpp"
#include "switchfit/simulator.hpp"

namespace switchfit::io {

using nlohmann::json;

inline json model_to_json(const SwitchingModel& model) {
  const auto n = static_cast<Eigen::Index>(model.n_regimes());
  json columns = json::array();
  for (Eigen::Index j = 0; j < n; ++j) {
    json col = json::array();
    for (Eigen::Index i = 0; i < n; ++i) col.push_back(model.transition()(i, j));
    columns.push_back(std::move(col));
  }
  json regimes = json::array();
  for (const auto& r : model.regimes()) {
    regimes.push_back({{"coeffs", std::vector<double>(r.coeffs().begin(), r.coeffs().end())},
                       {"sigma", r.sigma()}});
  }
  const auto& pi = model.initial_dist();
  return json{{"n_regimes", model.n_regimes()},
              {"ar_order", model.ar_order()},
              {"transition", std::move(columns)},
              {"regimes", std::move(regimes)},
              {"initial_dist", std::vector<double>(pi.begin(), pi.end())}};
}

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InputError(std::string("model JSON: missing field '") + key + "'");
  return j.at(key);
}

inline std::vector<double> number_array(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError("model JSON: " + what + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw InputError("model JSON: " + what + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::size_t count_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw InputError(std::string("model JSON: '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace detail

/// Parses and validates a model; any schema or invariant violation is an InputError.
inline SwitchingModel model_from_json(const json& j, double sigma_floor = kDefaultSigmaFloor) {
  const std::size_t n = detail::count_field(j, "n_regimes");
  const std::size_t p = detail::count_field(j, "ar_order");
  if (n == 0) throw InputError("model JSON: n_regimes must be positive");
  const json& columns = detail::field(j, "transition");
  if (!columns.is_array() || columns.size() != n) throw InputError("model JSON: transition must list N columns");
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix a(ni, ni);
  for (std::size_t c = 0; c < n; ++c) {
    const auto col = detail::number_array(columns[c], "transition column");
    if (col.size() != n) throw InputError("model JSON: each transition column must have N entries");
    for (std::size_t i = 0; i < n; ++i) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[i];
  }
  const json& regimes_json = detail::field(j, "regimes");
  if (!regimes_json.is_array() || regimes_json.size() != n) throw InputError("model JSON: regimes must have N entries");
  std::vector<RegimeParams> regimes;
  for (const auto& r : regimes_json) {
    const auto coeffs = detail::number_array(detail::field(r, "coeffs"), "coeffs");
    if (coeffs.size() != p + 1) throw InputError("model JSON: coeffs must have ar_order + 1 entries");
    const json& sigma = detail::field(r, "sigma");
    if (!sigma.is_number()) throw InputError("model JSON: sigma must be a number");
    try {
      regimes.emplace_back(Eigen::Map<const Vector>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size())),
                           sigma.get<double>(), sigma_floor);
    } catch (const ContractError& e) {
      throw InputError(std::string("model JSON: ") + e.what());
    }
  }
  const auto pi = detail::number_array(detail::field(j, "initial_dist"), "initial_dist");
  if (pi.size() != n) throw InputError("model JSON: initial_dist must have N entries");
  try {
    return SwitchingModel(std::move(a), std::move(regimes),
                          Eigen::Map<const Vector>(pi.data(), static_cast<Eigen::Index>(n)));
  } catch (const ContractError& e) {
    throw InputError(std::string("model JSON: ") + e.what());
  }
}

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": invalid JSON: " + e.what());
  }
}

inline SwitchingModel read_model(const std::string& path) { return model_from_json(parse_json_file(path)); }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_series_csv(std::ostream& out, const std::vector<double>& values) {
  out << "y\n";
  for (double v : values) out << format_double(v) << '\n';
}

inline std::vector<double> read_series_csv(std::istream& in, const std::string& source = "series") {
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "y") throw InputError(source + ": header must be 'y'");
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v = 0.0;
    const char* first = line.data();
    const char* last = first + line.size();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
      throw InputError(source + ": row " + std::to_string(row) + " is not a finite number: '" + line + "'");
    }
    values.push_back(v);
  }
  return values;
}

inline std::vector<double> read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_series_csv(in, path);
}

inline json truth_to_json(const SimOutput& sim, const SwitchingModel& model) {
  json path = json::array();
  for (std::size_t s : sim.hidden_path) path.push_back(s + 1);
  return json{{"seed", sim.seed},
              {"length", sim.hidden_path.size()},
              {"hidden_path", std::move(path)},
              {"model", model_to_json(model)}};
}

inline json report_to_json(const FitReport& report, const FitConfig& config) {
  json warnings = json::array();
  for (const auto& w : report.warnings) warnings.push_back({{"tag", w.tag}, {"message", w.message}});
  json out{{"model", model_to_json(report.model)},
           {"loglik_trace", report.loglik_trace},
           {"converged", report.converged},
           {"iterations", report.iterations},
           {"warnings", std::move(warnings)},
           {"algo", to_string(config.algo)},
           {"seed", config.seed},
           {"initial_dist_policy", "frozen"}};
  if (report.failure) out["failure"] = *report.failure;
  return out;
}

inline json deviation_to_json(const DeviationReport& rep) {
  json fam = json::object();
  for (const auto& [name, d] : rep.families) fam[name] = d;
  return json{{"families", std::move(fam)}, {"max", rep.max()}};
}

}  // namespace switchfit::io

#endif  // SWITCHFIT_IO_HPP
