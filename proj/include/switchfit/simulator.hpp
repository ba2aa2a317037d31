#ifndef SWITCHFIT_SIMULATOR_HPP
#define SWITCHFIT_SIMULATOR_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "switchfit/model.hpp"
#include "switchfit/random.hpp"

namespace switchfit {

struct SimOutput {
  ObservationSeries series;
  /// hidden_path[l-1] is the regime (0-based) that drives emission l.
  std::vector<std::size_t> hidden_path;
  std::uint64_t seed{0};
};

/// Draws a hidden path and T emissions. Draw order, one PortableRng stream:
/// x_0 from the initial law; then for l = 1..T one normal for y_l and, if
/// l < T, one uniform for x_l from column x_{l-1}.
inline SimOutput simulate(const SwitchingModel& model, std::size_t length, std::uint64_t seed,
                          const std::optional<LagWindow>& init_window = std::nullopt) {
  detail::require(length >= 1, "simulate: length must be at least 1");
  const std::size_t p = model.ar_order();
  LagWindow window = init_window.value_or(LagWindow::zeros(p));
  detail::require(window.size() == p, "simulate: init window length must equal p");

  std::vector<double> values;
  values.reserve(p + length);
  for (std::size_t k = p; k > 0; --k) values.push_back(window.lags[static_cast<Eigen::Index>(k - 1)]);

  PortableRng rng(seed);
  SimOutput out;
  out.seed = seed;
  out.hidden_path.reserve(length);
  std::size_t state = rng.categorical(model.initial_dist());
  for (std::size_t l = 1; l <= length; ++l) {
    out.hidden_path.push_back(state);
    const auto& regime = model.regime(state);
    const double y = predict_mean(regime, window) + regime.sigma() * rng.normal();
    values.push_back(y);
    window = window.shifted(y);
    if (l < length) state = rng.categorical(model.column(state));
  }
  out.series = ObservationSeries(std::move(values), p);
  return out;
}

/// Random well-posed model for tests and benchmarks: column-stochastic A with
/// every entry at least 0.2 / N before normalization, intercepts spread over
/// [-2, 2], lag coefficients summing to less than 0.6 in magnitude, sigma in
/// [0.5, 1.5], and a random positive initial law.
inline SwitchingModel random_model(std::size_t n, std::size_t p, std::uint64_t seed) {
  PortableRng rng(seed);
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix a(ni, ni);
  for (Eigen::Index j = 0; j < ni; ++j) {
    for (Eigen::Index i = 0; i < ni; ++i) a(i, j) = 0.2 / static_cast<double>(n) + rng.uniform();
    a.col(j) /= a.col(j).sum();
  }
  std::vector<RegimeParams> regimes;
  for (std::size_t r = 0; r < n; ++r) {
    Vector coeffs(static_cast<Eigen::Index>(p + 1));
    coeffs[0] = 4.0 * rng.uniform() - 2.0;
    for (std::size_t k = 1; k <= p; ++k) {
      coeffs[static_cast<Eigen::Index>(k)] = (1.2 * rng.uniform() - 0.6) / static_cast<double>(p);
    }
    regimes.emplace_back(std::move(coeffs), 0.5 + rng.uniform());
  }
  Vector pi(ni);
  for (Eigen::Index i = 0; i < ni; ++i) pi[i] = 0.1 + rng.uniform();
  pi /= pi.sum();
  return SwitchingModel(std::move(a), std::move(regimes), std::move(pi));
}

}  // namespace switchfit

#endif  // SWITCHFIT_SIMULATOR_HPP
