#ifndef SWITCHFIT_TESTS_SUPPORT_HPP
#define SWITCHFIT_TESTS_SUPPORT_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "switchfit/model.hpp"

namespace switchfit::testing {

/// Random model drawn with std::mt19937_64 directly, independent of the
/// library's simulator helpers.
inline SwitchingModel make_model(std::size_t n, std::size_t p, std::uint64_t seed, double sigma_lo = 0.4,
                                 double sigma_hi = 1.6) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix a(ni, ni);
  for (Eigen::Index j = 0; j < ni; ++j) {
    for (Eigen::Index i = 0; i < ni; ++i) a(i, j) = 0.05 + unit(gen);
    a.col(j) /= a.col(j).sum();
  }
  std::vector<RegimeParams> regimes;
  for (std::size_t r = 0; r < n; ++r) {
    Vector c(static_cast<Eigen::Index>(p + 1));
    c[0] = 3.0 * unit(gen) - 1.5;
    for (std::size_t k = 1; k <= p; ++k) c[static_cast<Eigen::Index>(k)] = unit(gen) - 0.5;
    regimes.emplace_back(c, sigma_lo + (sigma_hi - sigma_lo) * unit(gen));
  }
  Vector pi(ni);
  for (Eigen::Index i = 0; i < ni; ++i) pi[i] = 0.1 + unit(gen);
  pi /= pi.sum();
  return SwitchingModel(a, regimes, pi);
}

/// Series of p + t values drawn i.i.d. from N(0, scale^2).
inline ObservationSeries make_series(std::size_t p, std::size_t t, std::uint64_t seed, double scale = 1.5) {
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(p + t);
  for (auto& x : v) x = normal(gen);
  return ObservationSeries(v, p);
}

}  // namespace switchfit::testing

#endif  // SWITCHFIT_TESTS_SUPPORT_HPP
