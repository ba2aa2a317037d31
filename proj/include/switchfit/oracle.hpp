#ifndef SWITCHFIT_ORACLE_HPP
#define SWITCHFIT_ORACLE_HPP

// Two independent routes to the E-step quantities: exhaustive enumeration of
// hidden paths (exact, tiny instances only) and the scaled forward-backward
// recursions. Both are used to check the forward-only filters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "switchfit/filters.hpp"
#include "switchfit/model.hpp"
#include "switchfit/stats.hpp"

namespace switchfit {

/// Sufficient statistics plus per-time smoothed regime probabilities.
/// smoothed(r, l-1) is P(regime r drives emission l | all emissions).
struct PosteriorStats {
  SufficientStats stats;
  Matrix smoothed;
  double loglik{0.0};
  std::uint64_t macs{0};
};

inline constexpr std::uint64_t kMaxEnumeratedPaths = std::uint64_t{1} << 20;

namespace detail {

/// log emission densities, entry (i, l-1) for emission l under regime i.
inline Matrix emission_log_densities(const SwitchingModel& model, const ObservationSeries& series) {
  const std::size_t n = model.n_regimes();
  const std::size_t t = series.length();
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
  for (std::size_t l = 1; l <= t; ++l) {
    const LagWindow w = series.window_before(l);
    for (std::size_t i = 0; i < n; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l - 1)) =
          log_emission_density(i, model, series.emission(l), w);
    }
  }
  return out;
}

inline void check_enumerable(std::size_t n, std::size_t t) {
  std::uint64_t paths = 1;
  for (std::size_t l = 0; l < t; ++l) {
    paths *= n;
    if (paths > kMaxEnumeratedPaths) {
      throw InstanceTooLarge("brute force enumeration refused: N^T exceeds 2^20");
    }
  }
}

/// Calls visit(path, log_weight) for every hidden path x_0..x_T with nonzero
/// prior probability, where log_weight is the log joint density of the path
/// and all emissions.
template <typename Visitor>
void enumerate_paths(const SwitchingModel& model, const Matrix& log_dens, Visitor&& visit) {
  const std::size_t n = model.n_regimes();
  const std::size_t t = static_cast<std::size_t>(log_dens.cols());
  const Matrix& a = model.transition();
  std::vector<std::size_t> path(t + 1, 0);
  while (true) {
    double lw = std::log(model.initial_dist()[static_cast<Eigen::Index>(path[0])]);
    for (std::size_t l = 1; l <= t && std::isfinite(lw); ++l) {
      const auto prev = static_cast<Eigen::Index>(path[l - 1]);
      lw += std::log(a(static_cast<Eigen::Index>(path[l]), prev)) + log_dens(prev, static_cast<Eigen::Index>(l - 1));
    }
    if (std::isfinite(lw)) visit(path, lw);
    std::size_t k = 0;
    while (k <= t && ++path[k] == n) path[k++] = 0;
    if (k > t) break;
  }
}

}  // namespace detail

/// Exact posterior statistics by summing over all N^(T+1) hidden paths
/// x_0..x_T (x_T only enters through the last transition).
inline PosteriorStats brute_force_posterior(const SwitchingModel& model, const ObservationSeries& series) {
  const std::size_t n = model.n_regimes();
  const std::size_t p = model.ar_order();
  const std::size_t t = series.length();
  detail::require(series.conditioning_len() == p, "brute_force_posterior: series order mismatch");
  detail::check_enumerable(n, t);
  const Matrix log_dens = detail::emission_log_densities(model, series);
  const auto& v = series.values();
  auto y = [&](long l) { return v[static_cast<std::size_t>(static_cast<long>(p) + l - 1)]; };

  double max_lw = -std::numeric_limits<double>::infinity();
  detail::enumerate_paths(model, log_dens, [&](const std::vector<std::size_t>&, double lw) {
    max_lw = std::max(max_lw, lw);
  });
  if (!std::isfinite(max_lw)) throw NumericalDegeneracy("every hidden path has zero weight", 0);

  PosteriorStats out;
  out.stats = SufficientStats::zeros(n, p, t);
  out.smoothed = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
  auto& s = out.stats;
  double total = 0.0;
  detail::enumerate_paths(model, log_dens, [&](const std::vector<std::size_t>& path, double lw) {
    const double w = std::exp(lw - max_lw);
    total += w;
    for (std::size_t l = 1; l <= t; ++l) {
      const auto li = static_cast<long>(l);
      const auto r = static_cast<Eigen::Index>(path[l - 1]);
      s.jump_hat(r, static_cast<Eigen::Index>(path[l])) += w;
      s.occ_hat[r] += w;
      out.smoothed(r, static_cast<Eigen::Index>(l - 1)) += w;
      s.ta_hat(r, 0) += w * y(li) * y(li);
      s.tc_hat[r] += w * y(li);
      for (std::size_t j = 0; j < p; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        const double lag_j = y(li - 1 - static_cast<long>(j));
        s.ta_hat(r, ji + 1) += w * lag_j * y(li);
        s.td_hat(r, ji) += w * lag_j;
        for (std::size_t i = 0; i < p; ++i) {
          s.tb_hat[static_cast<std::size_t>(r)](static_cast<Eigen::Index>(i), ji) +=
              w * lag_j * y(li - 1 - static_cast<long>(i));
        }
      }
    }
  });
  s = s.scaled(1.0 / total);
  out.smoothed /= total;
  out.loglik = max_lw + std::log(total);
  return out;
}

/// Exact posterior mean of a ScalarProcess at the final time:
///   H_T = initial(x_0) + sum_l alpha(x_{l-1}, w_l) + <beta(x_{l-1}, w_l), e_{x_l} - A e_{x_{l-1}}>
///         + delta(x_{l-1}, w_l) f(y_l),
/// where w_l is the lag window preceding emission l.
inline double brute_force_process_expectation(const SwitchingModel& model, const ObservationSeries& series,
                                              const ScalarProcess& process) {
  const std::size_t n = model.n_regimes();
  const std::size_t t = series.length();
  detail::check_enumerable(n, t);
  const Matrix log_dens = detail::emission_log_densities(model, series);
  const Matrix& a = model.transition();
  std::vector<LagWindow> windows;
  for (std::size_t l = 1; l <= t; ++l) windows.push_back(series.window_before(l));

  double max_lw = -std::numeric_limits<double>::infinity();
  detail::enumerate_paths(model, log_dens, [&](const std::vector<std::size_t>&, double lw) {
    max_lw = std::max(max_lw, lw);
  });
  double total = 0.0;
  double acc = 0.0;
  detail::enumerate_paths(model, log_dens, [&](const std::vector<std::size_t>& path, double lw) {
    const double w = std::exp(lw - max_lw);
    double h = process.initial ? process.initial(path[0]) : 0.0;
    for (std::size_t l = 1; l <= t; ++l) {
      const std::size_t r = path[l - 1];
      const LagWindow& win = windows[l - 1];
      if (process.alpha) h += process.alpha(r, win);
      if (process.beta) {
        Vector increment = -a.col(static_cast<Eigen::Index>(r));
        increment[static_cast<Eigen::Index>(path[l])] += 1.0;
        h += process.beta(r, win).dot(increment);
      }
      if (process.delta && process.f) h += process.delta(r, win) * process.f(series.emission(l));
    }
    total += w;
    acc += w * h;
  });
  return acc / total;
}

/// Scaled forward-backward pass producing the same statistics as the
/// forward-only filter.
inline PosteriorStats baum_welch_estep(const SwitchingModel& model, const ObservationSeries& series) {
  const std::size_t n = model.n_regimes();
  const std::size_t p = model.ar_order();
  const std::size_t t = series.length();
  detail::require(series.conditioning_len() == p, "baum_welch_estep: series order mismatch");
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ti = static_cast<Eigen::Index>(t);
  const Matrix& a = model.transition();
  const Matrix log_dens = detail::emission_log_densities(model, series);

  // forward(:, l) = P(X_l | y_1..y_l); dens(:, l-1) = densities of y_l shifted by shift[l-1].
  Matrix forward(ni, ti + 1);
  Matrix dens(ni, ti);
  Vector log_c(ti);
  Vector step_scale(ti);  // normalizer of step l, relative to dens(:, l-1)
  forward.col(0) = model.initial_dist();
  std::uint64_t macs = 0;
  for (Eigen::Index l = 1; l <= ti; ++l) {
    const auto prev = forward.col(l - 1);
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ni; ++i) {
      if (prev[i] > 0.0) shift = std::max(shift, log_dens(i, l - 1));
    }
    if (!std::isfinite(shift)) throw NumericalDegeneracy("forward pass lost all mass", static_cast<std::size_t>(l));
    for (Eigen::Index i = 0; i < ni; ++i) {
      const double d = log_dens(i, l - 1) - shift;
      dens(i, l - 1) = std::exp(prev[i] > 0.0 ? d : std::min(d, 0.0));
    }
    const Vector u = a * prev.cwiseProduct(dens.col(l - 1));
    const double c = u.sum();
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw NumericalDegeneracy("forward scaling constant vanished", static_cast<std::size_t>(l));
    }
    forward.col(l) = u / c;
    step_scale[l - 1] = c;
    log_c[l - 1] = std::log(c) + shift;
    macs += static_cast<std::uint64_t>(ni * ni + 2 * ni);
  }

  PosteriorStats out;
  out.stats = SufficientStats::zeros(n, p, t);
  out.smoothed = Matrix::Zero(ni, ti);
  out.loglik = log_c.sum();
  auto& s = out.stats;
  const auto& v = series.values();
  auto y = [&](long l) { return v[static_cast<std::size_t>(static_cast<long>(p) + l - 1)]; };
  const std::uint64_t per_regime = 1 + (p + 1) + p * (p + 1) / 2 + 1 + p;

  Vector backward = Vector::Ones(ni);  // scaled P(y_{l+1..T} | X_l)
  for (Eigen::Index l = ti; l >= 1; --l) {
    const double scale = step_scale[l - 1];
    const Vector a_t_backward = a.transpose() * backward;
    const auto li = static_cast<long>(l);
    for (Eigen::Index r = 0; r < ni; ++r) {
      const double pre = forward(r, l - 1) * dens(r, l - 1) / scale;
      for (Eigen::Index s2 = 0; s2 < ni; ++s2) s.jump_hat(r, s2) += pre * a(s2, r) * backward[s2];
      const double w = pre * a_t_backward[r];
      out.smoothed(r, l - 1) = w;
      s.occ_hat[r] += w;
      s.ta_hat(r, 0) += w * y(li) * y(li);
      s.tc_hat[r] += w * y(li);
      for (std::size_t j = 0; j < p; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        const double lag_j = y(li - 1 - static_cast<long>(j));
        s.ta_hat(r, ji + 1) += w * lag_j * y(li);
        s.td_hat(r, ji) += w * lag_j;
        for (std::size_t i = j; i < p; ++i) {
          const double prod = w * lag_j * y(li - 1 - static_cast<long>(i));
          s.tb_hat[static_cast<std::size_t>(r)](static_cast<Eigen::Index>(i), ji) += prod;
          if (i != j) s.tb_hat[static_cast<std::size_t>(r)](ji, static_cast<Eigen::Index>(i)) += prod;
        }
      }
    }
    backward = dens.col(l - 1).cwiseProduct(a_t_backward) / scale;
    macs += static_cast<std::uint64_t>(ni * ni) * 3 + static_cast<std::uint64_t>(2 * ni) +
            static_cast<std::uint64_t>(n) * per_regime;
  }
  out.macs = macs;
  return out;
}

/// Largest absolute difference scaled by the largest reference magnitude.
inline double relative_deviation(const Matrix& value, const Matrix& reference) {
  detail::require(value.rows() == reference.rows() && value.cols() == reference.cols(),
                  "relative_deviation: shape mismatch");
  if (value.size() == 0) return 0.0;
  const double diff = (value - reference).cwiseAbs().maxCoeff();
  const double mag = reference.cwiseAbs().maxCoeff();
  if (mag == 0.0) return diff;
  return diff / mag;
}

inline double relative_deviation(double value, double reference) {
  const double diff = std::abs(value - reference);
  return reference == 0.0 ? diff : diff / std::abs(reference);
}

/// Maximum relative deviation per statistic family.
struct DeviationReport {
  std::map<std::string, double> families;

  double max() const {
    double m = 0.0;
    for (const auto& [name, d] : families) m = std::max(m, d);
    return m;
  }
};

inline DeviationReport stats_deviation(const SufficientStats& value, const SufficientStats& reference) {
  DeviationReport rep;
  rep.families["jump"] = relative_deviation(value.jump_hat, reference.jump_hat);
  rep.families["occ"] = relative_deviation(value.occ_hat, reference.occ_hat);
  rep.families["ta"] = relative_deviation(value.ta_hat, reference.ta_hat);
  double tb = 0.0;
  for (std::size_t r = 0; r < value.tb_hat.size(); ++r) {
    tb = std::max(tb, relative_deviation(value.tb_hat[r], reference.tb_hat[r]));
  }
  rep.families["tb"] = tb;
  rep.families["tc"] = relative_deviation(value.tc_hat, reference.tc_hat);
  rep.families["td"] = relative_deviation(value.td_hat, reference.td_hat);
  return rep;
}

/// Forward-only statistics against the forward-backward baseline, including
/// the log-likelihood under key "loglik".
inline DeviationReport compare_esteps(const SwitchingModel& model, const ObservationSeries& series) {
  const FilterState state = run_filter(model, series);
  const SufficientStats forward_only = finalize(state);
  const PosteriorStats baseline = baum_welch_estep(model, series);
  DeviationReport rep = stats_deviation(forward_only, baseline.stats);
  rep.families["loglik"] = relative_deviation(log_likelihood(state, series), baseline.loglik);
  return rep;
}

}  // namespace switchfit

#endif  // SWITCHFIT_ORACLE_HPP
