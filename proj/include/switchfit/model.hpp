#ifndef SWITCHFIT_MODEL_HPP
#define SWITCHFIT_MODEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "switchfit/errors.hpp"

namespace switchfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kDefaultSigmaFloor = 1e-6;
inline constexpr double kStochasticTolerance = 1e-12;

/// log of the standard normal density.
inline double log_std_normal_pdf(double x) {
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  return -0.5 * x * x - kLogSqrt2Pi;
}

/// Autoregressive parameters of one regime: intercept a0 followed by the lag
/// coefficients a1..ap, and the noise standard deviation.
class RegimeParams {
 public:
  RegimeParams() = default;

  /// Sigma below `sigma_floor` is raised to the floor; zero, negative or
  /// non-finite sigma is rejected.
  RegimeParams(Vector coeffs, double sigma, double sigma_floor = kDefaultSigmaFloor)
      : coeffs_(std::move(coeffs)), sigma_(sigma) {
    detail::require(coeffs_.size() >= 1, "RegimeParams: coeffs must hold at least the intercept");
    detail::require(coeffs_.allFinite(), "RegimeParams: coeffs must be finite");
    detail::require(std::isfinite(sigma) && sigma > 0.0, "RegimeParams: sigma must be positive and finite");
    detail::require(sigma_floor > 0.0, "RegimeParams: sigma floor must be positive");
    sigma_ = std::max(sigma_, sigma_floor);
  }

  const Vector& coeffs() const noexcept { return coeffs_; }
  double intercept() const noexcept { return coeffs_[0]; }
  double sigma() const noexcept { return sigma_; }
  /// Number of lag coefficients p.
  std::size_t order() const noexcept { return static_cast<std::size_t>(coeffs_.size()) - 1; }

  friend bool operator==(const RegimeParams& a, const RegimeParams& b) {
    return a.sigma_ == b.sigma_ && a.coeffs_ == b.coeffs_;
  }

 private:
  Vector coeffs_{Vector::Zero(1)};
  double sigma_{1.0};
};

/// The p most recent observations, most recent first: (y_t, y_{t-1}, ..., y_{t-p+1}).
struct LagWindow {
  Vector lags;

  LagWindow() = default;
  explicit LagWindow(Vector values) : lags(std::move(values)) {}

  static LagWindow zeros(std::size_t p) { return LagWindow(Vector::Zero(static_cast<Eigen::Index>(p))); }

  std::size_t size() const noexcept { return static_cast<std::size_t>(lags.size()); }

  /// Window after observing `y`: y becomes the most recent lag and the oldest drops out.
  LagWindow shifted(double y) const {
    LagWindow next(lags);
    const auto p = lags.size();
    if (p == 0) return next;
    for (Eigen::Index k = p - 1; k > 0; --k) next.lags[k] = lags[k - 1];
    next.lags[0] = y;
    return next;
  }
};

/// Markov-switching AR(p) model.
///
/// The transition matrix is COLUMN-stochastic: transition()(i, j) is the
/// probability of moving to regime i given the current regime j, so column j
/// is the next-state law out of regime j. The regime active at time t drives
/// the observation at t+1. Regimes are indexed 0..N-1 in the API.
class SwitchingModel {
 public:
  SwitchingModel() = default;

  SwitchingModel(Matrix transition, std::vector<RegimeParams> regimes, Vector initial_dist)
      : transition_(std::move(transition)),
        regimes_(std::move(regimes)),
        initial_dist_(std::move(initial_dist)) {
    validate();
  }

  std::size_t n_regimes() const noexcept { return regimes_.size(); }
  std::size_t ar_order() const noexcept { return regimes_.empty() ? 0 : regimes_.front().order(); }
  const Matrix& transition() const noexcept { return transition_; }
  /// Column j of the transition matrix: law of the next regime given regime j.
  auto column(std::size_t j) const { return transition_.col(static_cast<Eigen::Index>(j)); }
  const std::vector<RegimeParams>& regimes() const noexcept { return regimes_; }
  const RegimeParams& regime(std::size_t i) const {
    detail::require(i < regimes_.size(), "SwitchingModel: regime index out of range");
    return regimes_[i];
  }
  const Vector& initial_dist() const noexcept { return initial_dist_; }

  friend bool operator==(const SwitchingModel& a, const SwitchingModel& b) {
    return a.transition_ == b.transition_ && a.regimes_ == b.regimes_ &&
           a.initial_dist_ == b.initial_dist_;
  }

 private:
  void validate() const {
    const auto n = static_cast<Eigen::Index>(regimes_.size());
    detail::require(n >= 1, "SwitchingModel: at least one regime is required");
    detail::require(transition_.rows() == n && transition_.cols() == n,
                    "SwitchingModel: transition must be N x N");
    detail::require(initial_dist_.size() == n, "SwitchingModel: initial_dist must have N entries");
    const auto p = regimes_.front().order();
    for (const auto& r : regimes_) {
      detail::require(r.order() == p, "SwitchingModel: all regimes must share the AR order");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double a = transition_(i, j);
        detail::require(std::isfinite(a) && a >= 0.0 && a <= 1.0,
                        "SwitchingModel: transition entries must lie in [0, 1]");
      }
      detail::require(std::abs(transition_.col(j).sum() - 1.0) <= kStochasticTolerance,
                      "SwitchingModel: every transition column must sum to 1");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::require(std::isfinite(initial_dist_[i]) && initial_dist_[i] >= 0.0,
                      "SwitchingModel: initial_dist entries must be non-negative");
    }
    detail::require(std::abs(initial_dist_.sum() - 1.0) <= kStochasticTolerance,
                    "SwitchingModel: initial_dist must sum to 1");
  }

  Matrix transition_;
  std::vector<RegimeParams> regimes_;
  Vector initial_dist_;
};

/// Scalar series whose first p values form the conditioning window; the
/// remaining T values are the emissions y_1..y_T.
class ObservationSeries {
 public:
  ObservationSeries() = default;

  ObservationSeries(std::vector<double> values, std::size_t ar_order)
      : values_(std::move(values)), p_(ar_order) {
    if (values_.size() < p_ + 1) {
      throw ContractError("ObservationSeries: need at least p + 1 values");
    }
    for (double v : values_) {
      detail::require(std::isfinite(v), "ObservationSeries: values must be finite");
    }
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t conditioning_len() const noexcept { return p_; }
  /// Number of emissions T.
  std::size_t length() const noexcept { return values_.size() - p_; }

  /// Emission y_l for l in 1..T.
  double emission(std::size_t l) const { return values_[p_ + l - 1]; }

  /// Regressor window for emission y_l: (y_{l-1}, ..., y_{l-p}).
  LagWindow window_before(std::size_t l) const {
    Vector lags(static_cast<Eigen::Index>(p_));
    for (std::size_t k = 0; k < p_; ++k) lags[static_cast<Eigen::Index>(k)] = values_[p_ + l - 2 - k];
    return LagWindow(std::move(lags));
  }

  LagWindow conditioning_window() const { return window_before(1); }

 private:
  std::vector<double> values_;
  std::size_t p_{0};
};

/// coeffs . (1, lags).
inline double predict_mean(const RegimeParams& regime, const LagWindow& window) {
  detail::require(window.size() == regime.order(), "predict_mean: window length must equal p");
  const auto& c = regime.coeffs();
  return c[0] + c.tail(c.size() - 1).dot(window.lags);
}

/// Gaussian log density of y_next under regime i.
inline double log_emission_density(std::size_t regime_index, const SwitchingModel& model,
                                   double y_next, const LagWindow& window) {
  const auto& r = model.regime(regime_index);
  const double z = (y_next - predict_mean(r, window)) / r.sigma();
  return log_std_normal_pdf(z) - std::log(r.sigma());
}

/// log of the likelihood ratio of regime i against the standard normal
/// reference density.
inline double log_gamma_factor(std::size_t regime_index, const SwitchingModel& model,
                               double y_next, const LagWindow& window) {
  return log_emission_density(regime_index, model, y_next, window) - log_std_normal_pdf(y_next);
}

/// phi((y - mu_i) / sigma_i) / (sigma_i phi(y)).
inline double gamma_factor(std::size_t regime_index, const SwitchingModel& model,
                           double y_next, const LagWindow& window) {
  return std::exp(log_gamma_factor(regime_index, model, y_next, window));
}

}  // namespace switchfit

#endif  // SWITCHFIT_MODEL_HPP
