#ifndef SWITCHFIT_EM_HPP
#define SWITCHFIT_EM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "switchfit/filters.hpp"
#include "switchfit/model.hpp"
#include "switchfit/oracle.hpp"
#include "switchfit/random.hpp"
#include "switchfit/stats.hpp"

namespace switchfit {

enum class EStepAlgorithm { forward_only, baum_welch };

inline const char* to_string(EStepAlgorithm algo) {
  return algo == EStepAlgorithm::forward_only ? "forward-only" : "baum-welch";
}

/// Settings of one EM run. The initial regime law is never re-estimated: it
/// stays at the value chosen by init_params (uniform).
struct FitConfig {
  std::size_t max_iter{500};
  /// Stop when |logL_k - logL_{k-1}| / (1 + |logL_k|) < rel_tol.
  double rel_tol{1e-9};
  std::uint64_t seed{0};
  double sigma_floor{kDefaultSigmaFloor};
  /// Ridge weight used when a normal-equation matrix is ill-conditioned.
  double ridge_eps{1e-8};
  EStepAlgorithm algo{EStepAlgorithm::forward_only};
};

struct FitWarning {
  std::string tag;
  std::string message;

  friend bool operator==(const FitWarning&, const FitWarning&) = default;
};

struct FitReport {
  SwitchingModel model;
  std::vector<double> loglik_trace;
  bool converged{false};
  std::size_t iterations{0};
  std::vector<FitWarning> warnings;
  /// Set when estimation stopped on a numerical or estimation degeneracy;
  /// the trace then holds every completed iteration.
  std::optional<std::string> failure;
};

inline constexpr double kIllConditioned = 1e12;
inline constexpr double kStarvedOccupancy = 1e-10;
inline constexpr double kMonotoneSlack = 1e-8;

namespace detail {

inline void warn(std::vector<FitWarning>* warnings, std::string tag, std::string message) {
  if (warnings == nullptr) return;
  FitWarning w{std::move(tag), std::move(message)};
  if (std::find(warnings->begin(), warnings->end(), w) == warnings->end()) warnings->push_back(std::move(w));
}

}  // namespace detail

struct EStepResult {
  SufficientStats stats;
  double loglik{0.0};
};

inline EStepResult e_step(const SwitchingModel& model, const ObservationSeries& series,
                          EStepAlgorithm algo = EStepAlgorithm::forward_only) {
  if (algo == EStepAlgorithm::baum_welch) {
    PosteriorStats post = baum_welch_estep(model, series);
    return {std::move(post.stats), post.loglik};
  }
  const FilterState state = run_filter(model, series);
  return {finalize(state), log_likelihood(state, series)};
}

/// New column-stochastic transition matrix: column r is the expected
/// transitions out of r normalized by the expected departures from r. A
/// column whose departure mass is zero keeps its previous value.
inline Matrix m_step_transition(const SufficientStats& stats, const Matrix& previous,
                                std::vector<FitWarning>* warnings = nullptr) {
  const auto n = static_cast<Eigen::Index>(stats.n_regimes());
  detail::require(previous.rows() == n && previous.cols() == n, "m_step_transition: previous must be N x N");
  if (!(stats.jump_hat.sum() > 0.0)) throw EstimationDegenerate("expected jump counts are all zero");
  Matrix out = previous;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double departures = stats.jump_hat.row(r).sum();
    if (departures > 0.0 && std::isfinite(departures)) {
      out.col(r) = stats.jump_hat.row(r).transpose() / departures;
    } else {
      detail::warn(warnings, "column_retained",
                   "regime " + std::to_string(r + 1) + " has no expected departures; transition column kept");
    }
  }
  return out;
}

/// Weighted least-squares coefficients of regime r, solving
/// design_matrix(r) theta = moment_vector(r). Ill-conditioned systems get a
/// ridge of ridge_eps * trace / (p + 1); starved or singular systems keep
/// `previous`.
inline Vector m_step_regression(const SufficientStats& stats, std::size_t r, const Vector& previous,
                                double ridge_eps = 1e-8, std::vector<FitWarning>* warnings = nullptr) {
  const auto dim = static_cast<Eigen::Index>(stats.ar_order() + 1);
  detail::require(previous.size() == dim, "m_step_regression: previous theta has wrong length");
  const std::string who = "regime " + std::to_string(r + 1);
  if (!(stats.occ_hat[static_cast<Eigen::Index>(r)] > kStarvedOccupancy)) {
    detail::warn(warnings, "theta_retained", who + " has no expected occupancy; coefficients kept");
    return previous;
  }
  Matrix design = stats.design_matrix(r);
  const Vector moments = stats.moment_vector(r);
  if (!design.allFinite() || !moments.allFinite()) {
    detail::warn(warnings, "theta_retained", who + " normal equations are not finite; coefficients kept");
    return previous;
  }
  auto condition = [](const Matrix& m) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  };
  if (condition(design) > kIllConditioned) {
    const double lambda = ridge_eps * design.trace() / static_cast<double>(dim);
    design.diagonal().array() += lambda;
    detail::warn(warnings, "ridge_applied", who + " normal equations ill-conditioned; ridge applied");
    if (!(condition(design) < 1.0 / std::numeric_limits<double>::epsilon())) {
      detail::warn(warnings, "theta_retained", who + " normal equations singular; coefficients kept");
      return previous;
    }
  }
  const Vector theta = design.ldlt().solve(moments);
  if (!theta.allFinite()) {
    detail::warn(warnings, "theta_retained", who + " solve failed; coefficients kept");
    return previous;
  }
  return theta;
}

/// Weighted mean squared residual of regime r for coefficients theta,
/// floored at sigma_floor^2. Starved regimes keep previous_variance.
inline double m_step_variance(const SufficientStats& stats, std::size_t r, const Vector& theta,
                              double sigma_floor, double previous_variance,
                              std::vector<FitWarning>* warnings = nullptr) {
  const double occ = stats.occ_hat[static_cast<Eigen::Index>(r)];
  const std::string who = "regime " + std::to_string(r + 1);
  if (!(occ > kStarvedOccupancy)) {
    detail::warn(warnings, "sigma_retained", who + " has no expected occupancy; sigma kept");
    return previous_variance;
  }
  const Matrix design = stats.design_matrix(r);
  const Vector moments = stats.moment_vector(r);
  const double raw = (stats.ta(r, -1) + theta.dot(design * theta) - 2.0 * theta.dot(moments)) / occ;
  const double floor2 = sigma_floor * sigma_floor;
  if (!(raw >= floor2)) {
    detail::warn(warnings, "sigma_floored", who + " variance fell below the floor");
    return floor2;
  }
  return raw;
}

/// Full M-step: transitions, then coefficients and variance of each regime.
/// The initial law is carried over unchanged.
inline SwitchingModel m_step(const SufficientStats& stats, const SwitchingModel& previous,
                             const FitConfig& config, std::vector<FitWarning>* warnings = nullptr) {
  Matrix transition = m_step_transition(stats, previous.transition(), warnings);
  std::vector<RegimeParams> regimes;
  regimes.reserve(previous.n_regimes());
  for (std::size_t r = 0; r < previous.n_regimes(); ++r) {
    const auto& prev = previous.regime(r);
    Vector theta = m_step_regression(stats, r, prev.coeffs(), config.ridge_eps, warnings);
    const double var = m_step_variance(stats, r, theta, config.sigma_floor, prev.sigma() * prev.sigma(), warnings);
    regimes.emplace_back(std::move(theta), std::sqrt(var), config.sigma_floor);
  }
  return SwitchingModel(std::move(transition), std::move(regimes), previous.initial_dist());
}

/// Ordinary least squares of y_l on (1, y_{l-1}, ..., y_{l-p}) over all emissions.
struct OlsFit {
  Vector coeffs;
  double residual_variance{0.0};
};

inline OlsFit ols_fit(const ObservationSeries& series) {
  const std::size_t p = series.conditioning_len();
  const std::size_t t = series.length();
  Matrix design(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(p + 1));
  Vector target(static_cast<Eigen::Index>(t));
  for (std::size_t l = 1; l <= t; ++l) {
    const auto row = static_cast<Eigen::Index>(l - 1);
    design(row, 0) = 1.0;
    design.row(row).tail(static_cast<Eigen::Index>(p)) = series.window_before(l).lags.transpose();
    target[row] = series.emission(l);
  }
  OlsFit fit;
  fit.coeffs = design.colPivHouseholderQr().solve(target);
  fit.residual_variance = (target - design * fit.coeffs).squaredNorm() / static_cast<double>(t);
  return fit;
}

/// Deterministic starting point: uniform transition columns perturbed by at
/// most 5% and renormalized; per-regime coefficients equal to the global OLS
/// fit plus N(0, (0.1 (|c| + 0.1))^2) jitter; sigma equal to the OLS residual
/// scale; uniform initial law. With N = 1 nothing is perturbed.
inline SwitchingModel init_params(const ObservationSeries& series, std::size_t n, std::size_t p,
                                  std::uint64_t seed, double sigma_floor = kDefaultSigmaFloor) {
  detail::require(n >= 1, "init_params: need at least one regime");
  detail::require(series.conditioning_len() == p, "init_params: series conditioning window must equal p");
  const OlsFit ols = ols_fit(series);
  const double sigma = std::max(std::sqrt(ols.residual_variance), sigma_floor);
  const auto ni = static_cast<Eigen::Index>(n);
  const Vector uniform_law = Vector::Constant(ni, 1.0 / static_cast<double>(n));
  if (n == 1) {
    return SwitchingModel(Matrix::Ones(1, 1), {RegimeParams(ols.coeffs, sigma, sigma_floor)}, uniform_law);
  }
  PortableRng rng(seed);
  Matrix a(ni, ni);
  for (Eigen::Index j = 0; j < ni; ++j) {
    for (Eigen::Index i = 0; i < ni; ++i) {
      a(i, j) = (1.0 + 0.05 * (2.0 * rng.uniform() - 1.0)) / static_cast<double>(n);
    }
    a.col(j) /= a.col(j).sum();
  }
  std::vector<RegimeParams> regimes;
  for (std::size_t r = 0; r < n; ++r) {
    Vector coeffs = ols.coeffs;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
      coeffs[k] += 0.1 * (std::abs(ols.coeffs[k]) + 0.1) * rng.normal();
    }
    regimes.emplace_back(std::move(coeffs), sigma, sigma_floor);
  }
  return SwitchingModel(std::move(a), std::move(regimes), uniform_law);
}

/// Relabels regimes by increasing intercept, ties broken by sigma.
inline SwitchingModel sort_regimes(const SwitchingModel& model) {
  const std::size_t n = model.n_regimes();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& rx = model.regime(x);
    const auto& ry = model.regime(y);
    if (rx.intercept() != ry.intercept()) return rx.intercept() < ry.intercept();
    return rx.sigma() < ry.sigma();
  });
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix a(ni, ni);
  Vector pi(ni);
  std::vector<RegimeParams> regimes;
  for (std::size_t k = 0; k < n; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    pi[ki] = model.initial_dist()[static_cast<Eigen::Index>(order[k])];
    regimes.push_back(model.regime(order[k]));
    for (std::size_t m = 0; m < n; ++m) {
      a(ki, static_cast<Eigen::Index>(m)) =
          model.transition()(static_cast<Eigen::Index>(order[k]), static_cast<Eigen::Index>(order[m]));
    }
  }
  return SwitchingModel(std::move(a), std::move(regimes), std::move(pi));
}

/// EM from a given starting model. Iteration k runs one E-step and, unless
/// the log-likelihood has converged against iteration k-1, one M-step. If the
/// loop ends on max_iter, a final E-step scores the last model so the trace
/// always ends with the log-likelihood of the reported model.
inline FitReport fit_from(const ObservationSeries& series, SwitchingModel start, const FitConfig& config) {
  detail::require(config.max_iter >= 1, "fit: max_iter must be at least 1");
  detail::require(config.rel_tol > 0.0, "fit: rel_tol must be positive");
  FitReport report;
  SwitchingModel model = std::move(start);
  std::size_t current = 0;
  try {
    for (std::size_t k = 1; k <= config.max_iter; ++k) {
      current = k;
      EStepResult e = e_step(model, series, config.algo);
      report.loglik_trace.push_back(e.loglik);
      report.iterations = k;
      if (k >= 2) {
        const double prev = report.loglik_trace[k - 2];
        if (std::abs(e.loglik - prev) / (1.0 + std::abs(e.loglik)) < config.rel_tol) {
          report.converged = true;
          break;
        }
      }
      model = m_step(e.stats, model, config, &report.warnings);
    }
    if (!report.converged) {
      current = config.max_iter + 1;
      report.loglik_trace.push_back(e_step(model, series, config.algo).loglik);
    }
  } catch (const NumericalDegeneracy& err) {
    report.failure = "numerical degeneracy at iteration " + std::to_string(current) + ": " + err.what();
  } catch (const EstimationDegenerate& err) {
    report.failure = "estimation degenerate at iteration " + std::to_string(current) + ": " + err.what();
  }
  for (std::size_t k = 1; k < report.loglik_trace.size(); ++k) {
    if (report.loglik_trace[k] < report.loglik_trace[k - 1] - kMonotoneSlack) {
      detail::warn(&report.warnings, "loglik_decrease",
                   "log-likelihood decreased after iteration " + std::to_string(k));
    }
  }
  report.model = sort_regimes(model);
  return report;
}

inline FitReport fit(const ObservationSeries& series, std::size_t n, std::size_t p, const FitConfig& config) {
  detail::require(n >= 1, "fit: need at least one regime");
  detail::require(series.conditioning_len() == p, "fit: series conditioning window must equal p");
  detail::require(series.length() >= 2, "fit: need at least two emissions");
  return fit_from(series, init_params(series, n, p, config.seed, config.sigma_floor), config);
}

}  // namespace switchfit

#endif  // SWITCHFIT_EM_HPP
