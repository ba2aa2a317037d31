#ifndef SWITCHFIT_FILTERS_HPP
#define SWITCHFIT_FILTERS_HPP

// Forward-only filters under the reference measure: every tracked statistic
// H is carried as the N-vector E_ref[Lambda_t H_t 1{X_t = i} | Y_t], so the
// posterior expectation of H at the final time is a ratio of component sums
// and no backward pass is needed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <utility>

#include "switchfit/model.hpp"
#include "switchfit/stats.hpp"

namespace switchfit {

using StatVector = Vector;

/// Column offsets of every tracked statistic inside FilterState's N x K block.
class StatLayout {
 public:
  StatLayout() = default;
  StatLayout(std::size_t n, std::size_t p)
      : n_(n), p_(p), tri_(p * (p + 1) / 2), per_regime_(1 + (p + 1) + tri_ + 1 + p) {}

  std::size_t n_regimes() const noexcept { return n_; }
  std::size_t ar_order() const noexcept { return p_; }
  /// Statistics owned by one source regime: occ, ta, tb (upper triangle), tc, td.
  std::size_t per_regime() const noexcept { return per_regime_; }
  std::size_t count() const noexcept { return n_ * n_ + n_ * per_regime_; }

  std::size_t jump(std::size_t r, std::size_t s) const noexcept { return r * n_ + s; }
  std::size_t regime_base(std::size_t r) const noexcept { return n_ * n_ + r * per_regime_; }
  std::size_t occ(std::size_t r) const noexcept { return regime_base(r); }
  /// j in -1..p-1.
  std::size_t ta(std::size_t r, int j) const noexcept {
    return regime_base(r) + 1 + static_cast<std::size_t>(j + 1);
  }
  std::size_t tb(std::size_t r, std::size_t i, std::size_t j) const noexcept {
    if (i > j) std::swap(i, j);
    // Row-major upper triangle.
    const std::size_t tri = i * p_ - i * (i - 1) / 2 + (j - i);
    return regime_base(r) + 2 + p_ + tri;
  }
  std::size_t tc(std::size_t r) const noexcept { return regime_base(r) + 2 + p_ + tri_; }
  std::size_t td(std::size_t r, std::size_t j) const noexcept { return tc(r) + 1 + j; }

 private:
  std::size_t n_{0};
  std::size_t p_{0};
  std::size_t tri_{0};
  std::size_t per_regime_{0};
};

/// Normalizer applied by one filter step, kept in log space because the
/// likelihood ratios can exceed the double range.
struct StepScale {
  double log_value{0.0};
  double value() const { return std::exp(log_value); }
};

class FilterState {
 public:
  FilterState() = default;

  std::size_t n_regimes() const noexcept { return layout_.n_regimes(); }
  std::size_t ar_order() const noexcept { return layout_.ar_order(); }
  const StatLayout& layout() const noexcept { return layout_; }

  /// State filter (statistic H = 1).
  const StatVector& q() const noexcept { return q_; }
  /// N x K block; column k is the StatVector of statistic k.
  const Matrix& stats() const noexcept { return stats_; }

  StatVector jump(std::size_t r, std::size_t s) const { return column(layout_.jump(r, s)); }
  StatVector occ(std::size_t r) const { return column(layout_.occ(r)); }
  StatVector ta(std::size_t r, int j) const { return column(layout_.ta(r, j)); }
  StatVector tb(std::size_t r, std::size_t i, std::size_t j) const { return column(layout_.tb(r, i, j)); }
  StatVector tc(std::size_t r) const { return column(layout_.tc(r)); }
  StatVector td(std::size_t r, std::size_t j) const { return column(layout_.td(r, j)); }

  double log_scale() const noexcept { return log_scale_; }
  const LagWindow& lag_buffer() const noexcept { return lag_buffer_; }
  std::size_t steps() const noexcept { return steps_; }
  /// Multiply-accumulate operations spent so far.
  std::uint64_t macs() const noexcept { return macs_; }

  /// Multiplies q and every statistic by c and compensates in log_scale.
  void rescale(double c) {
    detail::require(c > 0.0 && std::isfinite(c), "FilterState::rescale: factor must be positive");
    q_ *= c;
    stats_ *= c;
    log_scale_ -= std::log(c);
  }

 private:
  StatVector column(std::size_t k) const { return stats_.col(static_cast<Eigen::Index>(k)); }

  friend FilterState init_filter(const SwitchingModel&, const LagWindow&);
  friend StepScale step_and_normalize(FilterState&, const SwitchingModel&, double);

  StatLayout layout_;
  StatVector q_;
  Matrix stats_;
  double log_scale_{0.0};
  LagWindow lag_buffer_;
  std::size_t steps_{0};
  std::uint64_t macs_{0};
};

inline FilterState init_filter(const SwitchingModel& model, const LagWindow& conditioning_window) {
  detail::require(conditioning_window.size() == model.ar_order(),
                  "init_filter: conditioning window length must equal p");
  FilterState state;
  state.layout_ = StatLayout(model.n_regimes(), model.ar_order());
  state.q_ = model.initial_dist();
  state.stats_ = Matrix::Zero(static_cast<Eigen::Index>(model.n_regimes()),
                              static_cast<Eigen::Index>(state.layout_.count()));
  state.lag_buffer_ = conditioning_window;
  return state;
}

/// Injection terms of one statistic for a single step: alpha_hat[i],
/// delta_hat[i] are the filtered values of alpha_{t+1} 1{X_t = i} and
/// delta_{t+1} 1{X_t = i}; column i of beta_hat is the filtered vector
/// beta_{t+1} 1{X_t = i}.
struct GenericInjection {
  Vector alpha_hat;
  Matrix beta_hat;
  Vector delta_hat;

  static GenericInjection zeros(std::size_t n) {
    const auto ni = static_cast<Eigen::Index>(n);
    return {Vector::Zero(ni), Matrix::Zero(ni, ni), Vector::Zero(ni)};
  }
};

/// One step of the forward recursion for a scalar process
///   H_{t+1} = H_t + alpha_{t+1} + <beta_{t+1}, X_{t+1} - A X_t> + delta_{t+1} f(y_{t+1}),
/// mapping the filtered vector of H_t X_t to the unnormalized filtered vector
/// of H_{t+1} X_{t+1}. `gammas` are the per-regime likelihood ratios of
/// y_{t+1}, possibly all multiplied by a common positive constant.
inline StatVector step_generic(const StatVector& state_vec, const Vector& gammas,
                               const Matrix& transition, const GenericInjection& inj,
                               double f_value) {
  const auto n = transition.cols();
  detail::require(state_vec.size() == n && gammas.size() == n && inj.alpha_hat.size() == n &&
                      inj.delta_hat.size() == n && inj.beta_hat.rows() == n &&
                      inj.beta_hat.cols() == n,
                  "step_generic: all inputs must have N components");
  StatVector out = StatVector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a_i = transition.col(i);
    const double g = gammas[i];
    out += (state_vec[i] + inj.alpha_hat[i] + inj.delta_hat[i] * f_value) * g * a_i;
    // (diag(a_i) - a_i a_i^T) beta_hat_i
    const auto b = inj.beta_hat.col(i);
    out += g * (a_i.cwiseProduct(b) - a_i * a_i.dot(b));
  }
  return out;
}

namespace detail {

/// Per-regime likelihood ratios of y_next, divided by exp(shift) where shift
/// is the largest log-ratio among regimes with positive filter mass.
/// Returns false when no regime carries mass.
inline bool scaled_gammas(const SwitchingModel& model, const LagWindow& window, double y_next,
                          const Vector& q, Vector& gammas, double& shift) {
  const auto n = static_cast<Eigen::Index>(model.n_regimes());
  Vector log_g(n);
  shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    log_g[i] = log_gamma_factor(static_cast<std::size_t>(i), model, y_next, window);
    if (q[i] > 0.0) shift = std::max(shift, log_g[i]);
  }
  if (!std::isfinite(shift)) return false;
  gammas.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Regimes without mass only ever multiply zeros; cap them to stay finite.
    const double d = log_g[i] - shift;
    gammas[i] = std::exp(q[i] > 0.0 ? d : std::min(d, 0.0));
  }
  return true;
}

}  // namespace detail

/// Advances every tracked statistic by one emission and renormalizes so that
/// q sums to one. Updates use the pre-step q and lag buffer; the buffer then
/// shifts in y_next.
inline StepScale step_and_normalize(FilterState& state, const SwitchingModel& model, double y_next) {
  const auto& layout = state.layout_;
  detail::require(model.n_regimes() == layout.n_regimes() && model.ar_order() == layout.ar_order(),
                  "step_and_normalize: model does not match the filter layout");
  const std::size_t n = layout.n_regimes();
  const std::size_t p = layout.ar_order();
  const auto ni = static_cast<Eigen::Index>(n);
  const auto k_count = static_cast<Eigen::Index>(layout.count());
  const Matrix& a = model.transition();
  const Vector& lags = state.lag_buffer_.lags;

  Vector gammas;
  double shift = 0.0;
  if (!detail::scaled_gammas(model, state.lag_buffer_, y_next, state.q_, gammas, shift)) {
    throw NumericalDegeneracy("filter lost all probability mass", state.steps_ + 1);
  }

  const Vector weights = state.q_.cwiseProduct(gammas);
  Vector q_next = a * weights;
  Matrix stats_next = a * (gammas.asDiagonal() * state.stats_);

  // Per-regime injection coefficients multiplying weights[r] * a_r.
  Vector coef(static_cast<Eigen::Index>(layout.per_regime()));
  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double w = weights[ri];
    for (std::size_t s = 0; s < n; ++s) {
      const auto si = static_cast<Eigen::Index>(s);
      stats_next(si, static_cast<Eigen::Index>(layout.jump(r, s))) += w * a(si, ri);
    }
    const std::size_t base = layout.regime_base(r);
    coef[static_cast<Eigen::Index>(layout.occ(r) - base)] = 1.0;
    coef[static_cast<Eigen::Index>(layout.ta(r, -1) - base)] = y_next * y_next;
    for (std::size_t j = 0; j < p; ++j) {
      const double lag_j = lags[static_cast<Eigen::Index>(j)];
      coef[static_cast<Eigen::Index>(layout.ta(r, static_cast<int>(j)) - base)] = lag_j * y_next;
      coef[static_cast<Eigen::Index>(layout.td(r, j) - base)] = lag_j;
      for (std::size_t i = j; i < p; ++i) {
        coef[static_cast<Eigen::Index>(layout.tb(r, j, i) - base)] =
            lag_j * lags[static_cast<Eigen::Index>(i)];
      }
    }
    coef[static_cast<Eigen::Index>(layout.tc(r) - base)] = y_next;
    stats_next.middleCols(static_cast<Eigen::Index>(base), coef.size()).noalias() +=
        (w * a.col(ri)) * coef.transpose();
  }

  const double scale = q_next.sum();
  if (!(scale > 0.0) || !std::isfinite(scale) || !stats_next.allFinite()) {
    throw NumericalDegeneracy("filter normalizer vanished or overflowed", state.steps_ + 1);
  }
  state.q_ = q_next / scale;
  state.stats_ = stats_next / scale;
  const double log_increment = std::log(scale) + shift;
  state.log_scale_ += log_increment;
  state.lag_buffer_ = state.lag_buffer_.shifted(y_next);
  ++state.steps_;

  const auto nn = static_cast<std::uint64_t>(ni);
  const auto kk = static_cast<std::uint64_t>(k_count);
  state.macs_ += nn * nn                                  // q propagation
                 + kk * nn + kk * nn * nn                 // statistic propagation
                 + nn * nn + nn * layout.per_regime() * nn  // injections
                 + (kk + 1) * nn;                         // normalization
  return StepScale{log_increment};
}

inline SufficientStats finalize(const FilterState& state) {
  detail::require(state.steps() >= 1, "finalize: at least one emission must be processed");
  const auto& layout = state.layout();
  const std::size_t n = layout.n_regimes();
  const std::size_t p = layout.ar_order();
  const double total = state.q().sum();
  const Eigen::RowVectorXd sums = state.stats().colwise().sum() / total;
  auto at = [&](std::size_t k) { return sums[static_cast<Eigen::Index>(k)]; };

  SufficientStats out = SufficientStats::zeros(n, p, state.steps());
  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t s = 0; s < n; ++s) out.jump_hat(ri, static_cast<Eigen::Index>(s)) = at(layout.jump(r, s));
    out.occ_hat[ri] = at(layout.occ(r));
    out.tc_hat[ri] = at(layout.tc(r));
    for (int j = -1; j < static_cast<int>(p); ++j) out.ta_hat(ri, j + 1) = at(layout.ta(r, j));
    for (std::size_t j = 0; j < p; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      out.td_hat(ri, ji) = at(layout.td(r, j));
      for (std::size_t i = 0; i < p; ++i) {
        out.tb_hat[r](static_cast<Eigen::Index>(i), ji) = at(layout.tb(r, i, j));
      }
    }
  }
  return out;
}

/// Conditional log-likelihood of the emissions given the conditioning window.
inline double log_likelihood(const FilterState& state, const ObservationSeries& series) {
  detail::require(state.steps() == series.length(),
                  "log_likelihood: filter must have processed exactly the series emissions");
  double reference = 0.0;
  for (std::size_t l = 1; l <= series.length(); ++l) reference += log_std_normal_pdf(series.emission(l));
  return state.log_scale() + std::log(state.q().sum()) + reference;
}

/// Runs the filter over every emission of `series`. When `trace` is given,
/// writes one CSV row per step: step, scale, q_1..q_N.
inline FilterState run_filter(const SwitchingModel& model, const ObservationSeries& series,
                              std::ostream* trace = nullptr) {
  detail::require(series.conditioning_len() == model.ar_order(),
                  "run_filter: series conditioning window must equal p");
  FilterState state = init_filter(model, series.conditioning_window());
  if (trace != nullptr) {
    *trace << "step,scale";
    for (std::size_t i = 1; i <= model.n_regimes(); ++i) *trace << ",q_" << i;
    *trace << '\n';
  }
  for (std::size_t l = 1; l <= series.length(); ++l) {
    const StepScale scale = step_and_normalize(state, model, series.emission(l));
    if (trace != nullptr) {
      *trace << l << ',' << scale.value();
      for (Eigen::Index i = 0; i < state.q().size(); ++i) *trace << ',' << state.q()[i];
      *trace << '\n';
    }
  }
  return state;
}

/// Regime-and-window dependent coefficients of a scalar process driven by
/// step_generic. Every coefficient may depend on the regime at time t and on
/// the lag window (y_t, ..., y_{t-p+1}); empty functions contribute zero.
struct ScalarProcess {
  std::function<double(std::size_t regime)> initial;
  std::function<double(std::size_t regime, const LagWindow&)> alpha;
  std::function<Vector(std::size_t regime, const LagWindow&)> beta;
  std::function<double(std::size_t regime, const LagWindow&)> delta;
  std::function<double(double y)> f;
};

/// Forward filter for a single ScalarProcess alongside the state filter.
class ProcessFilter {
 public:
  ProcessFilter(const SwitchingModel& model, ScalarProcess process, const LagWindow& window)
      : model_(&model), process_(std::move(process)), q_(model.initial_dist()), lag_buffer_(window) {
    detail::require(window.size() == model.ar_order(), "ProcessFilter: window length must equal p");
    const auto n = static_cast<Eigen::Index>(model.n_regimes());
    v_ = StatVector::Zero(n);
    if (process_.initial) {
      for (Eigen::Index i = 0; i < n; ++i) v_[i] = q_[i] * process_.initial(static_cast<std::size_t>(i));
    }
  }

  void step(double y_next) {
    const std::size_t n = model_->n_regimes();
    Vector gammas;
    double shift = 0.0;
    if (!detail::scaled_gammas(*model_, lag_buffer_, y_next, q_, gammas, shift)) {
      throw NumericalDegeneracy("process filter lost all probability mass", steps_ + 1);
    }
    GenericInjection inj = GenericInjection::zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (process_.alpha) inj.alpha_hat[ii] = q_[ii] * process_.alpha(i, lag_buffer_);
      if (process_.delta) inj.delta_hat[ii] = q_[ii] * process_.delta(i, lag_buffer_);
      if (process_.beta) inj.beta_hat.col(ii) = q_[ii] * process_.beta(i, lag_buffer_);
    }
    const double f_value = process_.f ? process_.f(y_next) : 0.0;
    const Matrix& a = model_->transition();
    const Vector q_next = a * q_.cwiseProduct(gammas);
    const StatVector v_next = step_generic(v_, gammas, a, inj, f_value);
    const double scale = q_next.sum();
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw NumericalDegeneracy("process filter normalizer vanished", steps_ + 1);
    }
    q_ = q_next / scale;
    v_ = v_next / scale;
    lag_buffer_ = lag_buffer_.shifted(y_next);
    ++steps_;
  }

  /// Posterior mean of H at the current time.
  double expectation() const { return v_.sum() / q_.sum(); }
  const StatVector& filtered() const noexcept { return v_; }
  const StatVector& q() const noexcept { return q_; }

 private:
  const SwitchingModel* model_;
  ScalarProcess process_;
  StatVector q_;
  StatVector v_;
  LagWindow lag_buffer_;
  std::size_t steps_{0};
};

}  // namespace switchfit

#endif  // SWITCHFIT_FILTERS_HPP
