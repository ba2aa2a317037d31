#ifndef SWITCHFIT_STATS_HPP
#define SWITCHFIT_STATS_HPP

#include <cstddef>
#include <vector>

#include "switchfit/model.hpp"

namespace switchfit {

/// Posterior expectations of the EM sufficient statistics given the whole
/// series. With l running over the emissions 1..T and r the regime driving
/// emission l (the regime at time l-1):
///
///   jump_hat(r, s)  expected transitions r -> s (T transitions in total)
///   occ_hat[r]      expected number of emissions driven by r
///   ta(r, -1)       sum of w_r y_l^2
///   ta(r, j)        sum of w_r y_{l-1-j} y_l,    j = 0..p-1
///   tb_hat[r](i,j)  sum of w_r y_{l-1-i} y_{l-1-j}
///   tc_hat[r]       sum of w_r y_l
///   td_hat(r, j)    sum of w_r y_{l-1-j}
struct SufficientStats {
  Matrix jump_hat;
  Vector occ_hat;
  Matrix ta_hat;              // N x (p+1); column 0 holds j = -1
  std::vector<Matrix> tb_hat;  // N blocks of p x p, symmetric
  Vector tc_hat;
  Matrix td_hat;              // N x p
  std::size_t t_emissions{0};

  static SufficientStats zeros(std::size_t n, std::size_t p, std::size_t t_emissions = 0) {
    const auto ni = static_cast<Eigen::Index>(n);
    const auto pi = static_cast<Eigen::Index>(p);
    SufficientStats s;
    s.jump_hat = Matrix::Zero(ni, ni);
    s.occ_hat = Vector::Zero(ni);
    s.ta_hat = Matrix::Zero(ni, pi + 1);
    s.tb_hat.assign(n, Matrix::Zero(pi, pi));
    s.tc_hat = Vector::Zero(ni);
    s.td_hat = Matrix::Zero(ni, pi);
    s.t_emissions = t_emissions;
    return s;
  }

  std::size_t n_regimes() const noexcept { return static_cast<std::size_t>(occ_hat.size()); }
  std::size_t ar_order() const noexcept { return static_cast<std::size_t>(td_hat.cols()); }

  double ta(std::size_t r, int j) const {
    return ta_hat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1));
  }

  /// Weighted normal-equation matrix sum_l w_r psi psi^T, psi = (1, lags).
  Matrix design_matrix(std::size_t r) const {
    const auto p = static_cast<Eigen::Index>(ar_order());
    const auto ri = static_cast<Eigen::Index>(r);
    Matrix design(p + 1, p + 1);
    design(0, 0) = occ_hat[ri];
    for (Eigen::Index j = 0; j < p; ++j) {
      design(0, j + 1) = td_hat(ri, j);
      design(j + 1, 0) = td_hat(ri, j);
    }
    design.bottomRightCorner(p, p) = tb_hat[r];
    return design;
  }

  /// Weighted right-hand side sum_l w_r psi y_l.
  Vector moment_vector(std::size_t r) const {
    const auto p = static_cast<Eigen::Index>(ar_order());
    const auto ri = static_cast<Eigen::Index>(r);
    Vector moments(p + 1);
    moments[0] = tc_hat[ri];
    for (Eigen::Index j = 0; j < p; ++j) moments[j + 1] = ta_hat(ri, j + 1);
    return moments;
  }

  SufficientStats scaled(double c) const {
    SufficientStats s = *this;
    s.jump_hat *= c;
    s.occ_hat *= c;
    s.ta_hat *= c;
    for (auto& b : s.tb_hat) b *= c;
    s.tc_hat *= c;
    s.td_hat *= c;
    return s;
  }
};

}  // namespace switchfit

#endif  // SWITCHFIT_STATS_HPP
