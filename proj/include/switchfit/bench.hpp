#ifndef SWITCHFIT_BENCH_HPP
#define SWITCHFIT_BENCH_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "switchfit/filters.hpp"
#include "switchfit/oracle.hpp"
#include "switchfit/simulator.hpp"

namespace switchfit {

struct BenchRow {
  std::size_t n_regimes{0};
  std::size_t ar_order{0};
  std::size_t length{0};
  double forward_only_macs_per_step{0.0};
  double forward_backward_macs_per_step{0.0};
  double forward_only_ms{0.0};
  double forward_backward_ms{0.0};

  double cost_ratio() const { return forward_only_macs_per_step / forward_backward_macs_per_step; }
};

/// Measures both E-steps on a simulated series for every (N, p) cell.
/// Operation counts are deterministic; wall times are not.
inline std::vector<BenchRow> run_bench(const std::vector<std::size_t>& states_grid,
                                       const std::vector<std::size_t>& order_grid, std::size_t length,
                                       std::uint64_t seed = 1) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };
  std::vector<BenchRow> rows;
  for (std::size_t n : states_grid) {
    for (std::size_t p : order_grid) {
      const SwitchingModel model = random_model(n, p, seed);
      const SimOutput sim = simulate(model, length, seed + 1);
      BenchRow row{n, p, length};
      auto start = Clock::now();
      const FilterState state = run_filter(model, sim.series);
      row.forward_only_ms = ms_since(start);
      start = Clock::now();
      const PosteriorStats post = baum_welch_estep(model, sim.series);
      row.forward_backward_ms = ms_since(start);
      row.forward_only_macs_per_step = static_cast<double>(state.macs()) / static_cast<double>(length);
      row.forward_backward_macs_per_step = static_cast<double>(post.macs) / static_cast<double>(length);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace switchfit

#endif  // SWITCHFIT_BENCH_HPP
