#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "fpo/error.hpp"
#include "fpo/rng.hpp"

namespace fpo {

template <class Objective>
GradCheckReport finite_difference_check(std::vector<double> params,
                                        std::span<const double> analytic, Objective&& objective,
                                        double h, int coords, std::uint64_t seed) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw PreconditionError("gradient check step must be in [1e-7, 1e-3]");
  if (coords < 1) throw PreconditionError("gradient check needs at least one coordinate");
  if (analytic.size() != params.size()) throw InternalError("gradient size mismatch");

  // Distinct coordinates when possible: partial Fisher-Yates over indices.
  std::vector<std::size_t> order(params.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(coords), order.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i),
                                                  static_cast<std::int64_t>(order.size() - 1)));
    std::swap(order[i], order[j]);
  }

  GradCheckReport report;
  report.coords_checked = n;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t c = order[k];
    const double saved = params[c];
    params[c] = saved + h;
    const double up = objective(std::as_const(params));
    params[c] = saved - h;
    const double down = objective(std::as_const(params));
    params[c] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(analytic[c], numeric);
    if (k == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coord = c;
      report.analytic = analytic[c];
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace fpo
