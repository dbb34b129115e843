#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include "rowssl/numerics.hpp"

namespace rowssl::testing {

inline Vec random_vector(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (double& x : v) x = n(rng);
  return v;
}

inline Vec random_unit(std::size_t d, std::mt19937_64& rng) { return l2_normalize(random_vector(d, rng)); }

inline Matrix random_unit_rows(std::size_t rows, std::size_t d, std::mt19937_64& rng) {
  Matrix m(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vec u = random_unit(d, rng);
    std::copy(u.begin(), u.end(), m.row(r).begin());
  }
  return m;
}

// Central difference of f with respect to x[i], restoring x afterwards.
inline double central_difference(const std::function<double()>& f, double& x, double step = 1e-5) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

// |a - n| / max(|a|, |n|, floor). Central differences at step 1e-5 carry about
// 1e-10 of rounding noise, so entries below the floor are judged on that scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace rowssl::testing
