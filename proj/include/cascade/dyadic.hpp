// Copyright 2026 The cascade-compiler Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Exact dyadic digit and residual arithmetic on [0,1] and [0,1]^2.
//
// The one-dimensional step is t |-> (Q_1(t), r(t)) with Q_1(t) = floor(2t)
// and r(t) = 2t - Q_1(t), with the sticky endpoint convention Q_1(1) = 1,
// r(1) = 1 (so the right endpoint is a fixed point of the dynamics rather
// than wrapping to 0). Residuals are computed by exact rational arithmetic,
// never by bit extraction, so non-dyadic rationals (e.g. 1/3) iterate
// exactly.

#ifndef CASCADE_DYADIC_HPP
#define CASCADE_DYADIC_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cascade/rational.hpp"

namespace cascade {
namespace dyadic {

using Point = std::pair<Rational, Rational>;

// One step of the doubling map with the sticky endpoint: returns (digit,
// residual).
inline std::pair<int, Rational> step(const Rational& t) {
  if (t.sign() < 0 || t > Rational(1)) {
    throw DomainError("dyadic step: input outside [0,1]: " + t.str());
  }
  if (t == Rational(1)) return {1, Rational(1)};
  const Rational two_t = Rational(2) * t;
  const std::int64_t q = two_t.floor();  // 0 or 1 since t in [0,1)
  return {static_cast<int>(q), two_t - Rational(q)};
}

// Digits Q_1..Q_n and terminal residual r^n(t).
inline std::pair<std::vector<int>, Rational> residual_digits(const Rational& t,
                                                             unsigned n) {
  std::vector<int> digits;
  digits.reserve(n);
  Rational r = t;
  for (unsigned j = 0; j < n; ++j) {
    auto [q, rn] = step(r);
    digits.push_back(q);
    r = rn;
  }
  return {std::move(digits), std::move(r)};
}

// Orbit of a point of the closed unit square under the coordinatewise
// residual map, with the full per-stage history.
struct DyadicOrbit {
  std::vector<std::pair<int, int>> digits;  // Q_1..Q_n
  std::vector<Point> residuals;             // R_0..R_{n-1}
  Point terminal;                           // R_n
};

inline DyadicOrbit orbit_2d(const Point& p, unsigned n) {
  DyadicOrbit orbit;
  orbit.digits.reserve(n);
  orbit.residuals.reserve(n);
  Point r = p;
  for (unsigned j = 0; j < n; ++j) {
    orbit.residuals.push_back(r);
    auto [qx, rx] = step(r.first);
    auto [qy, ry] = step(r.second);
    orbit.digits.emplace_back(qx, qy);
    r = {std::move(rx), std::move(ry)};
  }
  orbit.terminal = std::move(r);
  return orbit;
}

// R_n directly: for points interior to a level-n dyadic square this equals
// the affine form 2^n p - m; the sticky convention extends it to the closed
// square.
inline Point residual_n(const Point& p, unsigned n) {
  return orbit_2d(p, n).terminal;
}

// The transition set J_n = [0, delta_n] union [1/2, 1/2 + delta_n].
inline bool in_transition_set(const Rational& t, const Rational& delta_n) {
  const Rational half(1, 2);
  return (t.sign() >= 0 && t <= delta_n) ||
         (t >= half && t <= half + delta_n);
}

// Smallest stage j in {1..n} whose (j-1)-stage residual has a coordinate in
// J_n; absent if the whole orbit avoids the transition set.
inline std::optional<unsigned> bad_orbit_stage(const Point& p, unsigned n,
                                               const Rational& delta_n) {
  if (delta_n.sign() <= 0) throw DomainError("bad_orbit_stage: delta_n <= 0");
  const DyadicOrbit orbit = orbit_2d(p, n);
  for (unsigned j = 1; j <= n; ++j) {
    const Point& r = orbit.residuals[j - 1];
    if (in_transition_set(r.first, delta_n) ||
        in_transition_set(r.second, delta_n)) {
      return j;
    }
  }
  return std::nullopt;
}

}  // namespace dyadic
}  // namespace cascade

#endif  // CASCADE_DYADIC_HPP
