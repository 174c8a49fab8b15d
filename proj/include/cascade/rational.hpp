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

#ifndef CASCADE_RATIONAL_HPP
#define CASCADE_RATIONAL_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>

namespace cascade {

using BigInt = boost::multiprecision::cpp_int;

// Thrown on malformed textual input ("p/q" strings, JSON layout, ...).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on contract violations (dimension mismatches, bad preconditions).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

using int128 = __int128;
using uint128 = unsigned __int128;

inline uint128 uabs128(int128 v) {
  return v < 0 ? uint128(0) - uint128(v) : uint128(v);
}

// Binary GCD on uint64; gcd(0, b) = b.
inline std::uint64_t gcd_u64(std::uint64_t a, std::uint64_t b) {
  if (a == 0) return b;
  if (b == 0) return a;
  int sa = __builtin_ctzll(a);
  int sb = __builtin_ctzll(b);
  int shift = sa < sb ? sa : sb;
  a >>= sa;
  while (b != 0) {
    b >>= __builtin_ctzll(b);
    if (a > b) std::swap(a, b);
    b -= a;
  }
  return a << shift;
}

constexpr std::int64_t kI64Max = std::numeric_limits<std::int64_t>::max();

inline bool fits_i64(int128 v) {
  return v >= -int128(kI64Max) && v <= int128(kI64Max);
}

// |v| as uint64, safe for INT64_MIN (two's complement).
inline std::uint64_t uabs64(std::int64_t v) {
  return v < 0 ? ~static_cast<std::uint64_t>(v) + 1
               : static_cast<std::uint64_t>(v);
}

// Strict base-10 integer: optional leading '-', then digits only. Leading
// zeros are stripped before handing to cpp_int (whose own string parser
// would treat them as a base prefix).
inline BigInt parse_bigint_strict(const std::string& text) {
  std::size_t i = 0;
  const bool neg = !text.empty() && text[0] == '-';
  if (neg) i = 1;
  if (i >= text.size()) throw std::runtime_error("missing digits");
  for (std::size_t k = i; k < text.size(); ++k) {
    if (text[k] < '0' || text[k] > '9') {
      throw std::runtime_error("non-digit character");
    }
  }
  while (i + 1 < text.size() && text[i] == '0') ++i;
  BigInt v(text.substr(i));
  return neg ? BigInt(-v) : v;
}

}  // namespace detail

// Exact rational number, always stored in lowest terms with positive
// denominator; arithmetic never rounds. Small values (|num|, den fitting
// int64) live inline; anything larger is promoted to a shared
// arbitrary-precision pair and demoted back as soon as it fits again, so
// equal values always have identical representations (this makes equality
// and hashing structural).
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t v) : n_(v), d_(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t num, std::int64_t den) { assign_small(num, den); }
  Rational(const BigInt& num, const BigInt& den) { assign_big(num, den); }

  // Parses "p/q" or "p", base 10, optional leading '-'; q must be nonzero.
  static Rational parse(const std::string& text) {
    try {
      const auto slash = text.find('/');
      if (slash == std::string::npos) {
        return Rational(detail::parse_bigint_strict(text), BigInt(1));
      }
      BigInt num = detail::parse_bigint_strict(text.substr(0, slash));
      BigInt den = detail::parse_bigint_strict(text.substr(slash + 1));
      if (den == 0) throw std::runtime_error("zero denominator");
      return Rational(num, den);
    } catch (const std::runtime_error& e) {
      throw ParseError("bad rational \"" + text + "\": " + e.what());
    }
  }

  bool is_big() const { return big_ != nullptr; }
  bool is_zero() const { return !is_big() && n_ == 0; }
  bool is_one() const { return !is_big() && n_ == 1 && d_ == 1; }

  int sign() const {
    if (!is_big()) return n_ > 0 ? 1 : (n_ < 0 ? -1 : 0);
    return bnum() > 0 ? 1 : -1;  // big zero is impossible (0 always fits)
  }

  BigInt num() const { return is_big() ? bnum() : BigInt(n_); }
  BigInt den() const { return is_big() ? bden() : BigInt(d_); }
  std::int64_t small_num() const { return n_; }
  std::int64_t small_den() const { return d_; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    if (!a.is_big() && !b.is_big()) {
      if (a.n_ == 0) return b;
      if (b.n_ == 0) return a;
      Rational r;
      if (r.add_small(a, b)) return r;
    }
    return Rational(a.num() * b.den() + b.num() * a.den(), a.den() * b.den());
  }

  friend Rational operator-(const Rational& a, const Rational& b) {
    return a + (-b);
  }

  Rational operator-() const {
    if (!is_big()) {
      Rational r;
      r.n_ = -n_;
      r.d_ = d_;
      return r;
    }
    return Rational(-bnum(), bden());
  }

  friend Rational operator*(const Rational& a, const Rational& b) {
    if (!a.is_big() && !b.is_big()) {
      if (a.n_ == 0 || b.n_ == 0) return Rational();
      if (a.n_ == 1 && a.d_ == 1) return b;
      if (b.n_ == 1 && b.d_ == 1) return a;
      Rational r;
      if (r.mul_small(a, b)) return r;
    }
    return Rational(a.num() * b.num(), a.den() * b.den());
  }

  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.is_zero()) throw DomainError("rational division by zero");
    return a * b.reciprocal();
  }

  Rational reciprocal() const {
    if (is_zero()) throw DomainError("reciprocal of zero");
    if (!is_big()) {
      Rational r;
      r.n_ = n_ < 0 ? -d_ : d_;
      r.d_ = n_ < 0 ? -n_ : n_;
      return r;
    }
    return Rational(bden(), bnum());
  }

  Rational& operator+=(const Rational& b) { return *this = *this + b; }
  Rational& operator-=(const Rational& b) { return *this = *this - b; }
  Rational& operator*=(const Rational& b) { return *this = *this * b; }
  Rational& operator/=(const Rational& b) { return *this = *this / b; }

  friend bool operator==(const Rational& a, const Rational& b) {
    if (a.is_big() != b.is_big()) return false;  // representations canonical
    if (!a.is_big()) return a.n_ == b.n_ && a.d_ == b.d_;
    return a.bnum() == b.bnum() && a.bden() == b.bden();
  }
  friend bool operator!=(const Rational& a, const Rational& b) {
    return !(a == b);
  }

  friend bool operator<(const Rational& a, const Rational& b) {
    if (!a.is_big() && !b.is_big()) {
      return detail::int128(a.n_) * b.d_ < detail::int128(b.n_) * a.d_;
    }
    return a.num() * b.den() < b.num() * a.den();
  }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator<=(const Rational& a, const Rational& b) {
    return !(b < a);
  }
  friend bool operator>=(const Rational& a, const Rational& b) {
    return !(a < b);
  }

  Rational abs() const { return sign() < 0 ? -*this : *this; }

  // Largest integer <= value, as int64 (all pipeline uses are tiny).
  std::int64_t floor() const {
    if (!is_big()) {
      std::int64_t q = n_ / d_;
      if (n_ % d_ != 0 && n_ < 0) --q;
      return q;
    }
    BigInt q = bnum() / bden();
    if (bnum() % bden() != 0 && bnum() < 0) --q;
    if (q > detail::kI64Max || q < -detail::kI64Max) {
      throw DomainError("floor overflows int64");
    }
    return q.convert_to<std::int64_t>();
  }

  Rational pow(unsigned e) const {
    Rational r(1);
    Rational base = *this;
    while (e != 0) {
      if (e & 1u) r *= base;
      base *= base;
      e >>= 1u;
    }
    return r;
  }

  double to_double() const {
    if (!is_big()) return static_cast<double>(n_) / static_cast<double>(d_);
    return bnum().convert_to<double>() / bden().convert_to<double>();
  }

  // Canonical textual form "p/q"; the denominator is always present.
  std::string str() const {
    if (!is_big()) return std::to_string(n_) + "/" + std::to_string(d_);
    return bnum().str() + "/" + bden().str();
  }

  std::size_t hash() const {
    if (!is_big()) {
      std::uint64_t h = static_cast<std::uint64_t>(n_) * 0x9e3779b97f4a7c15ull;
      h ^= static_cast<std::uint64_t>(d_) + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h * 0xc4ceb9fe1a85ec53ull);
    }
    return std::hash<std::string>{}(str());
  }

 private:
  const BigInt& bnum() const { return big_->first; }
  const BigInt& bden() const { return big_->second; }

  void assign_small(std::int64_t num, std::int64_t den) {
    if (den == 0) throw DomainError("zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    if (num == 0) {
      n_ = 0;
      d_ = 1;
      return;
    }
    std::uint64_t g = detail::gcd_u64(detail::uabs64(num),
                                      static_cast<std::uint64_t>(den));
    n_ = num / static_cast<std::int64_t>(g);
    d_ = den / static_cast<std::int64_t>(g);
  }

  void assign_big(BigInt num, BigInt den) {
    if (den == 0) throw DomainError("zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    BigInt g = boost::multiprecision::gcd(num < 0 ? BigInt(-num) : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num >= -detail::kI64Max && num <= detail::kI64Max &&
        den <= detail::kI64Max) {
      n_ = num.convert_to<std::int64_t>();
      d_ = den.convert_to<std::int64_t>();
      big_.reset();
      return;
    }
    big_ = std::make_shared<const std::pair<BigInt, BigInt>>(std::move(num),
                                                             std::move(den));
    n_ = 0;
    d_ = 0;  // poisoned while big_ is set
  }

  // Lowest-terms small addition following Knuth 4.5.1; returns false when
  // the result does not fit int64 (caller falls back to the big path).
  bool add_small(const Rational& a, const Rational& b) {
    using detail::int128;
    using detail::uint128;
    const std::uint64_t ad = static_cast<std::uint64_t>(a.d_);
    const std::uint64_t bd = static_cast<std::uint64_t>(b.d_);
    const std::uint64_t g = detail::gcd_u64(ad, bd);
    const std::uint64_t A = ad / g;
    const std::uint64_t B = bd / g;
    const int128 t = int128(a.n_) * int128(B) + int128(b.n_) * int128(A);
    if (t == 0) {
      n_ = 0;
      d_ = 1;
      return true;
    }
    std::uint64_t g2 = 1;
    if (g > 1) {
      g2 = detail::gcd_u64(
          static_cast<std::uint64_t>(detail::uabs128(t) % g), g);
    }
    const int128 num = t / int128(g2);
    const uint128 den = uint128(g / g2) * uint128(A) * uint128(B);
    if (!detail::fits_i64(num) || den > uint128(detail::kI64Max)) return false;
    n_ = static_cast<std::int64_t>(num);
    d_ = static_cast<std::int64_t>(den);
    return true;
  }

  bool mul_small(const Rational& a, const Rational& b) {
    using detail::int128;
    using detail::uint128;
    const std::uint64_t an = detail::uabs64(a.n_);
    const std::uint64_t bn = detail::uabs64(b.n_);
    const std::uint64_t g1 =
        detail::gcd_u64(an, static_cast<std::uint64_t>(b.d_));
    const std::uint64_t g2 =
        detail::gcd_u64(bn, static_cast<std::uint64_t>(a.d_));
    const int128 num =
        (int128(a.n_) / int128(g1)) * (int128(b.n_) / int128(g2));
    const uint128 den = uint128(static_cast<std::uint64_t>(a.d_) / g2) *
                        uint128(static_cast<std::uint64_t>(b.d_) / g1);
    if (!detail::fits_i64(num) || den > uint128(detail::kI64Max)) return false;
    n_ = static_cast<std::int64_t>(num);
    d_ = static_cast<std::int64_t>(den);
    return true;
  }

  std::int64_t n_ = 0;
  std::int64_t d_ = 1;
  std::shared_ptr<const std::pair<BigInt, BigInt>> big_;
};

inline Rational min(const Rational& a, const Rational& b) {
  return a < b ? a : b;
}
inline Rational max(const Rational& a, const Rational& b) {
  return a < b ? b : a;
}

struct RationalHash {
  std::size_t operator()(const Rational& r) const { return r.hash(); }
};

// 2^k as an exact rational, k possibly negative.
inline Rational pow2(int k) {
  if (k >= 0) {
    if (k > 62) return Rational(BigInt(1) << k, BigInt(1));
    return Rational(std::int64_t(1) << k);
  }
  if (-k > 62) return Rational(BigInt(1), BigInt(1) << (-k));
  return Rational(1, std::int64_t(1) << (-k));
}

}  // namespace cascade

#endif  // CASCADE_RATIONAL_HPP
