#ifndef PROBF_DUAL_HPP
#define PROBF_DUAL_HPP

#include <cmath>
#include <type_traits>

namespace probf {

/// First-order dual number over an arbitrary scalar. Nesting Dual<Dual<...>>
/// yields exact higher-order directional derivatives; the barrier chain uses
/// depth up to four.
template <class T>
struct Dual {
  T v{};  // value
  T e{};  // derivative part

  Dual() = default;
  Dual(T value) : v(std::move(value)), e(T(0)) {}  // NOLINT: implicit lift
  Dual(T value, T eps) : v(std::move(value)), e(std::move(eps)) {}
  template <class U, std::enable_if_t<std::is_arithmetic_v<U>, int> = 0>
  Dual(U value) : v(T(value)), e(T(0)) {}  // NOLINT: lift plain constants

  Dual& operator+=(const Dual& o) {
    v += o.v;
    e += o.e;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    e -= o.e;
    return *this;
  }
};

template <class T>
Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return {a.v + b.v, a.e + b.e}; }
template <class T>
Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return {a.v - b.v, a.e - b.e}; }
template <class T>
Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.e}; }
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.v * b.e + a.e * b.v};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  const T q = a.v / b.v;
  return {q, (a.e - q * b.e) / b.v};
}

template <class T>
Dual<T> operator+(double a, const Dual<T>& b) { return Dual<T>(T(a)) + b; }
template <class T>
Dual<T> operator+(const Dual<T>& a, double b) { return a + Dual<T>(T(b)); }
template <class T>
Dual<T> operator-(double a, const Dual<T>& b) { return Dual<T>(T(a)) - b; }
template <class T>
Dual<T> operator-(const Dual<T>& a, double b) { return a - Dual<T>(T(b)); }
template <class T>
Dual<T> operator*(double a, const Dual<T>& b) { return Dual<T>(T(a)) * b; }
template <class T>
Dual<T> operator*(const Dual<T>& a, double b) { return a * Dual<T>(T(b)); }
template <class T>
Dual<T> operator/(double a, const Dual<T>& b) { return Dual<T>(T(a)) / b; }
template <class T>
Dual<T> operator/(const Dual<T>& a, double b) { return a / Dual<T>(T(b)); }

using std::cos;
using std::exp;
using std::sin;
using std::sqrt;

template <class T>
Dual<T> sin(const Dual<T>& a) { return {sin(a.v), cos(a.v) * a.e}; }
template <class T>
Dual<T> cos(const Dual<T>& a) {
  return {cos(a.v), -(sin(a.v) * a.e)};
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  const T ev = exp(a.v);
  return {ev, ev * a.e};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  const T sv = sqrt(a.v);
  return {sv, a.e / (T(2) * sv)};
}

/// Plain value of an arbitrarily nested dual.
inline double dual_value(double x) { return x; }
template <class T>
double dual_value(const Dual<T>& x) { return dual_value(x.v); }

}  // namespace probf

#endif  // PROBF_DUAL_HPP
