#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mfld/errors.hpp"

namespace mfld {

// Real coordinates closer than this are the same atom.
inline constexpr double kAtomTolerance = 1e-12;

/// How atoms of a given point type are ordered, matched and printed.
///
/// Ordering is always exact (it only fixes a canonical storage order). Matching
/// is exact for ids and integer grids and tolerance-based for real coordinates,
/// because relative entropy is discontinuous in support membership.
template <class P, class Enable = void>
struct AtomTraits;

template <class I>
struct AtomTraits<I, std::enable_if_t<std::is_integral_v<I>>> {
  static constexpr bool tolerant = false;
  static bool less(I a, I b) { return a < b; }
  static bool same(I a, I b) { return a == b; }
  static bool compatible(I, I) { return true; }
  static std::string format(I a) { return std::to_string(a); }
  static I parse(std::string_view s) {
    I v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw DomainError("cannot parse integer atom '" + std::string(s) + "'");
    return v;
  }
};

template <>
struct AtomTraits<double> {
  static constexpr bool tolerant = true;
  static bool less(double a, double b) { return a < b; }
  static bool same(double a, double b) { return std::abs(a - b) <= kAtomTolerance; }
  static bool compatible(double, double) { return true; }
  static std::string format(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", a);
    return buf;
  }
  static double parse(std::string_view s) {
    std::string tmp(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tmp, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tmp.size() || tmp.empty())
      throw DomainError("cannot parse real atom '" + tmp + "'");
    return v;
  }
};

template <>
struct AtomTraits<std::string> {
  static constexpr bool tolerant = false;
  static bool less(const std::string& a, const std::string& b) { return a < b; }
  static bool same(const std::string& a, const std::string& b) { return a == b; }
  static bool compatible(const std::string&, const std::string&) { return true; }
  static std::string format(const std::string& a) { return a; }
  static std::string parse(std::string_view s) { return std::string(s); }
};

namespace detail {
// Nesting depth decides the separator: ',' inside a vector, ';' between vectors.
template <class T>
struct vector_depth : std::integral_constant<int, 0> {};
template <class T>
struct vector_depth<std::vector<T>> : std::integral_constant<int, 1 + vector_depth<T>::value> {};
}  // namespace detail

template <class T>
struct AtomTraits<std::vector<T>> {
  using Inner = AtomTraits<T>;
  static constexpr bool tolerant = Inner::tolerant;
  static constexpr char separator = detail::vector_depth<std::vector<T>>::value == 1 ? ',' : ';';

  static bool less(const std::vector<T>& a, const std::vector<T>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (Inner::less(a[i], b[i])) return true;
      if (Inner::less(b[i], a[i])) return false;
    }
    return a.size() < b.size();
  }
  static bool same(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!Inner::same(a[i], b[i])) return false;
    return true;
  }
  static bool compatible(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!Inner::compatible(a[i], b[i])) return false;
    return true;
  }
  static std::string format(const std::vector<T>& a) {
    std::string out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i) out += separator;
      out += Inner::format(a[i]);
    }
    return out;
  }
  static std::vector<T> parse(std::string_view s) {
    std::vector<T> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = s.find(separator, start);
      out.push_back(Inner::parse(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return out;
  }
};

template <class P>
struct AtomLess {
  bool operator()(const P& a, const P& b) const { return AtomTraits<P>::less(a, b); }
};

}  // namespace mfld
