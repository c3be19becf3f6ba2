#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mfld {

/// A value in [0, +inf] or more generally (-inf, +inf]: either a finite double
/// or the distinguished +infinity. Relative entropies and rate functions are
/// returned as ExtendedReal so that +inf never leaks into arithmetic as a float.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;

  static constexpr ExtendedReal finite(double v) { return ExtendedReal(v, false); }
  static constexpr ExtendedReal infinity() { return ExtendedReal(0.0, true); }

  constexpr bool is_finite() const noexcept { return !infinite_; }
  constexpr bool is_infinite() const noexcept { return infinite_; }

  // Throws when infinite; use is_finite() or to_double() first.
  double value() const {
    if (infinite_) throw std::logic_error("ExtendedReal::value() on +infinity");
    return value_;
  }

  // Lossy conversion for reporting: +inf maps to the IEEE infinity.
  double to_double() const noexcept {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return finite(a.value_ + b.value_);
  }

  friend bool operator==(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }

  friend bool operator<(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.value_ < b.value_;
  }
  friend bool operator>(ExtendedReal a, ExtendedReal b) { return b < a; }
  friend bool operator<=(ExtendedReal a, ExtendedReal b) { return !(b < a); }
  friend bool operator>=(ExtendedReal a, ExtendedReal b) { return !(a < b); }

  friend std::ostream& operator<<(std::ostream& os, ExtendedReal x) {
    if (x.infinite_) return os << "inf";
    return os << x.value_;
  }

 private:
  constexpr ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}

  double value_ = 0.0;
  bool infinite_ = false;
};

// Gap between two extended reals; two infinities are considered equal.
inline double extended_gap(ExtendedReal a, ExtendedReal b) {
  if (a.is_infinite() && b.is_infinite()) return 0.0;
  if (a.is_infinite() || b.is_infinite()) return std::numeric_limits<double>::infinity();
  return std::abs(a.value() - b.value());
}

}  // namespace mfld
