#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace qnetsim {

// Simulated time as an integer count of microseconds. Every protocol constant
// (10 us swap latency, 50 us attempt period, 100 s runs) is exact at this
// resolution, so event ordering never depends on floating point rounding.
class SimTime {
 public:
  using rep = std::int64_t;

  constexpr SimTime() = default;

  static constexpr SimTime micros(rep us) { return SimTime(us); }
  static constexpr SimTime millis(rep ms) { return SimTime(ms * 1000); }
  static constexpr SimTime seconds(rep s) { return SimTime(s * 1000000); }

  // Rounds to the nearest microsecond.
  static SimTime from_seconds(double s) {
    if (!std::isfinite(s) || s < 0.0) {
      throw std::invalid_argument("SimTime::from_seconds: negative or non-finite duration");
    }
    const double us = std::round(s * 1e6);
    if (us > static_cast<double>(std::numeric_limits<rep>::max() / 2)) {
      return max();
    }
    return SimTime(static_cast<rep>(us));
  }

  static constexpr SimTime zero() { return SimTime(0); }
  static constexpr SimTime max() { return SimTime(std::numeric_limits<rep>::max() / 2); }

  constexpr rep count() const { return us_; }
  constexpr double to_seconds() const { return static_cast<double>(us_) * 1e-6; }

  constexpr SimTime operator+(SimTime o) const { return SimTime(us_ + o.us_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(us_ - o.us_); }
  constexpr SimTime operator*(rep k) const { return SimTime(us_ * k); }
  constexpr SimTime& operator+=(SimTime o) {
    us_ += o.us_;
    return *this;
  }
  constexpr SimTime& operator-=(SimTime o) {
    us_ -= o.us_;
    return *this;
  }

  constexpr auto operator<=>(const SimTime&) const = default;

 private:
  constexpr explicit SimTime(rep us) : us_(us) {}
  rep us_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.count() << "us"; }

}  // namespace qnetsim
