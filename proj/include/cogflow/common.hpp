#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cogflow {

inline constexpr const char* kVersion = "0.1.0";

// Maximum spatial dimension supported by the thought space.
inline constexpr int kMaxDim = 3;

/// Fixed-capacity vector for points and velocities in the thought space.
/// Dimension is runtime (1..3); unused coordinates stay zero.
struct Vec {
  std::array<double, kMaxDim> c{};
  int n = 0;

  Vec() = default;
  explicit Vec(int dim) : n(dim) {}
  Vec(std::initializer_list<double> xs) {
    for (double x : xs) c[n++] = x;
  }

  double& operator[](int i) { return c[static_cast<size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<size_t>(i)]; }
  int size() const { return n; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n; ++i) c[i] += o.c[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n; ++i) c[i] -= o.c[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n; ++i) c[i] *= s;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator*(double s, Vec a) { return a *= s; }

  double dot(const Vec& o) const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += c[i] * o.c[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }

  friend bool operator==(const Vec& a, const Vec& b) {
    if (a.n != b.n) return false;
    for (int i = 0; i < a.n; ++i)
      if (a.c[i] != b.c[i]) return false;
    return true;
  }
};

inline Vec zero_vec(int dim) { return Vec(dim); }

/// Axis-aligned domain box [lo_i, hi_i] per axis.
struct Box {
  Vec lo, hi;

  int dim() const { return lo.n; }

  bool contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  Vec clamp(Vec x) const {
    for (int i = 0; i < dim(); ++i) {
      if (x[i] < lo[i]) x[i] = lo[i];
      if (x[i] > hi[i]) x[i] = hi[i];
    }
    return x;
  }

  Vec wrap(Vec x) const {
    for (int i = 0; i < dim(); ++i) {
      const double len = hi[i] - lo[i];
      double r = std::fmod(x[i] - lo[i], len);
      if (r < 0) r += len;
      x[i] = lo[i] + r;
    }
    return x;
  }

  double extent(int i) const { return hi[i] - lo[i]; }

  double min_extent() const {
    double m = extent(0);
    for (int i = 1; i < dim(); ++i) m = std::min(m, extent(i));
    return m;
  }

  double volume() const {
    double v = 1;
    for (int i = 0; i < dim(); ++i) v *= extent(i);
    return v;
  }

  Vec center() const {
    Vec c(dim());
    for (int i = 0; i < dim(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }
};

/// Configuration or schema problem; maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A trajectory left the domain box under the strict domain policy.
struct DomainExitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Decimal formatting with 17 significant digits (round-trip exact).
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// FNV-1a 64-bit content digest, used for config and file inventories.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull) {
  uint64_t h = seed;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace cogflow
