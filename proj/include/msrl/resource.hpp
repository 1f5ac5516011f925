#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string_view>

namespace msrl {

enum class Resource : std::size_t { Cpu = 0, Memory = 1, Storage = 2, Network = 3 };

inline constexpr std::size_t kResourceDims = 4;
inline constexpr std::array<std::string_view, kResourceDims> kResourceNames = {"cpu", "memory", "storage",
                                                                                "network"};

/// Four-dimensional resource quantity used for capacities, demands and usage.
struct ResourceVector {
  double cpu = 0.0;
  double memory = 0.0;
  double storage = 0.0;
  double network = 0.0;

  constexpr double operator[](std::size_t i) const {
    switch (i) {
      case 0: return cpu;
      case 1: return memory;
      case 2: return storage;
      default: return network;
    }
  }
  constexpr double& operator[](std::size_t i) {
    switch (i) {
      case 0: return cpu;
      case 1: return memory;
      case 2: return storage;
      default: return network;
    }
  }
  constexpr double operator[](Resource r) const { return (*this)[static_cast<std::size_t>(r)]; }

  static constexpr ResourceVector uniform(double v) { return {v, v, v, v}; }

  constexpr ResourceVector& operator+=(const ResourceVector& o) {
    for (std::size_t i = 0; i < kResourceDims; ++i) (*this)[i] += o[i];
    return *this;
  }
  constexpr ResourceVector& operator-=(const ResourceVector& o) {
    for (std::size_t i = 0; i < kResourceDims; ++i) (*this)[i] -= o[i];
    return *this;
  }
  constexpr ResourceVector& operator*=(double s) {
    for (std::size_t i = 0; i < kResourceDims; ++i) (*this)[i] *= s;
    return *this;
  }
  friend constexpr ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
  friend constexpr ResourceVector operator-(ResourceVector a, const ResourceVector& b) { return a -= b; }
  friend constexpr ResourceVector operator*(ResourceVector a, double s) { return a *= s; }

  friend constexpr bool operator==(const ResourceVector&, const ResourceVector&) = default;

  /// Component-wise partial order: every component of `*this` is <= the other's.
  constexpr bool fits_within(const ResourceVector& o) const {
    for (std::size_t i = 0; i < kResourceDims; ++i)
      if ((*this)[i] > o[i]) return false;
    return true;
  }

  bool valid() const {
    for (std::size_t i = 0; i < kResourceDims; ++i)
      if (!std::isfinite((*this)[i]) || (*this)[i] < 0.0) return false;
    return true;
  }

  constexpr double sum() const { return cpu + memory + storage + network; }
};

// Tolerance absorbs float residue from repeated add/subtract of demands.
inline bool fits(const ResourceVector& used, const ResourceVector& cap, double eps = 1e-9) {
  for (std::size_t i = 0; i < kResourceDims; ++i)
    if (used[i] > cap[i] + eps) return false;
  return true;
}

}  // namespace msrl
