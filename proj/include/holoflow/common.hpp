// Copyright (c) the holoflow developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace holoflow {

using Complex = std::complex<double>;

// Points and tangent vectors live in dimension 2 or 3; fixed-capacity
// storage keeps the hot loops allocation-free.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

// Fiber matrices: n = 1 (u(1)) or n = 2 (su(2) and friends).
using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 2, 2>;
using CVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;

struct HoloflowError : std::runtime_error {
  explicit HoloflowError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or schema-invalid experiment config (CLI exit code 2).
struct ConfigParseError : HoloflowError {
  using HoloflowError::HoloflowError;
};

// Configuration / catalogue resolution problems (CLI exit code 3).
struct CatalogueError : HoloflowError {
  using HoloflowError::HoloflowError;
};

// Numeric failures in well-formed runs (CLI exit code 4).
struct NumericError : HoloflowError {
  using HoloflowError::HoloflowError;
};

struct TrajectoryEscapeError : NumericError {
  using NumericError::NumericError;
};

struct DegenerateJacobianError : NumericError {
  using NumericError::NumericError;
};

struct OpenCurveError : NumericError {
  using NumericError::NumericError;
};

struct EndpointMismatchError : NumericError {
  using NumericError::NumericError;
};

struct OrbitCapError : NumericError {
  using NumericError::NumericError;
};

// Grid-sampled (measurable) gauge transforms act on representations but not
// on connection 1-forms; asking for the latter is a catalogue misuse.
struct NonDifferentiableGaugeError : CatalogueError {
  using CatalogueError::CatalogueError;
};

using Rng = std::mt19937_64;

// Independent deterministic stream: one master seed, one label per consumer.
inline Rng seeded_rng(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Deterministic partition of [0, count) into contiguous blocks, one thread
// each.  With threads <= 1 this degenerates to a plain loop; results never
// depend on the thread count because each index writes its own slot.
inline void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& body) {
  if (threads <= 1 || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  int used = static_cast<int>(std::min<std::int64_t>(threads, count));
  std::vector<std::thread> pool;
  pool.reserve(used);
  std::int64_t chunk = (count + used - 1) / used;
  for (int t = 0; t < used; ++t) {
    std::int64_t b = t * chunk;
    std::int64_t e = std::min<std::int64_t>(count, b + chunk);
    pool.emplace_back([b, e, &body] {
      for (std::int64_t i = b; i < e; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline std::string fmt_complex(Complex z) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g%+.12gi", z.real(), z.imag());
  return buf;
}

}  // namespace holoflow
