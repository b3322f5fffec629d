// Copyright 2026 The dval Authors.
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

#ifndef DVAL_COMMON_HPP
#define DVAL_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dval {

inline constexpr const char* kVersion = "0.1.0";

/// Malformed or inconsistent input data (files, shapes, non-finite values).
/// Precondition violations on plain arguments use std::invalid_argument.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace rng {

/// Platform-stable random streams.
///
/// Every stochastic routine in the library draws from `std::mt19937_64`
/// (whose output sequence is fixed by the C++ standard) seeded with
/// `stream_seed(seed, stream)`, where `stream` is the index of the unit of
/// work (permutation number, sample number, ...). The standard distributions
/// are implementation-defined, so bounded integers, uniforms and normals are
/// derived here from raw generator output:
///
///   uniform_index(g, n)  rejection sampling on 64-bit words, r % n
///   uniform01(g)         (g() >> 11) * 2^-53
///   normal(g)            Box-Muller, cosine branch
///   shuffle(g, p)        Fisher-Yates, i = n-1 .. 1, swap(p[i], p[uniform_index(g, i+1)])
///
/// Results therefore depend only on (seed, work index), never on the number
/// of worker threads or the standard library in use.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(~stream));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return Engine(stream_seed(seed, stream));
}

inline std::uint64_t uniform_index(Engine& gen, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = gen();
  } while (r >= limit);
  return r % n;
}

inline double uniform01(Engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double normal(Engine& gen) {
  double u1 = uniform01(gen);
  while (u1 <= 0.0) u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(Engine& gen, std::span<T> items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(gen, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace rng

/// Runs fn(i) for i in [0, count) on up to `threads` workers with static
/// contiguous chunking. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dval

#endif  // DVAL_COMMON_HPP
