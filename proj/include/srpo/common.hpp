// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared error types, seeds and counter-based random streams.

#ifndef SRPO_COMMON_HPP_
#define SRPO_COMMON_HPP_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace srpo {

using Seed = std::uint64_t;
using TokenId = int;

/// Invalid user-facing configuration. `key_path()` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite value encountered in probabilities, gradients or parameters.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NO_PERCEPTION scoring requested on a response without parsed spans.
class SpanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupted or incompatible persisted state (checksum, version, config hash).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractViolation(msg);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream tags keep independent consumers of one master seed apart.
enum class Stream : std::uint64_t {
  kTask = 1,
  kRollout = 2,
  kMask = 3,
  kInit = 4,
  kWarmstart = 5,
  kMismatch = 6,
  kEval = 7,
  kPassAtK = 8,
  kDiagnose = 9,
};

/// Counter-style derivation: the result depends only on (base, keys), never
/// on how many other seeds were derived before.
inline Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Seed derive_seed(Seed base, Stream s, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base ^ (static_cast<std::uint64_t>(s) * 0xd1b54a32d192ed03ULL));
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// SplitMix64 sequence. Cheap to construct, so one is created per draw site.
class Rng {
 public:
  explicit Rng(Seed seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n).
  int below(int n) {
    require(n > 0, "Rng::below: n must be positive");
    return static_cast<int>(uniform() * n);
  }

 private:
  std::uint64_t state_;
};

/// Seed-keyed uniform draw, used where a value must be addressable by index.
inline double keyed_uniform(Seed seed, std::uint64_t index) {
  return static_cast<double>(splitmix64(splitmix64(seed) ^ splitmix64(index + 1)) >> 11) * 0x1.0p-53;
}

/// 64-bit FNV-1a, used for content hashes and checksums.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(std::uint64_t v) { update(&v, sizeof v); }
  void update(std::span<const double> v) { update(v.data(), v.size_bytes()); }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

}  // namespace srpo

#endif  // SRPO_COMMON_HPP_
