#pragma once

// Counter-based deterministic random source.
//
// Generator identity (part of the library's reproducibility contract):
//   Philox4x32-10 (Salmon et al. 2011), multipliers 0xD2511F53 / 0xCD9E8D57,
//   Weyl constants 0x9E3779B9 / 0xBB67AE85, key = (seed lo32, seed hi32),
//   counter = (block lo32, block hi32, stream lo32, stream hi32).
// Each 128-bit block yields two doubles u = (x >> 11) * 2^-53 in [0,1) and
// one Box-Muller pair (u1 in (0,1] via 1-u). The k-th normal drawn from a
// given (seed, stream) is therefore a pure function of (seed, stream, k),
// independent of batching and platform.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "iscs/core.hpp"

namespace iscs {

namespace detail {

struct PhiloxBlock {
  std::array<std::uint32_t, 4> v;
};

inline PhiloxBlock philox4x32_10(std::uint64_t block, std::uint64_t stream, std::uint64_t seed) {
  constexpr std::uint32_t M0 = 0xD2511F53u;
  constexpr std::uint32_t M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u;
  constexpr std::uint32_t W1 = 0xBB67AE85u;

  std::uint32_t c0 = static_cast<std::uint32_t>(block);
  std::uint32_t c1 = static_cast<std::uint32_t>(block >> 32);
  std::uint32_t c2 = static_cast<std::uint32_t>(stream);
  std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);

  // 10 rounds; the key is bumped by the Weyl constants between rounds.
  for (int round = 0; round < 10; ++round) {
    if (round != 0) {
      k0 += W0;
      k1 += W1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t n0 = hi1 ^ c1 ^ k0;
    const std::uint32_t n1 = lo1;
    const std::uint32_t n2 = hi0 ^ c3 ^ k1;
    const std::uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
  }
  return PhiloxBlock{{c0, c1, c2, c3}};
}

inline double u64_to_unit(std::uint64_t x) {
  // Top 53 bits -> [0, 1) with full double resolution.
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Stream of standard normal deviates. Copyable; copies continue the sequence
// independently from the same position.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Number of normals drawn so far; also the index of the next one.
  std::uint64_t position() const { return next_index_; }

  double next() {
    const std::uint64_t n = next_index_++;
    const std::uint64_t block = n >> 1;
    if ((n & 1u) != 0 && cached_block_ == block) return cached_odd_;

    const detail::PhiloxBlock b = detail::philox4x32_10(block, stream_, seed_);
    const std::uint64_t xa =
        (static_cast<std::uint64_t>(b.v[1]) << 32) | b.v[0];
    const std::uint64_t xb =
        (static_cast<std::uint64_t>(b.v[3]) << 32) | b.v[2];
    // Box-Muller; 1-u keeps the log argument strictly positive.
    const double u1 = 1.0 - detail::u64_to_unit(xa);
    const double u2 = detail::u64_to_unit(xb);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    const double even = r * std::cos(phi);
    cached_odd_ = r * std::sin(phi);
    cached_block_ = block;
    return (n & 1u) ? cached_odd_ : even;
  }

  template <typename Derived>
  void fill(Eigen::ArrayBase<Derived>& out) {
    for (Index i = 0; i < out.size(); ++i) out(i) = next();
  }

  ArrayXd draw(Index n) {
    if (n < 0) throw ParameterError("NormalStream::draw: negative count");
    ArrayXd out(n);
    fill(out);
    return out;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t next_index_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  double cached_odd_ = 0.0;
};

// FNV-1a, used to derive RNG stream ids from experiment identity strings.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace iscs
