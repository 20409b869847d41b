#include <doctest.h>

#include <cmath>

#include "iscs/rng.hpp"

using namespace iscs;

// Published known-answer vectors for Philox4x32-10 (Random123 test suite).
TEST_CASE("philox4x32-10 known-answer vectors") {
  {
    // counter = 0, key = 0
    const auto b = detail::philox4x32_10(0, 0, 0);
    CHECK(b.v[0] == 0x6627e8d5u);
    CHECK(b.v[1] == 0xe169c58du);
    CHECK(b.v[2] == 0xbc57ac4cu);
    CHECK(b.v[3] == 0x9b00dbd8u);
  }
  {
    // counter = all ones, key = all ones
    const auto b = detail::philox4x32_10(0xffffffffffffffffull, 0xffffffffffffffffull,
                                         0xffffffffffffffffull);
    CHECK(b.v[0] == 0x408f276du);
    CHECK(b.v[1] == 0x41c83b0eu);
    CHECK(b.v[2] == 0xa20bc7c6u);
    CHECK(b.v[3] == 0x6d5451fdu);
  }
  {
    // counter = digits of pi, key = more digits of pi
    const std::uint64_t block = (0x85a308d3ull << 32) | 0x243f6a88ull;
    const std::uint64_t stream = (0x03707344ull << 32) | 0x13198a2eull;
    const std::uint64_t seed = (0x299f31d0ull << 32) | 0xa4093822ull;
    const auto b = detail::philox4x32_10(block, stream, seed);
    CHECK(b.v[0] == 0xd16cfe09u);
    CHECK(b.v[1] == 0x94fdccebu);
    CHECK(b.v[2] == 0x5001e420u);
    CHECK(b.v[3] == 0x24126ea1u);
  }
}

TEST_CASE("normal stream is deterministic and batch-independent") {
  NormalStream a(42, 7);
  NormalStream b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  // draw(n) must yield exactly the sequence of n next() calls
  NormalStream c(42, 7);
  NormalStream d(42, 7);
  const ArrayXd batch = c.draw(31);
  for (int i = 0; i < 31; ++i) CHECK(batch(i) == d.next());
  // and continue identically afterwards
  for (int i = 0; i < 10; ++i) CHECK(c.next() == d.next());
}

TEST_CASE("distinct seeds and streams give distinct sequences") {
  NormalStream a(1, 0), b(2, 0), c(1, 1);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const double va = a.next();
    if (va == b.next()) ++same_ab;
    if (va == c.next()) ++same_ac;
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("normal stream moments") {
  NormalStream rng(2024, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next();
    sum += x;
    sum2 += x * x;
    sum3 += x * x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double skew = sum3 / n;
  // 4.5-sigma Monte Carlo bounds for this sample size
  CHECK(std::abs(mean) < 4.5 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 4.5 * std::sqrt(2.0 / n));
  CHECK(std::abs(skew) < 4.5 * std::sqrt(15.0 / n));
}

TEST_CASE("normal stream values are finite and within sane range") {
  NormalStream rng(7, 3);
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.next();
    CHECK(std::isfinite(x));
    CHECK(std::abs(x) < 10.0);  // |z| > 10 has probability ~1e-23
  }
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}
