#include <doctest.h>

#include <cmath>
#include <set>

#include "csbp/rng.hpp"

using namespace csbp;

TEST_CASE("philox4x32-10 known answers") {
  // Random123 kat_vectors
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  PhiloxStream a(7, 3, StreamRole::jumps), b(7, 3, StreamRole::jumps);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  PhiloxStream c(7, 3, StreamRole::marks), d(7, 4, StreamRole::jumps), e(8, 3, StreamRole::jumps),
      f(7, 3, StreamRole::jumps, 1);
  PhiloxStream g(7, 3, StreamRole::jumps);
  const auto first = g();
  CHECK(first != c());
  CHECK(first != d());
  CHECK(first != e());
  CHECK(first != f());
}

TEST_CASE("uniform, exponential and normal moments") {
  PhiloxStream s(1, 0, StreamRole::aux);
  const int n = 200000;
  double su = 0, se = 0, sn = 0, sn2 = 0, umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    se += s.exponential();
    const double z = s.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(se / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}
