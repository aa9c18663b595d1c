#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "csbp/speed.hpp"

using namespace csbp;

namespace {
const LadderFlows& flows() {
  static const LadderFlows f(EsscherLadder::from_spec(parse_mechanism("kind=stable alpha=0.5 k=1"), "power:2", 64));
  return f;
}
}  // namespace

TEST_CASE("speed sequences") {
  const auto p = parse_speed("power:1");
  CHECK(p.h(4) == doctest::Approx(0.25));
  const auto e = parse_speed("exp:-0.5*n");
  CHECK(e.log_h(10) == doctest::Approx(-5.0));
  const auto q = parse_speed("exp:-1*n^2");
  CHECK(q.log_h(64) == doctest::Approx(-4096.0));
  CHECK(q.h(64) == 0.0);
  const auto g = parse_speed("geom:2");
  CHECK(g.h(3) == doctest::Approx(0.125));
  CHECK_THROWS_AS(parse_speed("exp:n"), ValidationError);
  CHECK_THROWS_AS(parse_speed("construct:0"), ValidationError);  // needs a ladder
  CHECK_THROWS_AS(parse_speed("zigzag:1"), ValidationError);
}

TEST_CASE("reference speeds classify") {
  const auto& f = flows();
  const double th = default_theta(f.ladder());
  const auto z0 = classify(f, parse_speed("power:1"), th, 64);
  CHECK(z0.cls == SpeedClass::Z0);
  const auto zc = classify(f, parse_speed("exp:-0.5*n"), th, 64);
  CHECK(zc.cls == SpeedClass::Zc);
  CHECK(zc.c_estimate == doctest::Approx(1.0).epsilon(0.05));
  const auto zi = classify(f, parse_speed("exp:-1*n^2"), th, 64);
  CHECK(zi.cls == SpeedClass::Zinf);
}

TEST_CASE("rv ratio matches the derived limit") {
  // |log h(n)| / varphi'(eps_n) = (n/2) / (n/2) -> 1 for h = e^{-n/2}
  const auto& f = flows();
  const auto h = parse_speed("exp:-0.5*n");
  CHECK(rv_ratio(f.ladder(), h, 63) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("construction round trip") {
  const auto& f = flows();
  const double th = default_theta(f.ladder());
  for (double c : {0.0, 1.0, 2.5}) {
    const auto h = construct_speed_for_c(f, c, th);
    const auto r = classify(f, h, th, 64);
    if (c == 0.0) {
      CHECK(r.cls == SpeedClass::Z0);
    } else {
      CHECK(r.cls == SpeedClass::Zc);
      CHECK(r.c_estimate == doctest::Approx(c).epsilon(0.05));
    }
    // the construction hits the integral exactly at every level
    for (int n : {4, 32, 64})
      CHECK(shifted_integral_log(f, f.ladder().position(n), h.log_h(n), th) - f.base().F(th) ==
            doctest::Approx(c).epsilon(1e-8));
  }
  const auto hi = construct_speed_for_c(f, kInf, th);
  CHECK(classify(f, hi, th, 64).cls == SpeedClass::Zinf);
}

TEST_CASE("speed csv round trip keeps tiny values") {
  const auto& f = flows();
  const auto h = construct_speed_for_c(f, kInf, default_theta(f.ladder()));
  std::ostringstream os;
  h.write_csv(os);
  const std::string path = "speed_roundtrip.csv";
  {
    std::ofstream out(path);
    out << os.str();
  }
  const auto back = SpeedSequence::read_csv(path);
  for (int n : {1, 10, 64}) CHECK(back.log_h(n) == doctest::Approx(h.log_h(n)).epsilon(1e-12));
}

TEST_CASE("summability of the strong-convergence series") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  const auto lad = EsscherLadder::from_spec(m, "geom:4", 64);
  const auto s = summability_checks(lad, parse_speed("geom:2"), 64);
  CHECK(s.thm1086 == SumVerdict::summable);
  const auto lad2 = EsscherLadder::from_spec(m, "power:2", 64);
  const auto s2 = summability_checks(lad2, parse_speed("power:1"), 64);
  CHECK(s2.thm1086 == SumVerdict::divergent);
}
