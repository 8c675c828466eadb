#include <doctest.h>

#include <cmath>

#include "ofdmsense/errors.hpp"
#include "ofdmsense/sequential_detect.hpp"
#include "oracles.hpp"

using namespace ofdmsense;

TEST_SUITE("sequential_detect") {

TEST_CASE("CP slot LLR") {
  CHECK(cp_llr(2.0, 2.0, 20.0, 16) == doctest::Approx(0.08));
  CHECK(cp_llr(1.0, 2.0, 20.0, 16) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cp_llr(1.0, 2.0, 0.0, 16), ParameterError);
}

TEST_CASE("energy slot LLR matches the density ratio") {
  CHECK(energy_llr(20.0, 2.0, 20.0, 80) == doctest::Approx(-0.42589).epsilon(1e-5));
  for (double v : {15.0, 19.0, 21.7, 24.0, 30.0}) {
    const double oracle_llr = oracle::density_ratio_llr(v, 20.0, 400.0 / 80, 22.0, 484.0 / 80);
    CHECK(energy_llr(v, 2.0, 20.0, 80) == doctest::Approx(oracle_llr).epsilon(1e-10));
  }
}

TEST_CASE("slot statistics") {
  OfdmParams p;
  SampleBlock zero(80);
  CHECK(cp_slot_statistic(zero, p) == 0.0);
  CHECK(energy_slot_statistic(zero, p) == 0.0);
  SampleBlock c(80, std::polar(std::sqrt(3.0), 1.1));
  CHECK(energy_slot_statistic(c, p) == doctest::Approx(3.0));
  CHECK_THROWS_AS(cp_slot_statistic(SampleBlock(40), p), LengthError);

  Rng rng(41);
  std::vector<double> rr;
  std::vector<double> v;
  SampleBlock x(80);
  for (int t = 0; t < 100000; ++t) {
    for (auto& s : x) s = complex_normal(rng, 20.0);
    rr.push_back(cp_slot_statistic(x, p));
    v.push_back(energy_slot_statistic(x, p));
  }
  CHECK(std::abs(oracle::variance(rr) / 12.5 - 1.0) < 0.05);
  CHECK(std::abs(oracle::mean(v) - 20.0) / 20.0 < 0.01);
  CHECK(std::abs(oracle::variance(v) / 5.0 - 1.0) < 0.05);
}

TEST_CASE("CUSUM step") {
  CHECK(cusum_step({0.0}, -1.0).w == 0.0);
  CHECK(cusum_step({2.0}, 1.5).w == 3.5);
  CHECK(cusum_step({1.0}, -3.0).w == 0.0);
}

TEST_CASE("recursive CUSUM equals the batch maximum") {
  Rng rng(42);
  for (int c = 0; c < 1000; ++c) {
    const std::size_t len = 1 + rng() % 50;
    std::vector<double> xi(len);
    for (auto& v : xi) v = standard_normal(rng) - 0.2;
    const auto batch = oracle::cusum_batch(xi);
    CusumState st;
    for (std::size_t k = 0; k < len; ++k) {
      st = cusum_step(st, xi[k]);
      REQUIRE(st.w == doctest::Approx(batch[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("bank with identical offsets is the scalar CUSUM") {
  OfdmParams p{2, 1};
  const NodeScenario design{20.0, 2.0};
  CusumBank bank(p, design);
  CusumState st;
  Rng rng(43);
  for (int k = 0; k < 200; ++k) {
    const double r = 2.0 * standard_normal(rng) + 0.5;
    st = cusum_step(st, cp_llr(r, 2.0, 20.0, 1));
    const double w = bank.step_statistics(std::vector<double>{r, r});
    CHECK(w == doctest::Approx(st.w).epsilon(1e-12));
  }
}

TEST_CASE("bank stopping time equals the brute-force oracle") {
  OfdmParams p{4, 2};
  const NodeScenario design{20.0, 2.0};
  Rng rng(44);
  for (int c = 0; c < 2000; ++c) {
    const std::size_t len = 1 + c % 30;
    const double gamma = 0.05 + 0.5 * uniform01(rng);
    std::vector<std::vector<double>> r(len, std::vector<double>(4));
    std::vector<std::vector<double>> xi(len, std::vector<double>(4));
    for (std::size_t k = 0; k < len; ++k) {
      for (std::size_t m = 0; m < 4; ++m) {
        r[k][m] = 10.0 * standard_normal(rng) + (m == static_cast<std::size_t>(c % 4) ? 1.5 : 0.0);
        xi[k][m] = 2.0 * (2.0 * 2.0 * r[k][m] - 4.0) / (2.0 * 400.0);
      }
    }
    CusumBank bank(p, design);
    std::optional<std::size_t> tau;
    for (std::size_t k = 0; k < len && !tau; ++k) {
      if (bank.step_statistics(r[k]) > gamma) tau = k + 1;
    }
    REQUIRE(tau == oracle::bank_stop_brute(xi, gamma));
  }
}

TEST_CASE("carry window requires the first slot") {
  OfdmParams p;
  CarryWindow w(p);
  CHECK(w.samples_needed(0) == 144);
  CHECK(w.samples_needed(3) == 80);
  CHECK_THROWS_AS(w.push(SampleBlock(80), 1), StateError);
  CHECK_THROWS_AS(w.push(SampleBlock(80), 0), LengthError);
}

TEST_CASE("theta1 roots") {
  const double t = solve_theta1_glr(1.0, 1.0, 1, 1.0, 4);
  CHECK(t == doctest::Approx(0.88748).epsilon(1e-5));
  CHECK(std::abs(t * t + 7 * t - 7) < 1e-9);
  const double u = solve_theta1_mglr(0.5, 0.25, 1, 80);
  CHECK(u == doctest::Approx((std::sqrt(1680.0) - 40.0) / 2.0).epsilon(1e-12));
  CHECK(std::abs(u - 0.49394) < 1e-4);
  CHECK(std::abs(u * u + 40 * u - 20) < 1e-9);
  CHECK(solve_theta1_mglr(0.0, 0.0, 3, 80) == 0.0);
  CHECK(solve_theta1_glr(0.0, 0.0, 3, 20.0, 80) == 0.0);
  CHECK_THROWS_AS(solve_theta1_glr(1.0, 1.0, 0, 1.0, 4), ParameterError);
}

TEST_CASE("theta1 roots solve their quadratics") {
  Rng rng(45);
  for (int c = 0; c < 5000; ++c) {
    const std::size_t k = 1 + rng() % 200;
    const double w2 = 0.5 + 30.0 * uniform01(rng);
    const double n = 80.0;
    double s = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double v = w2 * 0.3 * standard_normal(rng) + 2.0 * uniform01(rng);
      s += v;
      sq += v * v;
    }
    for (auto form : {Theta1Form::kPrinted, Theta1Form::kExact}) {
      const double t = solve_theta1_glr(s, sq, k, w2, 80, form);
      REQUIRE(t >= 0.0);
      if (t > 0.0) {
        const double kk = static_cast<double>(k);
        const double a = kk * t * t;
        const double b = t * (2 * kk * w2 + n * kk * w2 + (form == Theta1Form::kExact ? n : 1.0) * s);
        const double c0 = -(n * sq + n * w2 * s - kk * w2 * w2);
        const double scale = std::max({std::abs(a), std::abs(b), std::abs(c0)});
        REQUIRE(std::abs(a + b + c0) / scale < 1e-9);
      }
    }
    const double u = solve_theta1_mglr(s, sq, k, 80);
    REQUIRE(u >= 0.0);
    if (u > 0.0) {
      const double kk = static_cast<double>(k);
      const double scale = std::max({kk * u * u, std::abs(n * s * u), n * sq});
      REQUIRE(std::abs(kk * u * u + n * s * u - n * sq) / scale < 1e-9);
    }
  }
}

TEST_CASE("nonnegative root") {
  CHECK(nonnegative_root(1.0, 0.0, 1.0) == 0.0);
  CHECK(nonnegative_root(1.0, 3.0, 2.0) == 0.0);
  CHECK(nonnegative_root(1.0, -3.0, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("node report") {
  CHECK(node_report(1.0, 1.0, 1.0) == 0.0);
  CHECK(node_report(1.0 + 1e-12, 1.0, 1.0) == 1.0);
  CHECK(node_report(0.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("CP GLR is rotation invariant and reduces to one slot") {
  OfdmParams p;
  GlrCp a(p, 20.0, 50, false);
  GlrCp b(p, 20.0, 50, false);
  Rng rng(46);
  const Complex rot = std::polar(1.0, 2 * kPi * 0.37);
  for (int k = 0; k < 120; ++k) {
    std::vector<Complex> r(64);
    for (auto& v : r) v = complex_normal(rng, 50.0);
    std::vector<Complex> rr(64);
    for (std::size_t m = 0; m < 64; ++m) rr[m] = r[m] * rot;
    const double wa = a.step_statistics(r, 20.0);
    const double wb = b.step_statistics(rr, 20.0);
    CHECK(wa == doctest::Approx(wb).epsilon(1e-10));
  }

  GlrCp c(p, 20.0, 50, false);
  std::vector<Complex> one(64);
  one[7] = {3.0, 4.0};
  CHECK(c.step_statistics(one, 20.0) == doctest::Approx(25.0 * 16 / 400.0));
  CHECK(c.snapshot().argmax == 7);
  GlrCp z(p, 20.0, 50, false);
  CHECK(z.step_statistics(std::vector<Complex>(64), 20.0) == 0.0);
}

TEST_CASE("CP GLR matches a direct window search") {
  OfdmParams p{4, 2};
  const std::size_t window = 6;
  GlrCp g(p, 3.0, window, false);
  Rng rng(47);
  std::vector<std::vector<Complex>> hist;
  for (int j = 0; j < 40; ++j) {
    std::vector<Complex> r(4);
    for (auto& v : r) v = complex_normal(rng, 2.0);
    hist.push_back(r);
    const double w = g.step_statistics(r, 3.0);
    double best = 0.0;
    for (std::size_t m = 0; m < 4; ++m) {
      for (std::size_t t = hist.size() > window ? hist.size() - window : 0; t < hist.size(); ++t) {
        Complex s{};
        for (std::size_t q = t; q < hist.size(); ++q) s += hist[q][m];
        const double k = static_cast<double>(hist.size() - t);
        best = std::max(best, std::norm(s) / (k * 9.0 / 2.0));
      }
    }
    REQUIRE(w == doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("energy GLR") {
  OfdmParams p;
  GlrEnergy g(p, 20.0, 200);
  for (int k = 0; k < 20; ++k) {
    CHECK(g.step_value(0.0) == 0.0);
    CHECK(g.snapshot().theta1 == 0.0);
  }
  // one-slot window: two-term LLR with the plug-in power
  for (double v : {-3.0, 0.5, 2.0, 6.0}) {
    GlrEnergy one(p, 20.0, 1);
    const double w = one.step_value(v);
    const double t = solve_theta1_glr(v, v * v, 1, 20.0, 80);
    CHECK(w == doctest::Approx(std::max(0.0, energy_llr(v + 20.0, t, 20.0, 80))).epsilon(1e-10));
  }
  GlrEnergy drift(p, 20.0, 1000);
  double prev = 0.0;
  for (int k = 0; k < 300; ++k) {
    const double w = drift.step_value(3.0);
    CHECK(w >= prev);
    prev = w;
  }
  CHECK(prev > 100.0);
}

TEST_CASE("MGLR") {
  OfdmParams p;
  MglrEnergy a(p, 10, 100);
  for (int k = 0; k < 10; ++k) CHECK(a.step_value(20.0) == 0.0);
  for (int k = 0; k < 100; ++k) CHECK(a.step_value(20.0) == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(48);
  int crossed = 0;
  int rising = 0;
  for (int t = 0; t < 200; ++t) {
    MglrEnergy m(p, 50, 200);
    bool over = false;
    double s_pre = 0.0, sq_pre = 0.0, s_post = 0.0, sq_post = 0.0;
    for (int k = 1; k <= 250; ++k) {
      const double mean = k >= 100 ? 22.0 : 20.0;
      const double v = mean + mean / std::sqrt(80.0) * standard_normal(rng);
      (k >= 100 ? s_post : s_pre) += v;
      (k >= 100 ? sq_post : sq_pre) += v * v;
      over = m.step_value(v) > 10.0 || over;
    }
    crossed += over;
    rising += solve_theta1_mglr(s_post, sq_post, 151, 80) > solve_theta1_mglr(s_pre, sq_pre, 99, 80);
  }
  CHECK(crossed >= 195);
  CHECK(rising > 190);

  // larger step: every path crosses
  crossed = 0;
  for (int t = 0; t < 200; ++t) {
    MglrEnergy m(p, 50, 200);
    bool over = false;
    for (int k = 1; k <= 250; ++k) {
      const double mean = k >= 100 ? 24.0 : 20.0;
      over = m.step_value(mean + mean / std::sqrt(80.0) * standard_normal(rng)) > 10.0 || over;
    }
    crossed += over;
  }
  CHECK(crossed == 200);
  CHECK_THROWS_AS(MglrEnergy(p, 0, 100), ParameterError);
}

TEST_CASE("running estimates") {
  RunningNoiseEstimate n;
  CHECK_THROWS_AS(n.value(), StateError);
  std::vector<Complex> c(80, std::polar(std::sqrt(5.0), 0.2));
  for (int k = 0; k < 5; ++k) CHECK(n.update(c) == doctest::Approx(5.0));

  Rng rng(49);
  RunningNoiseEstimate m;
  std::vector<Complex> x(80);
  for (int k = 0; k < 100; ++k) {
    for (auto& v : x) v = complex_normal(rng, 20.0);
    m.update(x);
  }
  CHECK(std::abs(m.value() - 20.0) / 20.0 < 0.05);
}

TEST_CASE("detector factory") {
  OfdmParams p;
  const NodeScenario design{20.0, 2.0};
  for (auto a : {SequentialAlgorithm::kCpCusum, SequentialAlgorithm::kCpBank,
                 SequentialAlgorithm::kCpGlr, SequentialAlgorithm::kCpGlrAll,
                 SequentialAlgorithm::kEnergyCusum, SequentialAlgorithm::kEnergyGlr,
                 SequentialAlgorithm::kEnergyMglr}) {
    SequentialDetectorConfig cfg;
    cfg.algorithm = a;
    auto d = make_node_detector(cfg, p, design);
    CHECK(d->id() == algorithm_id(a));
    CHECK(parse_algorithm(algorithm_id(a)) == a);
    Rng rng(50);
    for (int k = 0; k < 3; ++k) {
      SampleBlock x(d->samples_needed());
      for (auto& v : x) v = complex_normal(rng, 20.0);
      CHECK(d->step(x) >= 0.0);
    }
    CHECK(d->slot() == 3);
  }
  CHECK_THROWS_AS(parse_algorithm("cp.unknown"), ParameterError);
}

}
