#include <doctest.h>

#include <random>

#include "rnls/melnikov.hpp"

using namespace rnls;

namespace {

const Site e1{1, 0}, e1m{-1, 0};

FrequencyData default_freq(int d, int R = 8) {
  TangentialSet I({e1, e1m});
  const auto cls = classify_all(I, R);
  return frequencies(I, cls, d, 2);
}

// A generic interior point; structured choices (equal components, equal
// spacings across components) sit on resonance hyperplanes and must be
// avoided.
std::vector<std::vector<double>> generic_point(const ParameterBox& box) {
  std::vector<std::vector<double>> xi;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.05, 0.45);
  for (int h = 0; h < box.d; ++h) {
    std::vector<double> row;
    for (int a = 0; a < box.b; ++a) row.push_back(box.lower(h) + u(rng));
    xi.push_back(row);
  }
  return xi;
}

}  // namespace

TEST_CASE("parameter box separation") {
  ParameterBox box{3, 2};
  CHECK(box.min_l1_separation() == doctest::Approx(1.0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> xi;
    for (int h = 0; h < box.d; ++h) {
      std::vector<double> row;
      for (int a = 0; a < box.b; ++a) row.push_back(box.lower(h) + 0.5 * u(rng));
      xi.push_back(row);
    }
    CHECK(box.contains(xi));
    for (int h = 0; h < box.d; ++h)
      for (int h2 = h + 1; h2 < box.d; ++h2) {
        double l1 = 0;
        for (int a = 0; a < box.b; ++a) l1 += std::abs(xi[h][a] - xi[h2][a]);
        CHECK(l1 >= box.min_l1_separation());
      }
  }
}

TEST_CASE("single-point check at a generic point passes at moderate gamma") {
  const auto freq = default_freq(2);
  ParameterBox box{2, 2};
  const auto rep =
      check_conditions(generic_point(box), 0.1, 1e-4, 7.0, 8, 8, freq);
  CHECK(rep.pass);
  CHECK(rep.min_margin >= 1e-4);
  // every condition family was exercised and the counts are consistent
  for (const auto& st : rep.conditions) {
    CHECK(st.checked > 0);
    if (st.name != "Mel14")
      CHECK(st.auto_passed + st.numeric + st.kernel == st.checked);
  }
}

TEST_CASE("gap condition margin matches the box geometry") {
  const auto freq = default_freq(2);
  // xi_1 = (0.75, 0.75), xi_2 = (1.75, 1.75): gap = 2/(2 pi^2)
  const std::vector<std::vector<double>> xi{{0.75, 0.75}, {1.75, 1.75}};
  const auto rep = check_conditions(xi, 0.1, 1e-3, 7.0, 4, 6, freq);
  CHECK(rep.mel14_margin == doctest::Approx(1.0 / (kPi * kPi)));
  CHECK(rep.mel14_margin > rep.mel14_bound);
  CHECK(rep.mel14_bound == doctest::Approx(2.0 / kFourPiSq));

  // the corner of adjacent boxes realizes the b/(4 pi^2) bound exactly
  const std::vector<std::vector<double>> corner{{1.0, 1.0}, {1.5, 1.5}};
  const auto rep2 = check_conditions(corner, 0.1, 1e-3, 7.0, 4, 6, freq);
  CHECK(rep2.mel14_margin == doctest::Approx(2.0 / kFourPiSq));
}

TEST_CASE("auto-pass of nonzero integer parts is xi-independent") {
  const auto freq = default_freq(1);
  // With d = 1, b = 2 every k with r_int != 0 auto-passes; compare the
  // numeric counts at two box corners: identical plans.
  const std::vector<std::vector<double>> lo{{0.5, 0.5}}, hi{{1.0, 1.0}};
  const auto r1 = check_conditions(lo, 0.1, 1e-5, 5.0, 6, 6, freq);
  const auto r2 = check_conditions(hi, 0.1, 1e-5, 5.0, 6, 6, freq);
  for (std::size_t c = 0; c < r1.conditions.size(); ++c) {
    CHECK(r1.conditions[c].checked == r2.conditions[c].checked);
    CHECK(r1.conditions[c].auto_passed == r2.conditions[c].auto_passed);
    CHECK(r1.conditions[c].numeric == r2.conditions[c].numeric);
  }
}

TEST_CASE("invalid configurations are rejected") {
  const auto freq = default_freq(1);
  ParameterBox box{1, 2};
  CHECK_THROWS_AS(
      check_conditions(generic_point(box), 0.1, -1.0, 7.0, 5, 5, freq),
      InvalidConfig);
  // eps too large: eps^-4 cannot dominate
  CHECK_THROWS_AS(
      check_conditions(generic_point(box), 0.9, 1e-3, 7.0, 5, 5, freq),
      InvalidConfig);
  CHECK_THROWS_AS(scan_measure(box, {1e-3, -1e-4}, 7.0, 0.1, 5, 5, 10, 1, freq),
                  InvalidConfig);
}

TEST_CASE("scan: determinism, monotonicity, vanishing exclusion") {
  const auto freq = default_freq(2);
  ParameterBox box{2, 2};
  const std::vector<double> gammas{1e-2, 1e-3, 1e-4, 1e-5};
  const auto s1 = scan_measure(box, gammas, 7.0, 0.1, 6, 6, 400, 99, freq, 2);
  const auto s2 = scan_measure(box, gammas, 7.0, 0.1, 6, 6, 400, 99, freq, 1);
  REQUIRE(s1.rows.size() == s2.rows.size());
  for (std::size_t i = 0; i < s1.rows.size(); ++i) {
    CHECK(s1.rows[i].excluded == s2.rows[i].excluded);  // thread-count free
    CHECK(s1.rows[i].fraction == s2.rows[i].fraction);
  }
  // nested exclusion sets: fraction monotone non-increasing in gamma
  for (std::size_t i = 1; i < s1.rows.size(); ++i)
    CHECK(s1.rows[i].fraction <= s1.rows[i - 1].fraction);
  // different seed changes samples but not the qualitative shape
  const auto s3 = scan_measure(box, gammas, 7.0, 0.1, 6, 6, 400, 7, freq, 2);
  for (std::size_t i = 1; i < s3.rows.size(); ++i)
    CHECK(s3.rows[i].fraction <= s3.rows[i - 1].fraction);
  // Wilson interval brackets the estimate
  for (const auto& row : s1.rows) {
    CHECK(row.ci_low <= row.fraction);
    CHECK(row.fraction <= row.ci_high);
  }
}

TEST_CASE("non-degeneracy of the full Jacobian") {
  const auto f22 = default_freq(2);
  double det = 0.0;
  CHECK(check_nondegeneracy(f22, &det));
  const double block = -3.0 / (kFourPiSq * kFourPiSq);
  CHECK(det == doctest::Approx(block * block));

  TangentialSet I1({e1});
  const auto cls1 = classify_all(I1, 6);
  const auto f11 = frequencies(I1, cls1, 1, 1);
  CHECK(check_nondegeneracy(f11, &det));
  CHECK(det == doctest::Approx(1.0 / kFourPiSq));

  // 2b - 1 is never zero: nondegenerate for every b up to 16
  for (int b = 1; b <= 16; ++b)
    CHECK(verify_nondegeneracy(b).det_scaled != 0);
}
