#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "roughvol/asymvar.hpp"
#include "roughvol/tune.hpp"

using namespace roughvol;

TEST_CASE("scalar limiting variance pin") {
  const AsymCovMatrix m = chh_matrix_uncached(0.25, 0);
  REQUIRE(m.entries.rows() == 1);
  // 2.357487448313 is the fully converged sum; the truncated value must sit
  // within the reported tail bound of it
  CHECK(std::abs(m.entries(0, 0) - 2.357487448313) <= m.tail_bound + 1e-12);
  CHECK(m.entries(0, 0) == doctest::Approx(2.357487448313).epsilon(1e-8));

  // independent series form: 2 + 4 * sum of squared correlations
  double s = 0.0;
  for (long r = 1; r <= 2000000; ++r) {
    const double g = gamma_acf(0.25, r);
    s += g * g;
  }
  CHECK(m.entries(0, 0) == doctest::Approx(2.0 + 4.0 * s).epsilon(1e-7));
  CHECK(m.truncation_lag > 2);
  CHECK(m.tail_bound >= 0.0);
}

TEST_CASE("small matrix eigenvalues and symmetry") {
  const AsymCovMatrix m = chh_matrix_uncached(0.25, 2);
  REQUIRE(m.entries.rows() == 3);
  CHECK((m.entries - m.entries.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.entries);
  CHECK(es.eigenvalues()[0] == doctest::Approx(0.2615).epsilon(2e-3));
  CHECK(es.eigenvalues()[1] == doctest::Approx(1.3795).epsilon(2e-3));
  CHECK(es.eigenvalues()[2] == doctest::Approx(3.0743).epsilon(2e-3));
}

TEST_CASE("loose and tight truncation agree") {
  const AsymCovMatrix loose = chh_matrix_uncached(0.25, 2, 1e-3);
  const AsymCovMatrix tight = chh_matrix_uncached(0.25, 2, 1e-12);
  CHECK((loose.entries - tight.entries).cwiseAbs().maxCoeff() < 1e-2);
  CHECK(loose.truncation_lag < tight.truncation_lag);
}

TEST_CASE("near-Brownian limit") {
  const AsymCovMatrix m = chh_matrix_uncached(0.499, 0);
  CHECK(std::abs(m.entries(0, 0) - 2.0) < 0.01);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(chh_matrix_uncached(0.5, 2), input_error);
  CHECK_THROWS_AS(chh_matrix_uncached(0.0, 2), input_error);
  CHECK_THROWS_AS(chh_matrix_uncached(-0.1, 2), input_error);
  CHECK_THROWS_AS(chh_matrix_uncached(0.3, -1), input_error);
  CHECK_THROWS_AS(chh_matrix_uncached(0.3, 2, 0.0), input_error);
}

TEST_CASE("cache returns one stable object") {
  const AsymCovMatrix& a = chh_matrix(0.317, 5);
  const AsymCovMatrix& b = chh_matrix(0.317, 5);
  CHECK(&a == &b);
  const AsymCovMatrix& c = chh_matrix(0.317, 5, 1e-10);
  CHECK(&a != &c);
}

TEST_CASE("variance pins at the anchor roughness") {
  const int R = 60;
  const double h = 0.35;
  const WeightConfig wc = initial_weights(h, R);
  const AsymCovMatrix& covm = chh_matrix(h, R);

  // reference values computed with a much deeper series truncation; the
  // default truncation stops near 1e-12 term size, so allow that slack here
  const double vh0 = var_h0(wc.a, wc.b, h, covm);
  CHECK(vh0 == doctest::Approx(0.5899817244840158).epsilon(1e-5));

  const double vc0 =
      var_c_plugin(wc.a0, wc.b0, wc.c_no_lag0(), h, covm);
  CHECK(vc0 == doctest::Approx(185.02067897580767).epsilon(1e-5));

  const LadderVariances lv = var_ladder(wc.a, wc.b, wc.c, h, 50, covm);
  CHECK(lv.var_h == doctest::Approx(8.153384081291632).epsilon(1e-5));
  CHECK(lv.var_c == doctest::Approx(185.02067897582575).epsilon(1e-5));

  // deepening the truncation moves the variances very little
  const AsymCovMatrix deep = chh_matrix_uncached(h, R, 1e-14);
  CHECK(var_ladder(wc.a, wc.b, wc.c, h, 50, deep).var_c ==
        doctest::Approx(lv.var_c).epsilon(1e-4));

  // with these weights the final correction direction is insensitive to the
  // lag-0 zeroing, so both tracks share one limiting variance for C
  CHECK(lv.var_c == doctest::Approx(vc0).epsilon(1e-9));

  // the first step is already the fixed point of the recursion
  REQUIRE(lv.var_c_k.size() == 50);
  CHECK(std::abs(lv.var_c_k.front() - lv.var_c_k.back()) <
        1e-10 * lv.var_c_k.front());
  CHECK(std::abs(lv.var_h_k.front() - lv.var_h_k.back()) <
        1e-10 * lv.var_h_k.front());
  CHECK(lv.var_h == lv.var_h_k.back());
}

TEST_CASE("variances are scale invariant in each weight vector") {
  const int R = 60;
  const double h = 0.3;
  const WeightConfig wc = initial_weights(0.35, R);
  const AsymCovMatrix& covm = chh_matrix(h, R);

  const double base_h0 = var_h0(wc.a0, wc.b0, h, covm);
  CHECK(var_h0(2.5 * wc.a0, wc.b0, h, covm) ==
        doctest::Approx(base_h0).epsilon(1e-12));
  CHECK(var_h0(wc.a0, -3.0 * wc.b0, h, covm) ==
        doctest::Approx(base_h0).epsilon(1e-12));

  const double base_c = var_c_plugin(wc.a0, wc.b0, wc.c_no_lag0(), h, covm);
  CHECK(var_c_plugin(0.1 * wc.a0, 7.0 * wc.b0, wc.c_no_lag0(), h, covm) ==
        doctest::Approx(base_c).epsilon(1e-12));
  CHECK(var_c_plugin(wc.a0, wc.b0, 42.0 * wc.c_no_lag0(), h, covm) ==
        doctest::Approx(base_c).epsilon(1e-12));

  const double base_l = var_ladder(wc.a, wc.b, wc.c, h, 50, covm).var_c;
  CHECK(var_ladder(5.0 * wc.a, 0.25 * wc.b, -2.0 * wc.c, h, 50, covm).var_c ==
        doctest::Approx(base_l).epsilon(1e-12));
}

TEST_CASE("ladder variance input checks") {
  const WeightConfig wc = initial_weights(0.35, 60);
  const AsymCovMatrix& covm = chh_matrix(0.35, 60);
  Vec bad_b = wc.b;
  bad_b[0] = 0.5;
  CHECK_THROWS_AS(var_ladder(wc.a, bad_b, wc.c, 0.35, 50, covm), input_error);
  CHECK_THROWS_AS(var_ladder(wc.a, wc.b, wc.c, 0.35, 1, covm), input_error);
}
