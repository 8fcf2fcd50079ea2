#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dice/stats.hpp"
#include "support/oracles.hpp"

TEST_CASE("chi-square tail at the 0.05 critical value") {
  REQUIRE_THAT(dice::chi_square_sf_1df(3.841),
               Catch::Matchers::WithinAbs(0.0500, 5e-4));
}

TEST_CASE("chi-square tail at the 0.01 critical value") {
  REQUIRE_THAT(dice::chi_square_sf_1df(6.635),
               Catch::Matchers::WithinAbs(0.0100, 5e-4));
}

TEST_CASE("zero statistic keeps full mass") {
  REQUIRE(dice::chi_square_sf_1df(0.0) == 1.0);
}

TEST_CASE("tail probability matches numerical integration of the density") {
  for (double g : {0.1, 0.5, 1.0, 2.0, 3.841, 5.0, 6.635, 10.0, 15.0})
    REQUIRE_THAT(dice::chi_square_sf_1df(g),
                 Catch::Matchers::WithinAbs(oracle::chi2_sf_quadrature(g), 1e-9));
}

TEST_CASE("tail probability decreases in the statistic") {
  double prev = 1.0;
  for (double g = 0.25; g < 20.0; g += 0.25) {
    double p = dice::chi_square_sf_1df(g);
    REQUIRE(p < prev);
    prev = p;
  }
}

TEST_CASE("inverse tail inverts the tail") {
  for (double g : {0.3, 1.0, 3.841, 7.5}) {
    double p = dice::chi_square_sf_1df(g);
    REQUIRE_THAT(dice::chi_square_isf_1df(p), Catch::Matchers::WithinAbs(g, 1e-8));
  }
  REQUIRE_THAT(dice::chi_square_isf_1df(0.05),
               Catch::Matchers::WithinAbs(3.8415, 1e-3));
  REQUIRE_THROWS_AS(dice::chi_square_isf_1df(0.0), dice::NumericError);
  REQUIRE_THROWS_AS(dice::chi_square_isf_1df(1.0), dice::NumericError);
}
