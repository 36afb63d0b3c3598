#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "blvt/errors.hpp"
#include "blvt/neutral/neutral.hpp"
#include "blvt/portfolio/portfolio.hpp"

using doctest::Approx;

namespace {

// Independent two-pass OLS, kept deliberately separate from the library code.
struct OlsFit {
  double beta = 0.0;
  double alpha = 0.0;
  double se_beta = 0.0;  // standard error of the slope
};

OlsFit ols_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  OlsFit f;
  f.beta = sxy / sxx;
  f.alpha = my - f.beta * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.alpha + f.beta * x[i]);
    rss += r * r;
  }
  f.se_beta = std::sqrt(rss / (static_cast<double>(n) - 2.0) / sxx);
  return f;
}

}  // namespace

TEST_CASE("estimate_beta recovers an exact line to machine precision") {
  std::vector<double> yd, yu;
  for (int i = 0; i < 48; ++i) {
    const double d = 1.0 + 0.01 * i;
    yd.push_back(d);
    yu.push_back(2.0 - 0.5 * d);
  }
  const auto b = blvt::neutral::estimate_beta(yu, yd, 48);
  CHECK(b.beta_hat == Approx(-0.5).epsilon(1e-14));
  CHECK(b.alpha_hat == Approx(2.0).epsilon(1e-14));
  CHECK(b.window == 48);
}

TEST_CASE("estimate_beta matches a hand-computed fit on frozen points") {
  // Exact-rational oracle: with the last 4 points of the series below,
  // beta = -4 and alpha = 137/2 exactly; over all 5 points beta = -107/26.
  const std::vector<double> yd = {10.0, 12.0, 9.0, 11.0, 10.0};
  const std::vector<double> yu = {30.0, 21.0, 33.0, 24.0, 28.0};

  const auto b4 = blvt::neutral::estimate_beta(yu, yd, 4);
  CHECK(b4.beta_hat == Approx(-4.0).epsilon(1e-14));
  CHECK(b4.alpha_hat == Approx(68.5).epsilon(1e-14));

  const auto b5 = blvt::neutral::estimate_beta(yu, yd, 5);
  CHECK(b5.beta_hat == Approx(-107.0 / 26.0).epsilon(1e-14));
  CHECK(b5.alpha_hat == Approx(70.0).epsilon(1e-14));
}

TEST_CASE("estimate_beta uses only the trailing K samples") {
  // Garbage prefix must not leak into the window.
  std::vector<double> yd = {500.0, -3.0, 1000.0};
  std::vector<double> yu = {1.0, 1.0, 1.0};
  for (int i = 0; i < 48; ++i) {
    const double d = 1.0 + 0.01 * i;
    yd.push_back(d);
    yu.push_back(3.0 - 0.7 * d);
  }
  const auto b = blvt::neutral::estimate_beta(yu, yd, 48);
  CHECK(b.beta_hat == Approx(-0.7).epsilon(1e-14));
  CHECK(b.alpha_hat == Approx(3.0).epsilon(1e-14));
}

TEST_CASE("estimate_beta on a noisy line stays within three standard errors") {
  std::mt19937_64 rng(20210704);
  std::normal_distribution<double> noise(0.0, 1e-3);
  std::uniform_real_distribution<double> level(8.0, 12.0);
  std::vector<double> yd, yu;
  for (int i = 0; i < 48; ++i) {
    const double d = level(rng);
    yd.push_back(d);
    yu.push_back(20.0 - 0.8 * d + noise(rng));
  }
  const auto b = blvt::neutral::estimate_beta(yu, yd, 48);
  const auto f = ols_oracle(yd, yu);
  CHECK(b.beta_hat == Approx(f.beta).epsilon(1e-12));
  CHECK(b.alpha_hat == Approx(f.alpha).epsilon(1e-12));
  CHECK(std::abs(b.beta_hat - (-0.8)) < 3.0 * f.se_beta);
}

TEST_CASE("estimate_beta agrees with the independent oracle on random windows") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ud(5.0, 15.0);
  std::normal_distribution<double> eps(0.0, 0.05);
  for (int rep = 0; rep < 200; ++rep) {
    const double slope = -1.5 + 0.01 * rep;  // spans negative and positive slopes
    std::vector<double> yd, yu;
    for (int i = 0; i < 48; ++i) {
      const double d = ud(rng);
      yd.push_back(d);
      yu.push_back(25.0 + slope * d + eps(rng));
    }
    const auto b = blvt::neutral::estimate_beta(yu, yd, 48);
    const auto f = ols_oracle(yd, yu);
    CHECK(b.beta_hat == Approx(f.beta).epsilon(1e-11));
    CHECK(b.alpha_hat == Approx(f.alpha).epsilon(1e-11));
  }
}

TEST_CASE("estimate_beta guards") {
  std::vector<double> flat(48, 7.25);
  std::vector<double> yu(48, 1.0);
  CHECK_THROWS_AS(blvt::neutral::estimate_beta(yu, flat, 48), blvt::DegenerateRegressorError);

  // Variance threshold is on the sample variance of the regressor.
  std::vector<double> tiny(48, 7.25);
  tiny[0] += 1e-9;
  CHECK_THROWS_AS(blvt::neutral::estimate_beta(yu, tiny, 48), blvt::DegenerateRegressorError);

  std::vector<double> shrt = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(blvt::neutral::estimate_beta(shrt, shrt, 4), blvt::InsufficientHistoryError);
  CHECK_THROWS_AS(blvt::neutral::estimate_beta(shrt, shrt, 1), blvt::RangeError);
}

TEST_CASE("neutral_weights hand examples") {
  blvt::neutral::BetaEstimate b;
  b.beta_hat = -0.5;
  const auto w1 = blvt::neutral::neutral_weights(b, 1.0, 2.0);
  CHECK(w1.w_u == Approx(0.5).epsilon(1e-14));
  CHECK(w1.w_d == Approx(0.5).epsilon(1e-14));

  b.beta_hat = -1.0;
  const auto w2 = blvt::neutral::neutral_weights(b, 3.7, 3.7);
  CHECK(w2.w_u == Approx(0.5).epsilon(1e-14));
  CHECK(w2.w_d == Approx(0.5).epsilon(1e-14));

  // beta = -4/5, y_u = 25, y_d = 10: w_u = 25/33 exactly.
  b.beta_hat = -0.8;
  const auto w3 = blvt::neutral::neutral_weights(b, 25.0, 10.0);
  CHECK(w3.w_u == Approx(25.0 / 33.0).epsilon(1e-14));
  CHECK(w3.w_d == Approx(8.0 / 33.0).epsilon(1e-14));
}

TEST_CASE("neutral_weights rejects non-negative beta and bad prices") {
  blvt::neutral::BetaEstimate b;
  b.beta_hat = 0.3;
  CHECK_THROWS_AS(blvt::neutral::neutral_weights(b, 1.0, 1.0), blvt::NeutralInfeasibleError);
  b.beta_hat = 0.0;
  CHECK_THROWS_AS(blvt::neutral::neutral_weights(b, 1.0, 1.0), blvt::NeutralInfeasibleError);
  b.beta_hat = -0.5;
  CHECK_THROWS_AS(blvt::neutral::neutral_weights(b, 0.0, 1.0), blvt::RangeError);
  CHECK_THROWS_AS(blvt::neutral::neutral_weights(b, 1.0, -2.0), blvt::RangeError);
}

TEST_CASE("neutral_weights satisfies the budget exactly and stays long-only") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ub(-5.0, -1e-6);
  std::uniform_real_distribution<double> up(0.01, 100.0);
  for (int i = 0; i < 2000; ++i) {
    blvt::neutral::BetaEstimate b;
    b.beta_hat = ub(rng);
    const double yu = up(rng), yd = up(rng);
    const auto w = blvt::neutral::neutral_weights(b, yu, yd);
    // Budget holds exactly by construction, not via normalization.
    CHECK(w.w_u + w.w_d == 1.0);
    CHECK(w.w_u > 0.0);
    CHECK(w.w_d > 0.0);
    // Volume ratio identity: v_d / v_u = -beta.
    const double vu = w.w_u / yu, vd = w.w_d / yd;
    CHECK(vd / vu == Approx(-b.beta_hat).epsilon(1e-12));
  }
}

TEST_CASE("a neutral portfolio is value-invariant on an exactly linear pair") {
  // With y_u = alpha + beta * y_d held exactly, the hedge is exact for finite
  // moves, not merely to first order: value change stays at rounding level.
  const double alpha = 20.0, beta = -0.7;

  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> ud(5.0, 15.0);
  std::uniform_real_distribution<double> step(-0.2, 0.2);
  for (int rep = 0; rep < 500; ++rep) {
    const double yd0 = ud(rng);
    const double yu0 = alpha + beta * yd0;
    blvt::neutral::BetaEstimate b;
    b.beta_hat = beta;
    const auto w = blvt::neutral::neutral_weights(b, yu0, yd0);

    auto s = blvt::portfolio::make_state({w.w_u, w.w_d}, 1.0, {yu0, yd0}, 0);
    const double yd1 = yd0 * (1.0 + step(rng));
    const double yu1 = alpha + beta * yd1;
    const auto moved = blvt::portfolio::apply_price_move(s, {yu1, yd1});
    CHECK(moved.value_prime == Approx(1.0).epsilon(1e-9));
  }
}
