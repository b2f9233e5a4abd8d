#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "c2v/common/error.hpp"
#include "c2v/diffusion/bridge.hpp"
#include "c2v/diffusion/sampler.hpp"
#include "c2v/diffusion/schedule.hpp"
#include "support/helpers.hpp"

using namespace c2v;
using namespace c2v::diffusion;

namespace {

// Denoiser that knows x0: predicts f = x_t - x0 exactly.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(Volume x0, Volume y) : x0_(std::move(x0)), y_(std::move(y)) {}
  Volume endpoint(const geometry::ConditionSet&) const override { return y_; }
  Volume predict(const Volume& x_t, const geometry::ConditionSet&, int) const override {
    Volume f(x_t.grid());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = x_t[i] - x0_[i];
    return f;
  }

 private:
  Volume x0_, y_;
};

Grid small_grid() { return Grid::centered(6, 1.0); }

}  // namespace

TEST_CASE("schedule endpoints, peak and symmetry") {
  for (int T : {2, 4, 10, 1000}) {
    const BridgeSchedule s(T);
    CHECK(s.alpha(0) == 0.0);
    CHECK(s.alpha(T) == 1.0);
    CHECK(s.delta(0) == 0.0);
    CHECK(s.delta(T) == 0.0);
    if (T % 2 == 0) CHECK(s.delta(T / 2) == 0.5);
    for (int t = 0; t <= T; ++t) {
      CHECK(s.alpha(t) == static_cast<double>(t) / T);
      CHECK(s.delta(t) == s.delta(T - t));
      CHECK(std::isfinite(s.c_xt(t)));
      CHECK(std::isfinite(s.c_st(t)));
      CHECK(std::isfinite(s.c_ft(t)));
      CHECK(std::isfinite(s.delta_tilde(t)));
    }
    for (int t = 2; t < T; ++t) {
      CHECK(s.delta_tilde(t) > 0.0);
      CHECK(s.delta_tilde(t) == doctest::Approx(s.delta_cond(t) * s.delta(t - 1) / s.delta(t)).epsilon(1e-12));
    }
    CHECK(s.delta_tilde(1) == 0.0);
  }
  CHECK_THROWS_AS(BridgeSchedule(1), ValidationError);
}

TEST_CASE("T=4 coefficients at t=2 by hand") {
  const BridgeSchedule s(4);
  CHECK(std::abs(s.delta_cond(2) - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(s.c_xt(2) - 1.0) < 1e-12);
  CHECK(std::abs(s.c_st(2) - 0.0) < 1e-12);
  CHECK(std::abs(s.c_ft(2) - 0.5) < 1e-12);
  CHECK(std::abs(s.delta_tilde(2) - 0.25) < 1e-12);
}

TEST_CASE("per-step coefficients follow the closed forms") {
  const BridgeSchedule s(37);
  for (int t = 2; t < 37; ++t) {
    const double a = s.alpha(t), ap = s.alpha(t - 1), d = s.delta(t), dp = s.delta(t - 1);
    const double dc = d - dp * (1 - a) * (1 - a) / ((1 - ap) * (1 - ap));
    CHECK(s.delta_cond(t) == doctest::Approx(dc).epsilon(1e-12));
    CHECK(s.c_xt(t) == doctest::Approx((dp / d) * (1 - a) / (1 - ap) + (dc / d) * (1 - ap)).epsilon(1e-12));
    CHECK(std::abs(s.c_st(t) - (ap - a * (1 - a) / (1 - ap) * (dp / d))) < 1e-12);
    CHECK(s.c_ft(t) == doctest::Approx((1 - ap) * dc / d).epsilon(1e-12));
  }
}

TEST_CASE("transition composed with the marginal reproduces the marginal (mean/variance algebra)") {
  // x_{t-1} = (1-a') x0 + a' y + sqrt(d') e1, x_t = A x_{t-1} + B y + sqrt(dc) e2.
  for (int T : {5, 17, 1000}) {
    const BridgeSchedule s(T);
    for (int t = 1; t < T; ++t) {
      const double A = s.transition_a(t), B = s.transition_b(t);
      const double x0_coef = A * (1 - s.alpha(t - 1));
      const double y_coef = A * s.alpha(t - 1) + B;
      const double var = A * A * s.delta(t - 1) + s.delta_cond(t);
      CHECK(std::abs(x0_coef - (1 - s.alpha(t))) < 1e-12);
      CHECK(std::abs(y_coef - s.alpha(t)) < 1e-12);
      CHECK(std::abs(var - s.delta(t)) < 1e-12);
    }
  }
}

TEST_CASE("ddim timesteps") {
  const auto ts = ddim_timesteps(1000, 10);
  REQUIRE(ts.size() == 10);
  CHECK(ts.front() == 1000);
  for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
  CHECK(ts.back() == 100);
  const auto full = ddim_timesteps(7, 7);
  CHECK(full == std::vector<int>{7, 6, 5, 4, 3, 2, 1});
  CHECK(ddim_timesteps(50, 1) == std::vector<int>{50});
  CHECK_THROWS_AS(ddim_timesteps(10, 0), ValidationError);
  CHECK_THROWS_AS(ddim_timesteps(10, 11), ValidationError);
}

TEST_CASE("jump to the previous step equals the per-step entry") {
  const BridgeSchedule s(20);
  for (int t = 1; t <= 20; ++t) {
    const auto j = s.jump(t, t - 1);
    CHECK(j.c_xt == s.c_xt(t));
    CHECK(j.c_st == s.c_st(t));
    CHECK(j.c_ft == s.c_ft(t));
    CHECK(j.delta_tilde == s.delta_tilde(t));
  }
}

TEST_CASE("implicit jump with eta 1 is the posterior jump") {
  const BridgeSchedule s(1000);
  for (const auto& [from, to] : std::vector<std::pair<int, int>>{{1000, 900}, {900, 800}, {500, 499}, {300, 0}, {7, 3}}) {
    const auto a = s.jump(from, to);
    const auto b = s.implicit_jump(from, to, 1.0);
    CHECK(b.c_xt == doctest::Approx(a.c_xt).epsilon(1e-12));
    CHECK(b.c_st == doctest::Approx(a.c_st).epsilon(1e-12));
    CHECK(b.c_ft == doctest::Approx(a.c_ft).epsilon(1e-12));
    CHECK(b.delta_tilde == doctest::Approx(a.delta_tilde).epsilon(1e-12));
  }
  CHECK_THROWS_AS(s.implicit_jump(10, 5, 1.5), ValidationError);
  CHECK_THROWS_AS(s.implicit_jump(10, 5, -0.1), ValidationError);
}

TEST_CASE("implicit jump keeps the bridge marginal for an exact prediction") {
  // x_s = (1 - a_s) x0 + a_s y + sqrt(d_s) e and f = a_s (y - x0) + sqrt(d_s) e
  // must land on (1 - a_p) x0 + a_p y + sqrt(d_p - sigma^2) e + sigma e'.
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = std::uniform_int_distribution<int>(2, 1000)(rng);
    const int from = std::uniform_int_distribution<int>(1, T)(rng);
    const int to = std::uniform_int_distribution<int>(0, from - 1)(rng);
    const double eta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const BridgeSchedule s(T);
    const auto c = s.implicit_jump(from, to, eta);
    const double as = s.alpha(from);
    const double ds = s.delta(from);
    CAPTURE(T);
    CAPTURE(from);
    CAPTURE(to);
    CHECK(c.c_xt * (1.0 - as) + c.c_ft * as == doctest::Approx(1.0 - s.alpha(to)).epsilon(1e-12));
    CHECK(c.c_xt * as + c.c_st - c.c_ft * as == doctest::Approx(s.alpha(to)).epsilon(1e-12));
    if (ds > 0.0) {
      const double carried = (c.c_xt - c.c_ft) * std::sqrt(ds);
      CHECK(carried * carried + c.delta_tilde == doctest::Approx(s.delta(to)).epsilon(1e-10));
    } else {
      CHECK(c.delta_tilde == doctest::Approx(s.delta(to)).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward sample endpoints and loss target identities") {
  const BridgeSchedule s(10);
  const Grid g = small_grid();
  const Volume x0 = test::random_volume(g, 1), xT = test::random_volume(g, 2);
  const Volume eps = noise_volume(g, 3, 0, 5);
  const Volume zero(g);
  CHECK(forward_sample(x0, xT, 0, eps, s) == x0);
  CHECK(forward_sample(x0, xT, 10, eps, s) == xT);
  const Volume t0 = loss_target(x0, xT, 0, eps, s);
  CHECK(std::all_of(t0.data().begin(), t0.data().end(), [](float v) { return v == 0.0f; }));
  const Volume tT = loss_target(x0, xT, 10, zero, s);
  for (std::size_t i = 0; i < x0.size(); ++i) CHECK(tT[i] == static_cast<float>(static_cast<double>(xT[i]) - x0[i]));
  CHECK_THROWS_AS(forward_sample(x0, Volume(Grid::centered(5, 1.0)), 3, eps, s), ShapeMismatch);
}

TEST_CASE("x_t minus the loss target recovers x0 within 4 ulp") {
  const BridgeSchedule s(1000);
  const Grid g = small_grid();
  const Volume x0 = test::random_volume(g, 4), xT = test::random_volume(g, 5);
  for (int t = 0; t <= 1000; t += 37) {
    const Volume eps = noise_volume(g, 6, 0, t);
    const Volume xt = forward_sample(x0, xT, t, eps, s);
    const Volume tgt = loss_target(x0, xT, t, eps, s);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      // ulp measured at the largest operand of the subtraction.
      const float scale = std::max({std::abs(x0[i]), std::abs(xt[i]), std::abs(tgt[i])});
      const float ulp = std::nextafter(scale, INFINITY) - scale;
      CHECK(std::abs((xt[i] - tgt[i]) - x0[i]) <= 4.0f * ulp);
    }
  }
}

TEST_CASE("l1 loss") {
  const Grid g = small_grid();
  const Volume a = test::random_volume(g, 8), b = test::random_volume(g, 9);
  CHECK(l1_loss(a, a) == 0.0);
  Volume c = a;
  for (auto& v : c.storage()) v += 1.0f;
  CHECK(l1_loss(c, a) == doctest::Approx(1.0).epsilon(1e-6));
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ref += std::abs(static_cast<double>(a[i]) - b[i]);
  CHECK(std::abs(l1_loss(a, b) - ref / a.size()) < 1e-12);
}

TEST_CASE("reverse step rules") {
  const BridgeSchedule s(10);
  const Grid g = small_grid();
  const Volume x = test::random_volume(g, 10), f = test::random_volume(g, 11), y = test::random_volume(g, 12);
  const Volume eps = noise_volume(g, 1, 0, 1);
  CHECK_THROWS_AS(reverse_step(x, f, y, 1, &eps, s), ValidationError);
  CHECK_NOTHROW(reverse_step(x, f, y, 1, nullptr, s));
  CHECK_THROWS_AS(reverse_step(x, f, y, 0, nullptr, s), ValidationError);
}

TEST_CASE("noise-free reverse trajectory follows the closed form") {
  const int T = 50;
  const BridgeSchedule s(T);
  std::vector<double> x0 = test::random_vector(64, 20), y = test::random_vector(64, 21);
  std::vector<double> x(64), f(64), next(64);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i];
  for (int t = T; t >= 1; --t) {
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = s.alpha(t) * (y[i] - x0[i]);
    reverse_step<double>(x, f, y, t, {}, s, next);
    x.swap(next);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(x[i] - ((1 - s.alpha(t - 1)) * x0[i] + s.alpha(t - 1) * y[i])) < 1e-10);
    }
  }
}

TEST_CASE("oracle denoiser sampling returns x0 for any step count") {
  const BridgeSchedule s(40);
  const Grid g = small_grid();
  const Volume x0 = test::random_volume(g, 30), y = test::random_volume(g, 31);
  const OracleDenoiser den(x0, y);
  for (int n : {1, 3, 10, 40}) {
    for (double eta : {0.0, 1.0}) {
      SampleOptions opt;
      opt.n_steps = n;
      opt.eta = eta;
      opt.seed = 2;
      const Volume out = sample(den, {}, s, opt);
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - x0[i]) < 1e-6);
    }
  }
}

TEST_CASE("sampling with the same seed is bitwise reproducible") {
  const BridgeSchedule s(30);
  const Grid g = small_grid();
  const Volume x0 = test::random_volume(g, 40), y = test::random_volume(g, 41);
  // A deliberately imperfect predictor so the posterior noise matters.
  class Damped final : public Denoiser {
   public:
    explicit Damped(Volume y) : y_(std::move(y)) {}
    Volume endpoint(const geometry::ConditionSet&) const override { return y_; }
    Volume predict(const Volume& x, const geometry::ConditionSet&, int) const override {
      Volume f = x;
      for (auto& v : f.storage()) v *= 0.3f;
      return f;
    }

   private:
    Volume y_;
  } den(y);
  SampleOptions opt;
  opt.n_steps = 30;
  opt.eta = 1.0;
  opt.seed = 77;
  const Volume a = sample(den, {}, s, opt);
  const Volume b = sample(den, {}, s, opt);
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0);
  opt.seed = 78;
  CHECK(!(sample(den, {}, s, opt) == a));
}

TEST_CASE("one reverse step matches the bridge posterior moments by Monte-Carlo") {
  // Draw x0 fixed, x_t from the marginal, take one noisy step with the exact
  // f, and compare x_{t-1} moments with the closed-form marginal at t-1.
  const int T = 20, t = 9, n = 100000;
  const BridgeSchedule s(T);
  const double x0 = 0.4, y = -0.7;
  const CounterRng r1(1001), r2(1002);
  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = r1.normal(i);
    const double xt = (1 - s.alpha(t)) * x0 + s.alpha(t) * y + std::sqrt(s.delta(t)) * e;
    const double f = xt - x0;
    const double z = r2.normal(i);
    const double prev = s.c_xt(t) * xt + s.c_st(t) * y - s.c_ft(t) * f + std::sqrt(s.delta_tilde(t)) * z;
    m += prev;
    m2 += prev * prev;
  }
  const double mean = m / n, var = m2 / n - mean * mean;
  const double want_mean = (1 - s.alpha(t - 1)) * x0 + s.alpha(t - 1) * y;
  const double want_var = s.delta(t - 1);
  CHECK(std::abs(mean - want_mean) < 3.0 * std::sqrt(want_var / n));
  CHECK(std::abs(var - want_var) < 3.0 * want_var * std::sqrt(2.0 / n));
}

TEST_CASE("forward marginal variance at T/2 by Monte-Carlo") {
  const BridgeSchedule s(1000);
  const Grid g = Grid::centered(47, 1.0);  // about 1e5 voxels, one draw each
  const Volume zero(g);
  const Volume eps = noise_volume(g, 12, 0, 500);
  const Volume xt = forward_sample(zero, zero, 500, eps, s);
  double m = 0.0, m2 = 0.0;
  for (float v : xt.data()) {
    m += v;
    m2 += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(xt.size());
  const double var = m2 / n - (m / n) * (m / n);
  CHECK(std::abs(var - 0.5) < 3.0 * 0.5 * std::sqrt(2.0 / n));
}
