#include <doctest.h>

#include <numeric>
#include <sstream>

#include "c2v/common/binary_io.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/common/rng.hpp"

using namespace c2v;

TEST_CASE("counter rng draws are pure functions of key and counter") {
  const auto a = CounterRng::derive(7, "noise", 3);
  const auto b = CounterRng::derive(7, "noise", 3);
  const auto c = CounterRng::derive(7, "noise", 4);
  CHECK(a.key() == b.key());
  CHECK(a.key() != c.key());
  CHECK(a.uniform(12) == b.uniform(12));
  CHECK(CounterRng::derive(7, "noise").key() != CounterRng::derive(7, "shuffle").key());
}

TEST_CASE("normal draws have unit moments") {
  const CounterRng rng(99);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(i);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform integer draws stay in range") {
  RngStream s(CounterRng(5));
  for (int i = 0; i < 1000; ++i) CHECK(s.below(7) < 7);
}

TEST_CASE("parallel_for covers each index once for any worker count") {
  for (int workers : {1, 2, 3, 8}) {
    set_worker_count(workers);
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    }, 1);
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  set_worker_count(0);
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  set_worker_count(4);
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t b, std::size_t) {
    if (b > 0) throw ValidationError("boom");
  }, 1), ValidationError);
  set_worker_count(0);
}

TEST_CASE("pairwise_sum matches a long-double reference") {
  std::vector<double> v(12345);
  const CounterRng rng(3);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = rng.uniform(i) - 0.5;
    ref += v[i];
  }
  CHECK(std::abs(pairwise_sum(v) - static_cast<double>(ref)) < 1e-12);
  std::vector<float> f(v.begin(), v.end());
  long double reff = 0.0L;
  for (float x : f) reff += x;
  CHECK(std::abs(pairwise_sum(std::span<const float>(f)) - static_cast<double>(reff)) < 1e-9);
}

TEST_CASE("little-endian primitives round-trip") {
  std::stringstream ss;
  io::write_le<std::uint32_t>(ss, 0xdeadbeefu);
  io::write_le<double>(ss, -1.25);
  CHECK(io::read_le<std::uint32_t>(ss) == 0xdeadbeefu);
  CHECK(io::read_le<double>(ss) == -1.25);
  CHECK_THROWS_AS(io::read_le<std::uint64_t>(ss), ValidationError);
}
