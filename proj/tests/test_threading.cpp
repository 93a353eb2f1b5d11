#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fregi/threading.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

using namespace fregi;

namespace {

std::vector<VecX> make_points(int n) {
  std::vector<VecX> pts;
  for (int i = 0; i < n; ++i) {
    VecX x(3);
    x << i * 0.5, -i, i * i * 0.25;
    pts.push_back(x);
  }
  return pts;
}

}  // namespace

TEST_CASE("parallel_for covers every index exactly once") {
  ThreadPool pool(4);
  CHECK(pool.thread_count() == 4);

  const std::size_t n = 1000;
  std::vector<std::atomic<int>> hits(n);
  pool.parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);

  // Reusable across submissions.
  std::vector<std::atomic<int>> again(10);
  pool.parallel_for(10, [&](std::size_t i) { again[i].fetch_add(3); });
  for (std::size_t i = 0; i < 10; ++i) CHECK(again[i].load() == 3);

  // Zero-count submission is a no-op.
  pool.parallel_for(0, [&](std::size_t) { std::abort(); });
}

TEST_CASE("batch_eval output is index-ordered regardless of pool") {
  const auto pts = make_points(257);
  auto f = [](const VecX& x) { return std::sin(x[0]) + x[1] * x[2]; };

  const std::vector<double> serial = batch_eval(nullptr, pts, f);
  REQUIRE(serial.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(serial[i] == f(pts[i]));

  ThreadPool one(1);
  ThreadPool many(5);
  const std::vector<double> via_one = batch_eval(&one, pts, f);
  const std::vector<double> via_many = batch_eval(&many, pts, f);
  CHECK(via_one == serial);
  CHECK(via_many == serial);

  CHECK(batch_eval(&many, {}, f).empty());
}

TEST_CASE("worker count resolution prefers the environment variable") {
  // Explicit argument wins.
  ThreadPool explicit_two(2);
  CHECK(explicit_two.thread_count() == 2);

  setenv("FLUOROREGI_THREADS", "3", 1);
  CHECK(default_thread_count() == 3);
  ThreadPool from_env(0);
  CHECK(from_env.thread_count() == 3);

  // Garbage or non-positive values fall back to hardware concurrency.
  setenv("FLUOROREGI_THREADS", "not-a-number", 1);
  CHECK(default_thread_count() >= 1);
  setenv("FLUOROREGI_THREADS", "-2", 1);
  CHECK(default_thread_count() >= 1);
  unsetenv("FLUOROREGI_THREADS");
  CHECK(default_thread_count() >= 1);
}
