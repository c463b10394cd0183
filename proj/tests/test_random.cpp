#include "linfa/parallel.hpp"
#include "linfa/random.hpp"

#include "support.hpp"

#include <doctest.h>

#include <atomic>

using namespace linfa;
using namespace linfa::testing;

TEST_CASE("stream seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t c = 0; c < 1000; ++c) seen.insert(stream_seed(42, c));
  CHECK(seen.size() == 1000);
  CHECK(stream_seed(42, 7) == stream_seed(42, 7));
  CHECK(stream_seed(42, 7) != stream_seed(43, 7));
}

TEST_CASE("factor model draws have the model covariance") {
  Rng rng(121);
  const FactorParams p = random_params(rng, 4, 2);
  Matrix z;
  const Matrix x = draw_factor_model(restrict(p, {0, 1, 2, 3}), 200000, rng, &z);
  CHECK(z.rows() == 200000);
  CHECK(z.cols() == 2);
  const Matrix emp = x.transpose() * x / 200000.0;
  CHECK(max_abs(emp - dense_covariance(p)) < 0.05 * max_abs(dense_covariance(p)));
  CHECK(max_abs(z.transpose() * z / 200000.0 - Matrix::Identity(2, 2)) < 0.02);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 5) throw NumericError("boom");
                               }),
                  NumericError);
  std::atomic<int> count{0};
  parallel_for(0, 4, [&](std::size_t) { ++count; });
  CHECK(count == 0);
}
