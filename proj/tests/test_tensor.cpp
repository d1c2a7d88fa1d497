#include <cmath>
#include <vector>

#include "doctest.h"
#include "hyrsm/ops.hpp"
#include "hyrsm/rng.hpp"
#include "hyrsm/tape.hpp"
#include "hyrsm/tensor.hpp"

using namespace hyrsm;

namespace {

// Central finite difference of a scalar function along one coordinate.
template <typename F>
double fd_coord(F f, Tensor t, std::size_t i, double h = 1e-6) {
  Tensor up = t, down = t;
  up.values[i] += h;
  down.values[i] -= h;
  return (f(up) - f(down)) / (2.0 * h);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("tensor construction and access") {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0);
  CHECK(Tensor::scalar(4.5).item() == 4.5);
  CHECK(Tensor::full({3}, 2.0).values == std::vector<double>{2, 2, 2});
  CHECK_THROWS_AS(Tensor::matrix(2, 2, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}).item(), UsageError);
}

TEST_CASE("rng determinism and substreams") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  bool any_diff = false;
  Rng a2(42);
  for (int i = 0; i < 16; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  CHECK(any_diff);
  CHECK(substream_seed(1, kStreamSynth, 0) != substream_seed(1, kStreamEpisode, 0));
  CHECK(substream_seed(1, kStreamEpisode, 0) != substream_seed(1, kStreamEpisode, 1));
  CHECK(substream_seed(1, kStreamEpisode, 7) == substream_seed(1, kStreamEpisode, 7));
}

TEST_CASE("rng helpers stay in range") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.uniform_int(5) < 5);
  }
  std::vector<std::size_t> picked = rng.sample_indices(10, 4);
  CHECK(picked.size() == 4);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    CHECK(picked[i] < 10);
    for (std::size_t j = i + 1; j < picked.size(); ++j) CHECK(picked[i] != picked[j]);
  }
  CHECK_THROWS_AS(rng.sample_indices(3, 4), UsageError);
  CHECK_THROWS_AS(rng.uniform_int(0), UsageError);
}

TEST_CASE("tape is write once and backward once") {
  Tape tape;
  Tensor x = tape.watch(Tensor::matrix(1, 2, {1.0, 2.0}));
  Tensor s = mean_axis(tape, x, 1);
  Gradients g = tape.backward(s);
  CHECK(g.wrt(x).values == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(tape.backward(s), UsageError);
  CHECK_THROWS_AS(mean_axis(tape, x, 1), UsageError);
}

TEST_CASE("untracked and cross-tape inputs act as constants") {
  Tape tape;
  Tensor cst = Tensor::matrix(1, 2, {3.0, 4.0});
  Tensor x = tape.watch(Tensor::matrix(1, 2, {1.0, 2.0}));
  Tensor y = add(tape, x, cst);
  CHECK(!tape.tracks(cst));
  CHECK(tape.tracks(y));

  Tape other;
  Tensor foreign = other.watch(Tensor::matrix(1, 2, {5.0, 6.0}));
  Tensor z = add(tape, y, foreign);  // foreign belongs to `other`, gets no gradient here
  Gradients g = tape.backward(mean_axis(tape, z, 1));
  CHECK(g.wrt(x).values == std::vector<double>{0.5, 0.5});
}

TEST_CASE("matmul matches the naive triple loop") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + rng.uniform_int(16);
    const std::size_t k = 1 + rng.uniform_int(16);
    const std::size_t n = 1 + rng.uniform_int(16);
    Tensor a = random_normal({m, k}, rng);
    Tensor b = random_normal({k, n}, rng);
    Tape tape;
    Tensor c = matmul(tape, a, b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
        CHECK(rel_err(c.at(i, j), acc) < 1e-12);
      }
    }
  }
  Tape tape;
  CHECK_THROWS_AS(matmul(tape, Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                         Tensor::matrix(2, 2, {1, 2, 3, 4})),
                  DimensionError);
}

TEST_CASE("softmax rows are distributions") {
  SUBCASE("uniform on zeros") {
    Tape tape;
    Tensor out = softmax(tape, Tensor::matrix(1, 4, {0, 0, 0, 0}));
    for (double v : out.values) CHECK(v == 0.25);
  }
  SUBCASE("no overflow on huge logits") {
    Tape tape;
    Tensor out = softmax(tape, Tensor::matrix(1, 2, {1000.0, 0.0}));
    CHECK(out.finite());
    CHECK(out.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("row sums and shift invariance") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
      Tensor x = random_normal({4, 5}, rng, 3.0);
      Tape tape;
      Tensor out = softmax(tape, x);
      Tensor shifted = x;
      for (std::size_t r = 0; r < 4; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 5; ++c) sum += out.at(r, c);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        for (std::size_t c = 0; c < 5; ++c) shifted.at(r, c) += 0.773;
      }
      Tape tape2;
      Tensor out2 = softmax(tape2, shifted);
      CHECK(max_abs_diff(out, out2) <= 1e-10);
    }
  }
  SUBCASE("matches direct evaluation in extended precision") {
    Rng rng(5);
    Tensor x = random_normal({5}, rng, 2.0);
    Tape tape;
    Tensor out = softmax(tape, x);
    long double denom = 0.0L;
    for (double v : x.values) denom += expl(static_cast<long double>(v));
    for (std::size_t i = 0; i < 5; ++i) {
      const long double want = expl(static_cast<long double>(x.values[i])) / denom;
      CHECK(std::abs(out.values[i] - static_cast<double>(want)) <= 1e-15);
    }
  }
}

TEST_CASE("pointwise op values") {
  Tape tape;
  CHECK(sigmoid(tape, Tensor::scalar(0.0)).item() == 0.5);
  CHECK(hyrsm::tanh(tape, Tensor::scalar(0.0)).item() == 0.0);
  CHECK(gelu(tape, Tensor::scalar(0.0)).item() == 0.0);
  // x * Phi(x) at x=1: Phi(1) = 0.841344746...
  CHECK(gelu(tape, Tensor::scalar(1.0)).item() == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(hyrsm::tanh(tape, Tensor::scalar(0.3)).item() == -hyrsm::tanh(tape, Tensor::scalar(-0.3)).item());
}

TEST_CASE("cross entropy with logits") {
  Tape tape;
  Tensor uniform = Tensor::zeros({5});
  CHECK(std::abs(cross_entropy_with_logits(tape, uniform, 2).item() - std::log(5.0)) <= 1e-12);
  Tensor peaked = Tensor({2}, {50.0, 0.0});
  CHECK(cross_entropy_with_logits(tape, peaked, 0).item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cross_entropy_with_logits(tape, peaked, 1).item() == doctest::Approx(50.0).epsilon(1e-6));
  CHECK_THROWS_AS(cross_entropy_with_logits(tape, uniform, 5), UsageError);
}

TEST_CASE("cosine distance endpoints and degenerate input") {
  Tape tape;
  Tensor e1 = Tensor({2}, {1.0, 0.0});
  Tensor e2 = Tensor({2}, {0.0, 1.0});
  CHECK(cosine_distance(tape, e1, e1).item() == 0.0);
  CHECK(cosine_distance(tape, e1, e2).item() == 1.0);
  Tensor neg = Tensor({2}, {-2.0, 0.0});
  CHECK(cosine_distance(tape, e1, neg).item() == 2.0);

  Tape tape2;
  Tensor zero = tape2.watch(Tensor::zeros({2}));
  Tensor d = cosine_distance(tape2, zero, tape2.watch(e1));
  CHECK(d.item() == 1.0);
  Gradients g = tape2.backward(d);
  CHECK(g.wrt(zero).values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("shaping ops roundtrip values") {
  Tape tape;
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(transpose(tape, m).at(2, 1) == 6.0);
  CHECK(reshape(tape, m, {3, 2}).at(2, 1) == 6.0);
  CHECK(row_slice(tape, m, 1).values == std::vector<double>{4, 5, 6});
  Tensor stacked = stack_rows(tape, {row_slice(tape, m, 1), row_slice(tape, m, 0)});
  CHECK(stacked.at(0, 2) == 6.0);
  CHECK(stacked.at(1, 0) == 1.0);
  Tensor tiled = tile_rows(tape, Tensor({2}, {7.0, 8.0}), 3);
  CHECK(tiled.rows() == 3);
  CHECK(tiled.at(2, 1) == 8.0);
  Tensor cat = concat(tape, {m, m});
  CHECK(cat.cols() == 6);
  CHECK(cat.at(1, 5) == 6.0);
  CHECK(global_avg_pool(tape, m).values == std::vector<double>{2.5, 3.5, 4.5});
  CHECK_THROWS_AS(reshape(tape, m, {4, 2}), DimensionError);
  CHECK_THROWS_AS(row_slice(tape, m, 2), DimensionError);
}

TEST_CASE("analytic gradients match finite differences on spot points") {
  SUBCASE("cosine distance at orthogonal unit vectors") {
    Tensor a0 = Tensor({2}, {1.0, 0.0});
    Tensor b0 = Tensor({2}, {0.0, 1.0});
    Tape tape;
    Tensor a = tape.watch(a0);
    Tensor d = cosine_distance(tape, a, b0);
    Gradients g = tape.backward(d);
    Tensor ga = g.wrt(a);
    for (std::size_t i = 0; i < 2; ++i) {
      const double fd = fd_coord(
          [&](const Tensor& t) {
            Tape fresh;
            return cosine_distance(fresh, t, b0).item();
          },
          a0, i);
      CHECK(rel_err(ga.values[i], fd) < 1e-4);
    }
  }
  SUBCASE("softmax then matmul chain at a random point") {
    Rng rng(9);
    Tensor x0 = random_normal({2, 3}, rng);
    Tensor w = random_normal({3, 2}, rng);
    auto value = [&](const Tensor& t) {
      Tape fresh;
      Tensor out = matmul(fresh, softmax(fresh, t), w);
      return mean_axis(fresh, reshape(fresh, out, {1, 4}), 1).item();
    };
    Tape tape;
    Tensor x = tape.watch(x0);
    Tensor out = matmul(tape, softmax(tape, x), w);
    Gradients g = tape.backward(mean_axis(tape, reshape(tape, out, {1, 4}), 1));
    Tensor gx = g.wrt(x);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      CHECK(rel_err(gx.values[i], fd_coord(value, x0, i)) < 1e-4);
    }
  }
  SUBCASE("elementwise chain at a random point") {
    Rng rng(13);
    Tensor x0 = random_normal({1, 4}, rng);
    Tensor w = random_normal({1, 4}, rng);
    auto value = [&](const Tensor& t) {
      Tape fresh;
      Tensor h = multiply(fresh, gelu(fresh, sigmoid(fresh, t)), w);
      return mean_axis(fresh, scale(fresh, h, 3.0), 1).item();
    };
    Tape tape;
    Tensor x = tape.watch(x0);
    Tensor h = multiply(tape, gelu(tape, sigmoid(tape, x)), w);
    Gradients g = tape.backward(mean_axis(tape, scale(tape, h, 3.0), 1));
    Tensor gx = g.wrt(x);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      CHECK(rel_err(gx.values[i], fd_coord(value, x0, i)) < 1e-4);
    }
  }
}

TEST_CASE("gradient accumulates over reused nodes") {
  Tape tape;
  Tensor x = tape.watch(Tensor::matrix(1, 2, {1.5, -0.5}));
  Tensor y = add(tape, x, x);  // dy/dx = 2
  Gradients g = tape.backward(mean_axis(tape, y, 1));
  CHECK(g.wrt(x).values == std::vector<double>{1.0, 1.0});
}
