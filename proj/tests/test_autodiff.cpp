#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gv/autodiff.hpp"
#include "gv/rng.hpp"

using gv::Rng;
using gv::ad::Tape;
using gv::ad::Tensor;
using gv::ad::Var;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Keeps entries away from relu/leaky kinks so finite differences stay clean.
Tensor kink_free(std::vector<int> shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (double& v : t.data)
    if (std::abs(v) < 0.2) v += v >= 0.0 ? 0.25 : -0.25;
  return t;
}

}  // namespace

TEST_CASE("square function gradient") {
  auto build = [](Tape& t, const std::vector<Var>& xs) { return t.sum(t.mul(xs[0], xs[0])); };
  Tensor x = Tensor::vec({3.0});
  Tape tape;
  Var leaf = tape.leaf(x, true);
  Var y = build(tape, {leaf});
  tape.backward(y);
  CHECK(tape.grad(leaf).data[0] == doctest::Approx(6.0));
  CHECK(gv::ad::check_gradients(build, {x}) < 1e-8);
}

TEST_CASE("relu forward and backward routing") {
  Tape tape;
  Var x = tape.leaf(Tensor::vec({-1.0, 2.0}), true);
  Var y = tape.relu(x);
  CHECK(tape.value(y).data[0] == 0.0);
  CHECK(tape.value(y).data[1] == 2.0);
  tape.backward(tape.sum(y));
  CHECK(tape.grad(x).data[0] == 0.0);
  CHECK(tape.grad(x).data[1] == 1.0);
}

TEST_CASE("layer_norm output is standardized") {
  Rng rng(7);
  Tape tape;
  const int cols = 9;
  Var x = tape.leaf(random_tensor({3, cols}, rng, -2.0, 3.0), false);
  Tensor gain = Tensor::zeros({cols});
  for (double& v : gain.data) v = 1.0;
  Var y = tape.layer_norm(x, tape.constant(gain), tape.constant(Tensor::zeros({cols})));
  const Tensor& out = tape.value(y);
  for (int r = 0; r < 3; ++r) {
    double mu = 0.0, var = 0.0;
    for (int c = 0; c < cols; ++c) mu += out.at(r, c);
    mu /= cols;
    for (int c = 0; c < cols; ++c) var += (out.at(r, c) - mu) * (out.at(r, c) - mu);
    var /= cols;
    CHECK(std::abs(mu) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("masked softmax distributes over unmasked entries") {
  Tape tape;
  Var logits = tape.leaf(Tensor::vec({0.3, 0.3, 0.3, 0.3}), false);
  auto y = tape.softmax_masked(logits, {1, 0, 1, 0});
  const auto& p = tape.value(y);
  CHECK(p.data[0] == doctest::Approx(0.5));
  CHECK(p.data[1] == 0.0);
  CHECK(p.data[2] == doctest::Approx(0.5));
  CHECK(p.data[3] == 0.0);
  CHECK_THROWS_AS(tape.softmax_masked(logits, {0, 0, 0, 0}), gv::ad::NumericError);
}

TEST_CASE("stop_gradient blocks the path") {
  Tape tape;
  Var x = tape.leaf(Tensor::vec({2.0}), true);
  Var frozen = tape.stop_gradient(x);
  Var y = tape.sum(tape.mul(frozen, frozen));
  tape.backward(y);
  CHECK(tape.grad(x).data[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape tape;
  Var x = tape.leaf(Tensor::vec({1.0, 2.0}), true);
  CHECK_THROWS_AS(tape.backward(x), gv::ad::NumericError);
}

TEST_CASE("non-finite values are rejected") {
  Tape tape;
  Var x = tape.leaf(Tensor::vec({0.0}), false);
  CHECK_THROWS_AS(tape.log(x), gv::ad::NumericError);
}

TEST_CASE("shape mismatches are rejected") {
  Tape tape;
  Var a = tape.leaf(Tensor::vec({1.0, 2.0}), false);
  Var b = tape.leaf(Tensor::vec({1.0, 2.0, 3.0}), false);
  CHECK_THROWS_AS(tape.add(a, b), gv::ad::NumericError);
  Var m = tape.leaf(Tensor::mat(2, 3, {1, 2, 3, 4, 5, 6}), false);
  CHECK_THROWS_AS(tape.matmul(m, m), gv::ad::NumericError);
}

TEST_CASE("every primitive matches central finite differences") {
  double worst = 0.0;
  auto record = [&worst](double err) {
    worst = std::max(worst, err);
    CHECK(err < 1e-4);
  };

  for (int trial = 0; trial < 3; ++trial) {
    const std::uint64_t s = 100 + trial;
    {
      Rng r(s);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) { return t.sum(t.matmul(v[0], v[1])); },
          {random_tensor({3, 4}, r), random_tensor({4, 2}, r)}));
    }
    {
      Rng r(s + 10);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
          },
          {random_tensor({5}, r), random_tensor({5}, r)}));
    }
    {
      Rng r(s + 20);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) { return t.mean(t.add_rowvec(v[0], v[1])); },
          {random_tensor({3, 4}, r), random_tensor({4}, r)}));
    }
    {
      Rng r(s + 30);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.mul(t.broadcast_rows(v[0], 4), t.broadcast_rows(v[0], 4)));
          },
          {random_tensor({1, 3}, r)}));
    }
    {
      Rng r(s + 40);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.mul(t.sum_rows(v[0]), t.sum_rows(v[0])));
          },
          {random_tensor({4, 3}, r)}));
    }
    {
      Rng r(s + 50);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) { return t.sum(t.relu(v[0])); },
          {kink_free({4, 3}, r)}));
    }
    {
      Rng r(s + 60);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) { return t.sum(t.leaky_relu(v[0], 0.01)); },
          {kink_free({6}, r)}));
    }
    {
      Rng r(s + 70);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) { return t.sum(t.log(v[0])); },
          {random_tensor({5}, r, 0.5, 2.0)}));
    }
    {
      Rng r(s + 80);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) { return t.sum(t.sigmoid(v[0])); },
          {random_tensor({5}, r)}));
    }
    {
      Rng r(s + 90);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.mul(t.layer_norm(v[0], v[1], v[2]), t.layer_norm(v[0], v[1], v[2])));
          },
          {random_tensor({3, 4}, r, -2.0, 2.0), random_tensor({4}, r, 0.5, 1.5),
           random_tensor({4}, r)}));
    }
    {
      Rng r(s + 100);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var p = t.softmax(v[0]);
            return t.dot(p, v[1]);
          },
          {random_tensor({5}, r), random_tensor({5}, r)}));
    }
    {
      Rng r(s + 105);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var p = t.softmax_masked(v[0], {1, 0, 1, 1, 0});
            return t.dot(p, v[1]);
          },
          {random_tensor({5}, r), random_tensor({5}, r)}));
    }
    {
      Rng r(s + 110);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var seg = t.segment_sum(v[0], {0, 1, 0, 2}, 3);
            return t.sum(t.mul(seg, seg));
          },
          {random_tensor({4, 3}, r)}));
    }
    {
      Rng r(s + 120);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var g = t.gather_rows(v[0], {2, 0, 1, 2});
            return t.sum(t.mul(g, g));
          },
          {random_tensor({3, 2}, r)}));
    }
    {
      Rng r(s + 130);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var c = t.concat_cols({v[0], v[1]});
            Var rows = t.concat_rows({c, c});
            return t.sum(t.mul(rows, rows));
          },
          {random_tensor({2, 2}, r), random_tensor({2, 3}, r)}));
    }
    {
      Rng r(s + 140);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var s1 = t.slice_rows(v[0], 1, 3);
            Var s2 = t.slice_vec(t.reshape(s1, {6}), 1, 5);
            return t.sum(t.mul(s2, s2));
          },
          {random_tensor({4, 3}, r)}));
    }
    {
      Rng r(s + 150);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var c = t.concat_vec({v[0], v[1]});
            return t.mean(t.mul(c, c));
          },
          {random_tensor({3}, r), random_tensor({4}, r)}));
    }
    {
      Rng r(s + 160);
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            return t.select(t.softmax(t.affine(t.clamp_min(v[0], -5.0), 1.3, 0.2)), 1);
          },
          {random_tensor({4}, r)}));
    }
    {
      Rng r(s + 170);
      // two-layer relu MLP at a kink-free point
      record(gv::ad::check_gradients(
          [](Tape& t, const std::vector<Var>& v) {
            Var h = t.relu(t.add_rowvec(t.matmul(v[0], v[1]), v[2]));
            Var out = t.add_rowvec(t.matmul(h, v[3]), v[4]);
            return t.mean(t.mul(out, out));
          },
          {kink_free({3, 4}, r), random_tensor({4, 5}, r), random_tensor({5}, r, 0.5, 1.0),
           random_tensor({5, 2}, r), random_tensor({2}, r)}));
    }
  }
  MESSAGE("worst relative error: ", worst);
}

TEST_CASE("harness flags a wrong gradient") {
  Rng rng(88);
  Tensor x = random_tensor({4}, rng);
  auto f = [](const std::vector<Tensor>& p) {
    double s = 0.0;
    for (double v : p[0].data) s += v * v;
    return s;
  };
  Tensor wrong = x;
  for (double& v : wrong.data) v = 2.0 * v + 0.5;  // claims d/dx (x^2) = 2x + 0.5
  CHECK(gv::ad::fd_max_rel_error({wrong}, f, {x}, 1e-5) > 1e-1);
  Tensor right = x;
  for (double& v : right.data) v = 2.0 * v;
  CHECK(gv::ad::fd_max_rel_error({right}, f, {x}, 1e-5) < 1e-8);
}

TEST_CASE("segment_sum commutes with row permutations") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = rng.uniform_int(2, 12);
    const int cols = rng.uniform_int(1, 5);
    const int segments = rng.uniform_int(1, 4);
    Tensor x = random_tensor({rows, cols}, rng);
    std::vector<int> seg(rows);
    for (int& s : seg) s = rng.uniform_int(0, segments - 1);

    std::vector<int> perm(rows);
    for (int i = 0; i < rows; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor xp = Tensor::zeros({rows, cols});
    std::vector<int> segp(rows);
    for (int i = 0; i < rows; ++i) {
      segp[i] = seg[perm[i]];
      for (int c = 0; c < cols; ++c) xp.at(i, c) = x.at(perm[i], c);
    }

    Tape tape;
    auto a = tape.value(tape.segment_sum(tape.constant(x), seg, segments));
    auto b = tape.value(tape.segment_sum(tape.constant(xp), segp, segments));
    for (std::size_t i = 0; i < a.numel(); ++i)
      CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("identical seeds give bit-identical gradients") {
  auto run = [] {
    Rng rng(4242);
    Tape tape;
    Var w = tape.leaf(random_tensor({6, 6}, rng), true);
    Var x = tape.leaf(random_tensor({4, 6}, rng), false);
    Var y = tape.sum(tape.relu(tape.matmul(x, w)));
    tape.backward(y);
    return std::make_pair(tape.value(y).data[0], tape.grad(w).data);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}
