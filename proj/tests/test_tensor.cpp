#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "op_cases.hpp"
#include "odegs/checkpoint.hpp"
#include "odegs/nn.hpp"
#include "odegs/tensor.hpp"

using namespace odegs;
using odegs::testing::gradcheck;
using odegs::testing::project_to_scalar;
using odegs::testing::op_cases;
using odegs::testing::random_tensor;

namespace {

constexpr int kSeeds = 50;
constexpr double kOpTol = 1e-5;

}  // namespace

TEST_CASE("every op passes a finite-difference gradient check over 50 seeds") {
  for (const auto& c : op_cases()) {
    double worst = 0.0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      std::vector<Tensor> leaves;
      for (const auto& s : c.shapes) leaves.push_back(random_tensor(s, rng, c.lo, c.hi));
      const auto fn = [&](const std::vector<Tensor>& x) { return project_to_scalar(c.op(x), seed); };
      worst = std::max(worst, gradcheck(fn, leaves));
    }
    INFO(c.name << " worst relative error " << worst);
    CHECK(worst < kOpTol);
  }
}

TEST_CASE("matmul against the identity is a no-op") {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor id = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor r = matmul(a, id);
  CHECK(r.shape() == Shape{2, 2});
  CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("tanh and softmax symmetric cases") {
  CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
  Tensor s = softmax(Tensor({2}, 0.0));
  CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("layer_norm output has zero mean and unit variance") {
  Tensor y = layer_norm(Tensor({3}, std::vector<double>{1, 2, 3}), 0.0);
  double mu = 0.0;
  for (double v : y.data()) mu += v;
  mu /= 3.0;
  double var = 0.0;
  for (double v : y.data()) var += (v - mu) * (v - mu);
  var /= 3.0;
  CHECK(std::abs(mu) < 1e-12);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  // Straight-line reference: (x - 2) / sqrt(2/3).
  const double sd = std::sqrt(2.0 / 3.0);
  CHECK(y[0] == doctest::Approx(-1.0 / sd).epsilon(1e-12));
  CHECK(y[2] == doctest::Approx(1.0 / sd).epsilon(1e-12));
}

TEST_CASE("backward of sum(x*x) is 2x") {
  Tensor x = Tensor::parameter({3}, {1, 2, 3});
  GradRecord rec;
  {
    RecordScope scope(&rec);
    rec.backward(sum(mul(x, x)));
  }
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK(x.grad()[2] == 6.0);
  CHECK(rec.empty());
}

TEST_CASE("matmul chain gradient matches finite differences") {
  std::mt19937_64 rng(7);
  std::vector<Tensor> leaves = {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5, 2}, rng)};
  const auto fn = [](const std::vector<Tensor>& x) { return sum(tanh(matmul(matmul(x[0], x[1]), x[2]))); };
  CHECK(gradcheck(fn, leaves) < 1e-5);
}

TEST_CASE("unused parameter gets exactly zero gradient") {
  Tensor used = Tensor::parameter({2}, {1, 2});
  Tensor unused = Tensor::parameter({2, 2}, {1, 2, 3, 4});
  GradRecord rec;
  {
    RecordScope scope(&rec);
    rec.backward(sum(exp(used)));
  }
  CHECK(unused.grad().size() == 4);
  for (double g : unused.grad()) CHECK(g == 0.0);
}

TEST_CASE("parameters used several times accumulate gradients") {
  Tensor w = Tensor::parameter({2}, {0.5, -1.0});
  GradRecord rec;
  {
    RecordScope scope(&rec);
    Tensor l = add(sum(mul_scalar(w, 3.0)), sum(mul_scalar(w, 4.0)));
    rec.backward(l);
  }
  CHECK(w.grad()[0] == doctest::Approx(7.0));
  CHECK(w.grad()[1] == doctest::Approx(7.0));
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({4, 3}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    const auto l1 = [&] { return sum(tanh(matmul(x, w))); };
    const auto l2 = [&] { return sum(square(matmul(x, w))); };
    const double a = 0.3 + trial, b = -1.7;
    auto grads = [&](const std::function<Tensor()>& f) {
      x.zero_grad();
      w.zero_grad();
      GradRecord rec;
      RecordScope scope(&rec);
      rec.backward(f());
      std::vector<double> g(x.grad().begin(), x.grad().end());
      g.insert(g.end(), w.grad().begin(), w.grad().end());
      return g;
    };
    const auto g1 = grads(l1);
    const auto g2 = grads(l2);
    const auto gc = grads([&] { return add(mul_scalar(l1(), a), mul_scalar(l2(), b)); });
    for (std::size_t i = 0; i < gc.size(); ++i) CHECK(std::abs(gc[i] - (a * g1[i] + b * g2[i])) < 1e-12);
  }
}

TEST_CASE("forward ops are bit-deterministic") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({4, 8}, rng);
  Tensor w = random_tensor({8, 8}, rng);
  auto run = [&] { return layer_norm(softmax(matmul(tanh(x), w))); };
  Tensor a = run(), b = run();
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("error paths") {
  Tensor a({2, 3}), b({4, 5});
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(Tensor({2, 3}), Tensor({3, 2})), ShapeError);
  CHECK_THROWS_AS(log(Tensor({2}, -1.0)), std::domain_error);
  CHECK_THROWS_AS(sqrt(Tensor({2}, -1.0)), std::domain_error);
  CHECK_THROWS_AS(div(Tensor({2}, 1.0), Tensor({2}, 0.0)), std::domain_error);

  Tensor p = Tensor::parameter({3}, {1, 2, 3});
  GradRecord rec;
  RecordScope scope(&rec);
  CHECK_THROWS_AS(rec.backward(mul_scalar(p, 2.0)), ShapeError);
}

TEST_CASE("ops outside a record scope are not recorded") {
  Tensor p = Tensor::parameter({3}, {1, 2, 3});
  GradRecord rec;
  Tensor y = tanh(p);
  CHECK(rec.empty());
  {
    RecordScope scope(&rec);
    Tensor z = tanh(p);
    CHECK(rec.size() == 1);
    CHECK(rec.nodes().front().kind == "tanh");
  }
}

TEST_CASE("checkpoint round trip preserves names, shapes and values") {
  Rng rng(5);
  ParamStore store;
  Linear lin(store, "enc.proj", 3, 4, rng);
  LayerNorm ln(store, "enc.ln", 4);
  const auto path = std::filesystem::temp_directory_path() / "odegs_test.ckpt";
  write_checkpoint(path, store, R"({"d_model":4})");

  auto ck = read_checkpoint(path);
  CHECK(ck.version == kCheckpointVersion);
  CHECK(ck.metadata == R"({"d_model":4})");
  REQUIRE(ck.params.size() == 4);
  CHECK(ck.params[0].first == "enc.proj.weight");
  CHECK(ck.params[0].second.shape() == Shape{3, 4});

  Rng rng2(99);
  ParamStore other;
  Linear lin2(other, "enc.proj", 3, 4, rng2);
  LayerNorm ln2(other, "enc.ln", 4);
  load_into(ck, other);
  CHECK(other.snapshot() == store.snapshot());

  // Header bytes are fixed: magic, version, count.
  std::ifstream is(path, std::ios::binary);
  char head[12];
  is.read(head, 12);
  CHECK(std::string(head, 4) == "ODGS");
  CHECK(static_cast<unsigned char>(head[4]) == kCheckpointVersion);
  CHECK(static_cast<unsigned char>(head[8]) == 4);

  ParamStore wrong;
  wrong.add_zeros("enc.proj.weight", {4, 3});
  CHECK_THROWS_AS(load_into(ck, wrong), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint("/nonexistent/odegs.ckpt"), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("f32 checkpoint payload reads back within float precision") {
  ParamStore store;
  store.add("w", {2}, {0.1, -3.3});
  const auto path = std::filesystem::temp_directory_path() / "odegs_test_f32.ckpt";
  write_checkpoint(path, store, "", Payload::kF32);
  auto ck = read_checkpoint(path);
  CHECK(ck.params[0].second[0] == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(ck.params[0].second[1] == doctest::Approx(-3.3).epsilon(1e-7));
  std::filesystem::remove(path);
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(0, 100, 1e-3, 1e-6) == 1e-3);
  CHECK(std::abs(cosine_lr(99, 100, 1e-3, 1e-6) - 1e-6) < 1e-9);
}

TEST_CASE("adam moves parameters downhill") {
  ParamStore store;
  Tensor w = store.add("w", {2}, {1.0, -1.0});
  Adam opt(store);
  for (int i = 0; i < 200; ++i) {
    store.zero_grad();
    GradRecord rec;
    RecordScope scope(&rec);
    rec.backward(sum(square(w)));
    opt.step(0.05);
  }
  CHECK(std::abs(w[0]) < 0.05);
  CHECK(std::abs(w[1]) < 0.05);
}
