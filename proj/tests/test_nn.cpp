#include <doctest.h>

#include <cmath>
#include <random>

#include "ppgcn/error.hpp"
#include "ppgcn/nn.hpp"
#include "fd_support.hpp"

using namespace ppgcn;
using namespace ppgcn::testing;

namespace {

SparseMatrix random_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Triplet> t;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (unit(rng) < density) {
        const double w = 0.1 + unit(rng);
        t.push_back({i, j, w});
        t.push_back({j, i, w});
      }
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

DenseMatrix random_dense(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  DenseMatrix m(r, c);
  for (auto& v : m.values()) v = g(rng);
  return m;
}

// Cyclic Jacobi sweeps; returns the eigenvalues of a small symmetric matrix.
std::vector<double> symmetric_eigenvalues(DenseMatrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  return ev;
}

DenseMatrix dense_of(const SparseMatrix& s) {
  DenseMatrix d(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const auto cols = s.row_cols(i);
    const auto vals = s.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) d(i, cols[p]) = vals[p];
  }
  return d;
}

double weighted_output(const SparseMatrix& a_hat, const DenseMatrix& x, const GcnParams& p,
                       const DenseMatrix& g) {
  const auto z = gcn_forward(a_hat, x, p).z;
  double s = 0.0;
  for (std::size_t k = 0; k < z.values().size(); ++k) s += z.values()[k] * g.values()[k];
  return s;
}

}  // namespace

TEST_CASE("normalize_adjacency examples") {
  const auto z = normalize_adjacency(SparseMatrix(2, 2));
  CHECK(z == SparseMatrix::identity(2));

  const auto two = normalize_adjacency(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(two.at(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
  const auto path = normalize_adjacency(
      SparseMatrix::from_triplets(3, 3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}));
  CHECK(path.at(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(augmented_degrees(SparseMatrix::from_triplets(3, 3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}})) ==
        std::vector<double>{2.0, 3.0, 2.0});

  CHECK_THROWS_AS(normalize_adjacency(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}})), Error);
  CHECK_THROWS_AS(normalize_adjacency(SparseMatrix::from_triplets(2, 2, {{0, 1, -1.0}, {1, 0, -1.0}})), Error);
}

TEST_CASE("normalized adjacency has spectral radius at most one") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + trial % 18;
    const auto a_hat = normalize_adjacency(random_graph(n, 0.4, rng));
    CHECK(a_hat.is_symmetric(1e-15));
    double radius = 0.0;
    for (const double ev : symmetric_eigenvalues(dense_of(a_hat))) radius = std::max(radius, std::abs(ev));
    CHECK(radius <= 1.0 + 1e-6);
  }
}

TEST_CASE("forward examples") {
  std::mt19937_64 rng(1);
  const auto x = random_dense(4, 3, rng);
  GcnParams id{{DenseMatrix::identity(3)}, {Activation::Identity}};
  CHECK(gcn_forward(SparseMatrix::identity(4), x, id).z == x);

  DenseMatrix neg(3, 2, -1.0);
  DenseMatrix pos(4, 3, 1.0);
  GcnParams relu{{neg}, {Activation::Relu}};
  const auto z = gcn_forward(SparseMatrix::identity(4), pos, relu).z;
  for (const double v : z.values()) CHECK(v == 0.0);

  const auto a_hat = normalize_adjacency(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}));
  GcnParams two{{DenseMatrix::identity(2)}, {Activation::Identity}};
  const auto half = gcn_forward(a_hat, DenseMatrix::identity(2), two).z;
  for (const double v : half.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(gcn_forward(SparseMatrix::identity(3), x, id), Error);
  DenseMatrix big(4, 3, 1e300);
  GcnParams blow{{DenseMatrix(3, 3, 1e300), DenseMatrix::identity(3)}, {Activation::Identity, Activation::Identity}};
  try {
    gcn_forward(SparseMatrix::identity(4), big, blow);
    FAIL("expected non-finite error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("backward examples") {
  std::mt19937_64 rng(2);
  const auto x = random_dense(5, 3, rng);
  const auto dz = random_dense(5, 3, rng);
  GcnParams id{{DenseMatrix::identity(3)}, {Activation::Identity}};
  auto fwd = gcn_forward(SparseMatrix::identity(5), x, id);
  const auto g = gcn_backward(fwd.cache, dz);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < 5; ++r) s += x(r, i) * dz(r, j);
      CHECK(g.weights[0](i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }
  CHECK(g.input == dz);
  CHECK_THROWS_AS(gcn_backward(fwd.cache, dz), Error);

  auto params = GcnParams::glorot(std::vector<std::size_t>{3, 4, 2}, 5);
  auto zero = gcn_forward(SparseMatrix::identity(5), x, params);
  const auto gz = gcn_backward(zero.cache, DenseMatrix(5, 2));
  for (const auto& w : gz.weights) {
    for (const double v : w.values()) CHECK(v == 0.0);
  }
  for (const double v : gz.input.values()) CHECK(v == 0.0);
  auto wrong = gcn_forward(SparseMatrix::identity(5), x, params);
  CHECK_THROWS_AS(gcn_backward(wrong.cache, DenseMatrix(5, 3)), Error);
}

TEST_CASE("finite-difference gradients for weights, inputs and the adjacency") {
  std::mt19937_64 rng(23);
  // widening then narrowing layers exercise both evaluation orders
  const std::vector<std::vector<std::size_t>> shapes{{3, 5, 2}, {6, 4, 4, 2}, {2, 7, 3}};
  for (const auto act : {Activation::Relu, Activation::Sigmoid}) {
    for (std::size_t trial = 0; trial < shapes.size(); ++trial) {
      const std::size_t n = 6 + trial;
      SparseMatrix a_hat = normalize_adjacency(random_graph(n, 0.5, rng));
      DenseMatrix x = random_dense(n, shapes[trial].front(), rng);
      GcnParams p = GcnParams::glorot(shapes[trial], trial, act);
      const DenseMatrix gmat = random_dense(n, shapes[trial].back(), rng);
      auto fwd = gcn_forward(a_hat, x, p);
      const auto grads = gcn_backward(fwd.cache, gmat);

      double worst = 0.0;
      for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (std::size_t k = 0; k < p.weights[l].values().size(); ++k) {
          const double num = central_difference(p.weights[l].values()[k],
                                                [&] { return weighted_output(a_hat, x, p, gmat); });
          worst = std::max(worst, relative_error(grads.weights[l].values()[k], num));
        }
      }
      for (std::size_t k = 0; k < x.values().size(); ++k) {
        const double num = central_difference(x.values()[k], [&] { return weighted_output(a_hat, x, p, gmat); });
        worst = std::max(worst, relative_error(grads.input.values()[k], num));
      }
      // perturb stored entries of Â one at a time (not kept symmetric: the
      // gradient is with respect to each stored entry)
      std::vector<double> vals(a_hat.values().begin(), a_hat.values().end());
      const auto rebuild = [&] {
        return SparseMatrix(n, n, {a_hat.row_ptr().begin(), a_hat.row_ptr().end()},
                            {a_hat.col_idx().begin(), a_hat.col_idx().end()}, vals);
      };
      for (std::size_t k = 0; k < vals.size(); ++k) {
        const double num = central_difference(vals[k], [&] { return weighted_output(rebuild(), x, p, gmat); });
        worst = std::max(worst, relative_error(grads.adjacency[k], num));
      }
      INFO("activation " << to_string(act) << " trial " << trial);
      CHECK(worst < kFdTolerance);
    }
  }
}

TEST_CASE("input gradient can be skipped without changing the rest") {
  std::mt19937_64 rng(4);
  const auto a_hat = normalize_adjacency(random_graph(7, 0.5, rng));
  const auto x = random_dense(7, 5, rng);
  const auto p = GcnParams::glorot(std::vector<std::size_t>{5, 3, 2}, 1);
  const auto dz = random_dense(7, 2, rng);
  auto f1 = gcn_forward(a_hat, x, p);
  auto f2 = gcn_forward(a_hat, x, p);
  const auto full = gcn_backward(f1.cache, dz);
  const auto lean = gcn_backward(f2.cache, dz, false);
  CHECK(full.weights == lean.weights);
  CHECK(full.adjacency == lean.adjacency);
  CHECK(lean.input.size() == 0);
}

TEST_CASE("sgd") {
  std::vector<double> p{1.0};
  sgd_step(p, std::vector<double>{0.5}, 0.1);
  CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-15));
  sgd_step(p, std::vector<double>{0.0}, 0.1);
  CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-15));

  std::vector<double> twice{2.0}, once{2.0};
  sgd_step(twice, std::vector<double>{0.25}, 0.1);
  sgd_step(twice, std::vector<double>{0.25}, 0.1);
  sgd_step(once, std::vector<double>{0.25}, 0.2);
  CHECK(twice[0] == doctest::Approx(once[0]).epsilon(1e-15));

  auto params = GcnParams::glorot(std::vector<std::size_t>{2, 2}, 0);
  const auto before = params;
  sgd_step(params, std::vector<DenseMatrix>{DenseMatrix(2, 2, 1.0)}, 0.5);
  CHECK(params.weights[0](0, 0) == doctest::Approx(before.weights[0](0, 0) - 0.5).epsilon(1e-15));
  CHECK_THROWS_AS(sgd_step(params, std::vector<DenseMatrix>{DenseMatrix(3, 2)}, 0.1), Error);
  CHECK_THROWS_AS(sgd_step(p, std::vector<double>{1.0}, -1.0), Error);
}

TEST_CASE("glorot initialization and checkpoint round trip") {
  const std::vector<std::size_t> dims{8, 6, 3};
  const auto a = GcnParams::glorot(dims, 9);
  CHECK(a == GcnParams::glorot(dims, 9));
  CHECK_FALSE(a == GcnParams::glorot(dims, 10));
  CHECK(a.activations == std::vector<Activation>{Activation::Relu, Activation::Identity});
  const double limit = std::sqrt(6.0 / 14.0);
  for (const double v : a.weights[0].values()) CHECK(std::abs(v) <= limit);
  CHECK(gcn_from_json(gcn_to_json(a)) == a);
  CHECK_THROWS_AS(gcn_from_json("{\"format\":\"ppgcn.gcn\",\"version\":2}"), Error);
  CHECK(activation_from_string("sigmoid") == Activation::Sigmoid);
  CHECK_THROWS_AS(activation_from_string("tanh"), Error);
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(8);
  const auto a_hat = normalize_adjacency(random_graph(90, 0.2, rng));
  const auto x = random_dense(90, 20, rng);
  const auto p = GcnParams::glorot(std::vector<std::size_t>{20, 16, 4}, 3);
  CHECK(gcn_forward(a_hat, x, p).z == gcn_forward(a_hat, x, p).z);
}
