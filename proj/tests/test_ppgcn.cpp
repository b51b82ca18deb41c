#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ppgcn/error.hpp"
#include "ppgcn/pairwise.hpp"
#include "fd_support.hpp"

using namespace ppgcn;
using namespace ppgcn::testing;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const MetaPathCatalog& one_hop_catalog() {
  static const auto catalog = enumerate_metapaths(MetaSchema::default_schema(), 1);
  return catalog;
}

// Random Dice-like matrices: symmetric, entries in (0, 1], unit diagonal.
std::vector<SparseMatrix> random_dice(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SparseMatrix> out;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<Triplet> t;
    for (std::uint32_t i = 0; i < n; ++i) {
      t.push_back({i, i, 1.0});
      for (std::uint32_t j = i + 1; j < n; ++j) {
        if (unit(rng) < 0.5) {
          const double v = 0.05 + 0.95 * unit(rng);
          t.push_back({i, j, v});
          t.push_back({j, i, v});
        }
      }
    }
    out.push_back(SparseMatrix::from_triplets(n, n, std::move(t)));
  }
  return out;
}

DenseMatrix random_features(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  DenseMatrix x(n, d);
  for (auto& v : x.values()) v = g(rng);
  return x;
}

std::vector<double> vec(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_CASE("popularity head values") {
  const double c = 0.01;
  const auto one = popularity_score(vec({3.0, 4.0}), vec({0.0, 5.0}), c);
  CHECK(one.x == 1.0);
  CHECK(std::abs(one.logit - 2.0) <= 1e-12);
  CHECK(one.p == doctest::Approx(0.8807970779778823).epsilon(1e-12));

  const auto edge = popularity_score(vec({1.99}), vec({1.0}), c);
  CHECK(std::abs(edge.logit) <= 1e-12);
  CHECK(edge.p == doctest::Approx(0.5).epsilon(1e-12));

  const auto three = popularity_score(vec({3.0}), vec({1.0}), c);
  CHECK(three.logit == doctest::Approx(-0.30319605742048883).epsilon(1e-12));
  CHECK(three.p == doctest::Approx(0.42477).epsilon(1e-4));
  CHECK_FALSE(three.positive());

  const auto zero = popularity_score(vec({0.0, 0.0}), vec({0.0, 0.0}), c);
  CHECK(zero.degenerate);
  CHECK(zero.p == 0.0);
  CHECK(popularity_score(vec({0.0}), vec({2.0}), c).degenerate);
}

TEST_CASE("popularity decision boundary sits at ratio 2 - c") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const double c : {0.01, 0.1, 0.5}) {
    for (int trial = 0; trial < 2000; ++trial) {
      const double ratio = 1.0 + 3.0 * unit(rng);
      const double base = 0.01 + 10.0 * unit(rng);
      const auto s = popularity_score(vec({base * ratio, 0.0}), vec({0.0, base}), c);
      if (std::abs(s.x - (2.0 - c)) < 1e-12) continue;
      CHECK(s.positive() == (s.x < 2.0 - c));
    }
  }
}

TEST_CASE("head scaling invariances") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    const double alpha = std::exp(2.0 * g(rng));
    const double beta = std::exp(2.0 * g(rng));
    std::vector<double> sa = a, sb = b;
    for (auto& v : sa) v *= alpha;
    for (auto& v : sb) v *= alpha;
    const auto base = popularity_score(a, b, 0.01);
    CHECK(popularity_score(sa, sb, 0.01).logit == doctest::Approx(base.logit).epsilon(1e-12));
    std::vector<double> ib = b;
    for (auto& v : ib) v *= beta;
    CHECK(angle_score(sa, ib).p == doctest::Approx(angle_score(a, b).p).epsilon(1e-12));
  }
}

TEST_CASE("angle head values") {
  CHECK(angle_score(vec({1.0, 2.0}), vec({1.0, 2.0})).p == doctest::Approx(sig(5.0)).epsilon(1e-12));
  CHECK(angle_score(vec({1.0, 0.0}), vec({0.0, 3.0})).p == doctest::Approx(sig(-5.0)).epsilon(1e-12));
  CHECK(angle_score(vec({1.0, 0.0}), vec({0.5, std::sqrt(0.75)})).p == doctest::Approx(0.5).epsilon(1e-12));
  const auto z = angle_score(vec({0.0, 0.0}), vec({1.0, 0.0}));
  CHECK(z.degenerate);
  CHECK(z.p == 0.0);
}

TEST_CASE("pair sampling") {
  TrainConfig cfg;
  cfg.anchors = 4;
  cfg.batch_size = 3;
  cfg.batches_per_epoch = 2;
  const std::vector<int> labels{0, 0, 1, 1};
  auto rng = std::mt19937_64(1);
  const auto plan = sample_epoch_pairs(labels, cfg, rng);
  CHECK(plan.pool.size() == 8);
  CHECK(std::count_if(plan.pool.begin(), plan.pool.end(), [](const auto& p) { return p.positive; }) == 4);
  CHECK(plan.batches.size() == 2);
  for (const auto& b : plan.batches) {
    CHECK(b.size() == 3);
    for (const auto k : b) CHECK(k < 8);
  }
  auto again = std::mt19937_64(1);
  const auto replay = sample_epoch_pairs(labels, cfg, again);
  CHECK(replay.pool == plan.pool);
  CHECK(replay.batches == plan.batches);

  CHECK_THROWS_AS(sample_epoch_pairs(std::vector<int>{0, 0, 0}, cfg, rng), Error);
  CHECK_THROWS_AS(sample_epoch_pairs(std::vector<int>{0, 1, 2}, cfg, rng), Error);
}

TEST_CASE("pair pools are balanced and respect labels") {
  std::mt19937_64 gen(2);
  TrainConfig cfg;
  cfg.anchors = 300;
  for (int trial = 0; trial < 30; ++trial) {
    // singletons (class 9), unlabeled slots (-1) and a few real classes
    std::vector<int> labels;
    const int classes = 2 + trial % 4;
    for (int c = 0; c < classes; ++c) {
      for (int k = 0; k < 2 + (trial + c) % 3; ++k) labels.push_back(c);
    }
    labels.push_back(9);
    labels.push_back(-1);
    labels.push_back(-1);
    std::shuffle(labels.begin(), labels.end(), gen);
    const auto plan = sample_epoch_pairs(labels, cfg, gen);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < plan.pool.size(); ++k) {
      const auto& p = plan.pool[k];
      CHECK(p.i != p.j);
      CHECK(labels[p.i] >= 0);
      CHECK(labels[p.j] >= 0);
      CHECK(labels[p.i] != 9);
      CHECK(p.positive == (labels[p.i] == labels[p.j]));
      pos += p.positive;
    }
    CHECK(pos == cfg.anchors);
    CHECK(plan.pool.size() == 2 * cfg.anchors);
  }
}

TEST_CASE("softplus parameterization") {
  for (const double y : {1e-6, 0.05, 0.25, 1.0, 7.0, 40.0}) {
    CHECK(softplus(inverse_softplus(y)) == doctest::Approx(y).epsilon(1e-12));
  }
  TrainConfig cfg;
  const auto model = init_model(6, one_hop_catalog(), cfg);
  for (const double w : model.omega()) CHECK(w == doctest::Approx(1.0 / 4.0).epsilon(1e-14));
  const auto w = export_weights(model);
  CHECK(w.normalized);
  double sum = 0.0;
  for (const double v : w.values) {
    CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  CHECK(w.signatures == one_hop_catalog().signatures());
}

TEST_CASE("exported weights sum to one and survive a file round trip") {
  TrainConfig cfg;
  auto model = init_model(6, one_hop_catalog(), cfg);
  model.omega_raw = {-3.0, 0.2, 1.7, 5.0};
  const auto w = export_weights(model);
  double sum = 0.0;
  for (const double v : w.values) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  const auto back = weights_from_json(weights_to_json(w));
  REQUIRE(back.values.size() == w.values.size());
  for (std::size_t m = 0; m < w.values.size(); ++m) CHECK(std::abs(back.values[m] - w.values[m]) <= 1e-12);
}

TEST_CASE("end-to-end gradients with exact normalization") {
  std::mt19937_64 rng(31);
  const auto& catalog = one_hop_catalog();
  std::size_t instances = 0;
  for (const auto head : {Head::Popularity, Head::Angle}) {
    for (int trial = 0; trial < 12; ++trial, ++instances) {
      const std::size_t n = 6 + trial % 5;
      const auto dice = random_dice(n, catalog.size(), rng);
      const auto x = random_features(n, 4, rng);
      TrainConfig cfg;
      cfg.head = head;
      cfg.exact_normalization = true;
      cfg.hidden_dim = 2 + trial % 6;  // both narrower and wider than d
      cfg.output_dim = 3;
      cfg.seed = static_cast<std::uint64_t>(trial);
      auto model = init_model(4, catalog, cfg);
      std::normal_distribution<double> g;
      for (auto& r : model.omega_raw) r = g(rng);
      std::vector<PairSample> pairs;
      for (std::uint32_t i = 0; i + 1 < n; ++i) pairs.push_back({i, i + 1, i % 2 == 0});
      pairs.push_back({0, static_cast<std::uint32_t>(n - 1), true});

      const auto analytic = batch_loss_and_gradients(model, dice, x, pairs);
      const auto loss = [&] { return batch_loss_and_gradients(model, dice, x, pairs).loss; };
      double worst = 0.0;
      for (std::size_t m = 0; m < model.omega_raw.size(); ++m) {
        worst = std::max(worst, relative_error(analytic.omega_raw_grad[m],
                                               central_difference(model.omega_raw[m], loss)));
      }
      for (std::size_t l = 0; l < model.gcn.weights.size(); ++l) {
        auto w = model.gcn.weights[l].values();
        for (std::size_t k = 0; k < w.size(); ++k) {
          worst = std::max(worst,
                           relative_error(analytic.weight_grads[l].values()[k], central_difference(w[k], loss)));
        }
      }
      INFO("head " << to_string(head) << " trial " << trial);
      CHECK(worst < kFdTolerance);
    }
  }
  CHECK(instances >= 20);
}

TEST_CASE("stop-gradient mode keeps the layer-weight gradient exact") {
  std::mt19937_64 rng(32);
  const auto& catalog = one_hop_catalog();
  const auto dice = random_dice(8, catalog.size(), rng);
  const auto x = random_features(8, 4, rng);
  TrainConfig cfg;
  cfg.hidden_dim = 5;
  cfg.output_dim = 3;
  auto model = init_model(4, catalog, cfg);
  const std::vector<PairSample> pairs{{0, 1, true}, {2, 5, false}, {3, 7, true}};
  const auto stop = batch_loss_and_gradients(model, dice, x, pairs);
  model.config.exact_normalization = true;
  const auto exact = batch_loss_and_gradients(model, dice, x, pairs);
  CHECK(stop.loss == exact.loss);
  CHECK(stop.weight_grads == exact.weight_grads);
  CHECK(stop.omega_raw_grad != exact.omega_raw_grad);
}

TEST_CASE("predict_class examples") {
  DenseMatrix z(3, 1);
  z(0, 0) = 1.0;
  z(1, 0) = 1.5;
  z(2, 0) = 2.5;
  const std::vector<std::string> labels{"", "A", "B"};
  const std::vector<std::uint32_t> gallery{1, 2};
  const auto p = predict_class(0, z, gallery, labels, Head::Popularity, 0.01);
  CHECK(p.label == "A");
  CHECK(p.class_probability.at("A") == doctest::Approx(sig(-std::log10(0.51))).epsilon(1e-12));
  CHECK(p.class_probability.at("A") == doctest::Approx(0.5726).epsilon(1e-4));
  CHECK(p.class_probability.at("B") == doctest::Approx(0.4554).epsilon(1e-4));

  z(1, 0) = 1.0;
  z(2, 0) = 2.0;
  const auto exact = predict_class(0, z, gallery, labels, Head::Popularity, 0.01);
  CHECK(exact.label == "A");
  CHECK(exact.class_probability.at("A") == doctest::Approx(0.8807970779778823).epsilon(1e-12));

  z(1, 0) = 5.0;
  z(2, 0) = 9.0;
  CHECK(predict_class(0, z, gallery, labels, Head::Popularity, 0.01).label == kNewClass);

  // equal probabilities go to the smaller label
  z(1, 0) = 1.2;
  z(2, 0) = 1.2;
  CHECK(predict_class(0, z, gallery, labels, Head::Popularity, 0.01).label == "A");

  CHECK_THROWS_AS(predict_class(0, z, std::vector<std::uint32_t>{}, labels, Head::Popularity, 0.01), Error);
  CHECK_THROWS_AS(predict_class(0, z, std::vector<std::uint32_t>{0}, labels, Head::Popularity, 0.01), Error);
}

namespace {

// Two planted classes joined only inside their block.
struct Toy {
  std::vector<SparseMatrix> dice;
  DenseMatrix x;
  DatasetSplit split;
};

Toy separable_toy() {
  const std::size_t per = 8;
  const std::size_t n = 2 * per;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.3, 1.0);
  Toy toy;
  for (std::size_t m = 0; m < one_hop_catalog().size(); ++m) {
    std::vector<Triplet> t;
    for (std::uint32_t i = 0; i < n; ++i) {
      t.push_back({i, i, 1.0});
      for (std::uint32_t j = i + 1; j < n; ++j) {
        if (i / per == j / per) {
          const double v = unit(rng);
          t.push_back({i, j, v});
          t.push_back({j, i, v});
        }
      }
    }
    toy.dice.push_back(SparseMatrix::from_triplets(n, n, std::move(t)));
  }
  toy.x = random_features(n, 6, rng);
  for (std::uint32_t i = 0; i < n; ++i) {
    toy.split.labels.push_back(i < per ? "a" : "b");
    if (i % per < 5) toy.split.train.push_back(i);
    else if (i % per < 6) toy.split.dev.push_back(i);
    else toy.split.test.push_back(i);
  }
  return toy;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.anchors = 40;
  cfg.batch_size = 16;
  cfg.batches_per_epoch = 4;
  cfg.epochs = 200;
  cfg.lr = 0.05;
  cfg.hidden_dim = 8;
  cfg.output_dim = 4;
  cfg.patience = 0;
  cfg.restore_best = false;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("separable toy reaches full dev accuracy within 200 epochs") {
  const auto toy = separable_toy();
  for (const auto head : {Head::Popularity, Head::Angle}) {
    auto cfg = toy_config();
    cfg.head = head;
    const auto r = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
    CHECK(r.trace.size() == 200);
    const bool reached = std::any_of(r.trace.begin(), r.trace.end(),
                                     [](const TraceRow& t) { return t.dev_accuracy == 1.0; });
    INFO("head " << to_string(head));
    CHECK(reached);
  }
}

TEST_CASE("zero learning rate freezes the parameters") {
  const auto toy = separable_toy();
  auto cfg = toy_config();
  cfg.lr = 0.0;
  cfg.epochs = 5;
  const auto r = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
  const auto init = init_model(toy.x.cols(), one_hop_catalog(), cfg);
  CHECK(r.model.gcn == init.gcn);
  CHECK(r.model.omega_raw == init.omega_raw);
  for (const auto& row : r.trace) CHECK(row.dev_accuracy == r.trace.front().dev_accuracy);
  // the loss on a fixed batch is the same before and after
  const std::vector<PairSample> pairs{{0, 1, true}, {0, 9, false}};
  CHECK(batch_loss_and_gradients(r.model, toy.dice, toy.x, pairs).loss ==
        batch_loss_and_gradients(init, toy.dice, toy.x, pairs).loss);
}

TEST_CASE("training is deterministic and early stopping restores the best epoch") {
  const auto toy = separable_toy();
  auto cfg = toy_config();
  cfg.epochs = 60;
  const auto a = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
  const auto b = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
  CHECK(a.model.gcn == b.model.gcn);
  CHECK(a.model.omega_raw == b.model.omega_raw);
  std::ostringstream ta, tb;
  write_trace_csv(ta, a.trace);
  write_trace_csv(tb, b.trace);
  CHECK(ta.str() == tb.str());
  CHECK(ta.str().rfind("epoch,loss,dev_accuracy,head\n", 0) == 0);

  cfg.patience = 5;
  cfg.restore_best = true;
  const auto early = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
  CHECK(early.trace.size() <= early.best_epoch + 5);
  const auto z = infer_embeddings(early.model, toy.dice, toy.x);
  CHECK(accuracy_on(early.model, z, toy.split, toy.split.dev) == early.trace[early.best_epoch - 1].dev_accuracy);
}

TEST_CASE("inductive training hides held-out events from the graph") {
  const auto toy = separable_toy();
  auto cfg = toy_config();
  cfg.epochs = 3;
  cfg.transductive = false;
  const auto a = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
  cfg.transductive = true;
  const auto b = train(toy.dice, toy.x, toy.split, one_hop_catalog(), cfg);
  CHECK_FALSE(a.model.gcn == b.model.gcn);
}

TEST_CASE("model checkpoint round trip and validation") {
  TrainConfig cfg;
  cfg.head = Head::Angle;
  cfg.exact_normalization = true;
  auto model = init_model(5, one_hop_catalog(), cfg);
  model.omega_raw = {0.1, -0.2, 0.3, 1e-17};
  const auto back = model_from_json(model_to_json(model));
  CHECK(back.gcn == model.gcn);
  CHECK(back.omega_raw == model.omega_raw);
  CHECK(back.signatures == model.signatures);
  CHECK(back.config.head == Head::Angle);
  CHECK(back.config.exact_normalization);
  CHECK_THROWS_AS(model_from_json("{}"), Error);

  cfg.c = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.c = 0.01;
  cfg.anchors = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(head_from_string("angle") == Head::Angle);
  CHECK_THROWS_AS(head_from_string("modulus"), Error);
}
