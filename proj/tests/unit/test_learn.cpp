#include <gtest/gtest.h>

#include "halflife/learn.hpp"
#include "support.hpp"

using namespace halflife;
using namespace halflife::learn;
namespace ts = testing_support;

namespace {

std::vector<int> labels(size_t zeros, size_t ones) {
  std::vector<int> y(zeros, 0);
  y.insert(y.end(), ones, 1);
  return y;
}

size_t count_class(const std::vector<int>& y, const std::vector<size_t>& idx, int c) {
  return static_cast<size_t>(std::count_if(idx.begin(), idx.end(), [&](size_t i) { return y[i] == c; }));
}

// Pair-counting AUC: P(score_pos > score_neg) + 0.5 P(tie).
double oracle_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double num = 0, pairs = 0;
  for (size_t i = 0; i < y.size(); ++i)
    for (size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / pairs;
}

Dataset two_feature(const std::vector<std::array<double, 2>>& x, const std::vector<int>& y) {
  auto d = make_dataset({"x1", "x2"});
  for (size_t i = 0; i < x.size(); ++i) d.add(x[i], y[i], "r" + std::to_string(i), "c");
  return d;
}

Dataset xor_data(size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::array<double, 2>> x;
  std::vector<int> y;
  for (size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    x.push_back({a, b});
    y.push_back((a > 0) != (b > 0) ? 1 : 0);
  }
  return two_feature(x, y);
}

double accuracy(const std::vector<int>& y, const std::vector<double>& p) {
  const auto pred = threshold(p);
  double hit = 0;
  for (size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return hit / static_cast<double>(y.size());
}

}  // namespace

// --------------------------------------------------------------------------
// split / folds

TEST(Split, StratifiedEightyTwenty) {
  const auto y = labels(50, 50);
  const auto s = split(y, {});
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(count_class(y, s.train, 0), 40u);
  EXPECT_EQ(count_class(y, s.train, 1), 40u);
  EXPECT_EQ(count_class(y, s.test, 0), 10u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
}

TEST(Split, SameSeedSamePartition) {
  const auto y = labels(30, 45);
  const auto a = split(y, {0.8, true, 5}), b = split(y, {0.8, true, 5}), c = split(y, {0.8, true, 6});
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, RoundingOnSmallClasses) {
  const auto y = labels(7, 3);
  const auto s = split(y, {});
  EXPECT_EQ(count_class(y, s.train, 0), 6u);  // round(5.6)
  EXPECT_EQ(count_class(y, s.train, 1), 2u);  // round(2.4)
  EXPECT_EQ(s.train.size() + s.test.size(), 10u);
}

TEST(Split, EachClassKeepsATestRow) {
  const auto y = labels(2, 2);
  const auto s = split(y, {0.95, true, 1});
  EXPECT_EQ(count_class(y, s.test, 0), 1u);
  EXPECT_EQ(count_class(y, s.test, 1), 1u);
}

TEST(Split, Errors) {
  EXPECT_THROW(split(labels(10, 1), {}), DomainError);
  EXPECT_THROW(split(labels(10, 10), {1.0, true, 1}), DomainError);
  const std::vector<int> bad = {0, 1, 2, 0, 1};
  EXPECT_THROW(split(bad, {}), DomainError);
}

TEST(Folds, PartitionAndBalance) {
  const auto y = labels(53, 47);
  const auto folds = stratified_folds(y, 5, 3);
  std::vector<int> seen(y.size(), 0);
  for (const auto& f : folds) {
    EXPECT_GE(f.size(), 19u);
    EXPECT_LE(f.size(), 21u);
    const auto pos = count_class(y, f, 1);
    EXPECT_GE(pos, 9u);
    EXPECT_LE(pos, 10u);
    for (size_t i : f) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

// --------------------------------------------------------------------------
// metrics

TEST(Metrics, HandComputedConfusion) {
  const std::vector<int> y = {1, 1, 1, 0, 0, 0}, pred = {1, 1, 0, 1, 0, 0};
  const std::vector<double> score = {0.9, 0.8, 0.3, 0.6, 0.2, 0.1};
  const auto r = evaluate(y, pred, score);
  EXPECT_NEAR(r.accuracy, 66.6667, 1e-3);
  EXPECT_NEAR(r.precision, 66.6667, 1e-3);
  EXPECT_NEAR(r.recall, 66.6667, 1e-3);
  EXPECT_NEAR(r.f1, 66.6667, 1e-3);
  EXPECT_NEAR(r.roc_auc, 100 * oracle_auc(y, score), 1e-9);
}

TEST(Metrics, Perfect) {
  const std::vector<int> y = {0, 1, 1, 0, 1};
  const std::vector<double> s = {0.1, 0.9, 0.8, 0.2, 0.7};
  const auto r = evaluate(y, y, s);
  EXPECT_DOUBLE_EQ(r.accuracy, 100);
  EXPECT_DOUBLE_EQ(r.precision, 100);
  EXPECT_DOUBLE_EQ(r.recall, 100);
  EXPECT_DOUBLE_EQ(r.f1, 100);
  EXPECT_DOUBLE_EQ(r.roc_auc, 100);
}

TEST(Metrics, ReversedScoresAndTies) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 9), bit(0, 1);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> y(40);
    std::vector<double> s(40), neg(40);
    for (size_t i = 0; i < 40; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : bit(rng);
      s[i] = level(rng);  // many ties
      neg[i] = -s[i];
    }
    const double auc = roc_auc(y, s);
    EXPECT_NEAR(auc, oracle_auc(y, s), 1e-12);
    EXPECT_NEAR(roc_auc(y, neg), 1 - auc, 1e-12);
  }
}

TEST(Metrics, AccuracyEqualsWeightedRecall) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int> y(30), p(30);
    std::vector<double> s(30);
    for (size_t i = 0; i < 30; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : bit(rng);
      p[i] = bit(rng);
      s[i] = static_cast<double>(i);
    }
    // independent weighted recall: sum_c (n_c / n) * tp_c / n_c = sum_c tp_c / n
    double tp = 0;
    for (size_t i = 0; i < 30; ++i) tp += y[i] == p[i];
    const auto r = evaluate(y, p, s);
    EXPECT_NEAR(r.recall, 100 * tp / 30, 1e-9);
    EXPECT_NEAR(r.accuracy, r.recall, 1e-9);
  }
}

TEST(Metrics, SingleClassAucIsAnError) {
  const std::vector<int> y = {1, 1};
  const std::vector<double> s = {0.1, 0.2};
  EXPECT_THROW(roc_auc(y, s), DomainError);
}

// --------------------------------------------------------------------------
// baseline

TEST(Baseline, ChannelMeansAgainstTheirMedian) {
  auto d = make_dataset({"f"});
  const double f[] = {0};
  auto add = [&](const char* ch, double h, int y) { d.add(f, y, "", ch, h); };
  add("fast", 2, 0);
  add("fast", 3, 0);
  add("mid", 6, 1);
  add("slow", 9, 1);
  add("slow", 11, 1);
  const auto m = baseline_fit(d);
  EXPECT_DOUBLE_EQ(m.median, 6);  // channel means 2.5, 6, 10
  EXPECT_EQ(m.predict("fast"), 0);
  EXPECT_EQ(m.predict("mid"), 0);  // <= median
  EXPECT_EQ(m.predict("slow"), 1);
  EXPECT_EQ(m.predict("unseen"), 1);  // 3 of 5 training rows are late
  const auto back = BaselineModel::from_json(m.to_json());
  EXPECT_EQ(back.predict("fast"), 0);
  EXPECT_EQ(back.median, m.median);
}

TEST(Baseline, ConstantWithinChannel) {
  const auto s = ts::synth_split(800, 2);
  const auto m = baseline_fit(s.train);
  const auto pred = m.predict(s.test);
  std::map<std::string, int> seen;
  for (size_t i = 0; i < pred.size(); ++i) {
    auto [it, fresh] = seen.emplace(s.test.channels[i], pred[i]);
    if (!fresh) {
      EXPECT_EQ(it->second, pred[i]);
    }
  }
}

// --------------------------------------------------------------------------
// logistic regression

TEST(Logistic, SeparableToy) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::array<double, 2>> x;
  std::vector<int> y;
  while (x.size() < 200) {
    const double a = u(rng), b = u(rng);
    const double m = a + 2 * b - 0.3;
    if (std::abs(m) < 0.05) continue;  // margin keeps the set separable
    x.push_back({a, b});
    y.push_back(m > 0 ? 1 : 0);
  }
  // separability oracle: the perceptron converges
  double w[3] = {0, 0, 0};
  bool clean = false;
  for (int epoch = 0; epoch < 10000 && !clean; ++epoch) {
    clean = true;
    for (size_t i = 0; i < x.size(); ++i) {
      const double s = w[0] + w[1] * x[i][0] + w[2] * x[i][1];
      const int t = y[i] ? 1 : -1;
      if (t * s <= 0) {
        clean = false;
        w[0] += t;
        w[1] += t * x[i][0];
        w[2] += t * x[i][1];
      }
    }
  }
  ASSERT_TRUE(clean);
  const auto d = two_feature(x, y);
  const auto m = logistic_fit(d, {1e-4, 10000, 1e-6});
  EXPECT_GE(accuracy(d.y, m.predict_proba(d)), 0.99);
}

TEST(Logistic, ZeroFeaturesGiveThePrior) {
  auto d = make_dataset({"a", "b"});
  const double zero[] = {0, 0};
  for (int i = 0; i < 30; ++i) d.add(zero, i < 12 ? 1 : 0);
  const auto m = logistic_fit(d);
  for (double p : m.predict_proba(d)) EXPECT_NEAR(p, 0.4, 1e-6);
}

TEST(Logistic, GradientMatchesFiniteDifferencesAtOptimum) {
  const auto s = ts::synth_split(600, 4);
  const double l2 = 1e-2;
  const auto m = logistic_fit(s.train, {l2, 10000, 1e-6});
  EXPECT_LT(m.gradient_norm, 1e-6);
  const auto z = standardise(s.train, m.mean, m.scale);
  const LogisticObjective f(z, s.train.y, s.train.cols(), l2);
  const auto g = f.gradient(m.theta);
  auto t = m.theta;
  const double h = 1e-5;
  double max_diff = 0;
  for (size_t j = 0; j < t.size(); ++j) {
    const double keep = t[j];
    t[j] = keep + h;
    const double up = f.value(t);
    t[j] = keep - h;
    const double down = f.value(t);
    t[j] = keep;
    max_diff = std::max(max_diff, std::abs((up - down) / (2 * h) - g[j]));
    EXPECT_LE(std::abs((up - down) / (2 * h)), 1e-5) << "component " << j;
  }
  EXPECT_LE(max_diff, 1e-5);
}

TEST(Logistic, JsonRoundTrip) {
  const auto s = ts::synth_split(400, 5);
  const auto m = logistic_fit(s.train);
  const auto back = LogisticModel::from_json(m.to_json());
  EXPECT_EQ(back.predict_proba(s.test), m.predict_proba(s.test));
}

// --------------------------------------------------------------------------
// gradient-boosted trees

TEST(Gbdt, ZeroTreesPredictThePrior) {
  const auto s = ts::synth_split(400, 6);
  GbdtParams p;
  p.n_trees = 0;
  const auto m = gbdt_fit(s.train, p);
  double pos = 0;
  for (int v : s.train.y) pos += v;
  const double prior = pos / static_cast<double>(s.train.rows());
  for (double pr : m.predict_proba(s.test)) EXPECT_NEAR(pr, prior, 1e-12);
}

TEST(Gbdt, SingleClassTrainingIsPriorOnly) {
  auto d = make_dataset({"a"});
  for (int i = 0; i < 10; ++i) {
    const double v[] = {static_cast<double>(i)};
    d.add(v, 1);
  }
  const auto m = gbdt_fit(d);
  EXPECT_TRUE(m.trees.empty());
  EXPECT_GT(sigmoid(m.margin(d.row(0))), 0.9);
}

TEST(Gbdt, XorNeedsDepthTwo) {
  const auto d = xor_data(200, 7);
  GbdtParams deep;
  deep.max_depth = 2;
  deep.n_trees = 100;
  deep.learning_rate = 0.3;
  const auto held_out = xor_data(2000, 8);
  const double acc_deep = accuracy(held_out.y, gbdt_fit(d, deep).predict_proba(held_out));
  EXPECT_GE(acc_deep, 0.9);
  // a thresholded additive model gets at most three quadrants right
  GbdtParams stump = deep;
  stump.max_depth = 1;
  const double acc_stump = accuracy(held_out.y, gbdt_fit(d, stump).predict_proba(held_out));
  EXPECT_LE(acc_stump, 0.78);
  EXPECT_GE(acc_deep - acc_stump, 0.1);
}

TEST(Gbdt, StumpPicksTheInformativeFeature) {
  const size_t m = 25, informative = 7;
  std::vector<std::string> names;
  for (size_t j = 0; j < m; ++j) names.push_back("f" + std::to_string(j));
  auto d = make_dataset(names);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> row(m);
  for (int i = 0; i < 300; ++i) {
    for (auto& v : row) v = u(rng);
    row[informative] = u(rng) < 0.5 ? 0 : 1;
    const int y = u(rng) < 0.9 ? static_cast<int>(row[informative]) : 1 - static_cast<int>(row[informative]);
    d.add(row, y);
  }
  GbdtParams p;
  p.n_trees = 1;
  p.max_depth = 1;
  const auto model = gbdt_fit(d, p);

  // oracle: gain of every split between distinct sorted values of every feature
  const double prior = model.base_score, pr = sigmoid(prior), lambda = p.lambda;
  std::vector<double> g(d.rows()), h(d.rows(), pr * (1 - pr));
  double G = 0, H = 0;
  for (size_t i = 0; i < d.rows(); ++i) {
    g[i] = pr - d.y[i];
    G += g[i];
    H += h[i];
  }
  double best_gain = -1;
  size_t best_feature = m;
  for (size_t j = 0; j < m; ++j) {
    std::vector<double> vals;
    for (size_t i = 0; i < d.rows(); ++i) vals.push_back(d.at(i, j));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = 0.5 * (vals[k] + vals[k + 1]);
      double gl = 0, hl = 0;
      for (size_t i = 0; i < d.rows(); ++i)
        if (d.at(i, j) < thr) {
          gl += g[i];
          hl += h[i];
        }
      const double gain = gl * gl / (hl + lambda) + (G - gl) * (G - gl) / (H - hl + lambda) - G * G / (H + lambda);
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = j;
      }
    }
  }
  ASSERT_EQ(best_feature, informative);
  ASSERT_EQ(model.trees.size(), 1u);
  EXPECT_EQ(model.trees[0].nodes[0].feature, static_cast<int>(informative));
  EXPECT_DOUBLE_EQ(model.trees[0].nodes[0].threshold, 0.5);
}

TEST(Gbdt, TrainingLossNonIncreasing) {
  const auto s = ts::synth_split(1000, 9);
  GbdtParams p;
  p.n_trees = 60;
  const auto m = gbdt_fit(s.train, p);
  ASSERT_EQ(m.loss_history.size(), 61u);
  for (size_t i = 1; i < m.loss_history.size(); ++i) EXPECT_LE(m.loss_history[i], m.loss_history[i - 1] + 1e-12);
}

TEST(Gbdt, InvariantToRowOrder) {
  const auto s = ts::synth_split(800, 10);
  std::vector<size_t> perm(s.train.rows());
  std::iota(perm.begin(), perm.end(), size_t{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(10));
  const auto shuffled = s.train.subset(perm);
  GbdtParams p;
  p.n_trees = 30;
  const auto a = gbdt_fit(s.train, p), b = gbdt_fit(shuffled, p);
  const auto pa = a.predict_proba(s.test), pb = b.predict_proba(s.test);
  for (size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-9);
  for (size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      EXPECT_EQ(a.trees[t].nodes[k].feature, b.trees[t].nodes[k].feature);
      EXPECT_EQ(a.trees[t].nodes[k].threshold, b.trees[t].nodes[k].threshold);
    }
  }
}

TEST(Gbdt, TreePrefixEqualsShorterModel) {
  const auto s = ts::synth_split(600, 11);
  GbdtParams p;
  p.n_trees = 40;
  const auto full = gbdt_fit(s.train, p);
  p.n_trees = 15;
  const auto short_model = gbdt_fit(s.train, p);
  EXPECT_EQ(full.predict_proba(s.test, 15), short_model.predict_proba(s.test));
}

TEST(Gbdt, DepthIsRespected) {
  const auto s = ts::synth_split(600, 12);
  GbdtParams p;
  p.n_trees = 10;
  p.max_depth = 2;
  for (const auto& t : gbdt_fit(s.train, p).trees) EXPECT_LE(t.depth(), 2);
}

TEST(Gbdt, JsonRoundTripAndSchemaCheck) {
  const auto s = ts::synth_split(500, 13);
  GbdtParams p;
  p.n_trees = 20;
  const auto m = gbdt_fit(s.train, p);
  const auto j = m.to_json();
  EXPECT_EQ(j["model"], "gbdt");
  const auto back = GbdtModel::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.predict_proba(s.test), m.predict_proba(s.test));

  auto renamed = s.test;
  renamed.feature_names[0] = "something_else";
  EXPECT_THROW(m.predict_proba(renamed), ValidationError);

  auto tampered = j;
  tampered["schema_hash"] = "0000000000000000";
  EXPECT_THROW(GbdtModel::from_json(tampered), ValidationError);
}

TEST(Gbdt, InvalidHyperparameters) {
  const auto d = xor_data(20, 1);
  GbdtParams p;
  p.learning_rate = 0;
  EXPECT_THROW(gbdt_fit(d, p), DomainError);
}

TEST(Gbdt, RejectsNonFiniteFeatures) {
  auto d = xor_data(20, 1);
  d.x[3] = std::nan("");
  EXPECT_THROW(gbdt_fit(d), DomainError);
  EXPECT_THROW(logistic_fit(d), DomainError);
}

// --------------------------------------------------------------------------
// grid search

TEST(GridSearch, SingletonGrid) {
  const auto s = ts::synth_split(500, 14);
  GbdtParams p;
  p.n_trees = 7;
  p.max_depth = 2;
  const auto r = grid_search(s.train, std::vector<GbdtParams>{p});
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.best.n_trees, 7);
  const auto l = grid_search(s.train, std::vector<LogisticParams>{{0.5, 100, 1e-6}});
  EXPECT_EQ(l.best.l2, 0.5);
}

TEST(GridSearch, DeterministicForFixedSeed) {
  const auto s = ts::synth_split(500, 15);
  std::vector<GbdtParams> grid;
  for (int d : {1, 2}) {
    for (int n : {10, 30}) {
      GbdtParams p;
      p.max_depth = d;
      p.n_trees = n;
      grid.push_back(p);
    }
  }
  const auto a = grid_search(s.train, grid, 5, 3), b = grid_search(s.train, grid, 5, 3, 2);
  EXPECT_EQ(a.best_index, b.best_index);
  ASSERT_EQ(a.scores.size(), b.scores.size());
  for (size_t i = 0; i < a.scores.size(); ++i) EXPECT_EQ(*a.scores[i], *b.scores[i]);
}

TEST(GridSearch, PrefixScoresMatchSeparateFits) {
  const auto s = ts::synth_split(400, 16);
  GbdtParams small, big;
  small.n_trees = 10;
  big.n_trees = 25;
  const auto joint = grid_search(s.train, std::vector<GbdtParams>{small, big}, 3, 1);
  const auto alone = grid_search(s.train, std::vector<GbdtParams>{small}, 3, 1);
  EXPECT_DOUBLE_EQ(*joint.scores[0], *alone.scores[0]);
}

TEST(GridSearch, DegenerateFoldsSkipEverything) {
  auto d = make_dataset({"a"});
  for (int i = 0; i < 20; ++i) {
    const double v[] = {static_cast<double>(i)};
    d.add(v, i < 3 ? 1 : 0);  // 3 positives cannot reach 5 folds
  }
  EXPECT_THROW(grid_search(d, std::vector<GbdtParams>{GbdtParams{}}, 5), DomainError);
  EXPECT_THROW(grid_search(d, default_logistic_grid(), 5), DomainError);
}

TEST(GridSearch, SelectsThePlantedDepth) {
  // The planted target is a sum of single-feature terms, so stumps are the
  // planted-optimal depth; the oracle is the exhaustive evaluation below.
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = ts::synth_split(5000, seed);
    std::vector<GbdtParams> grid;
    for (int depth : {1, 2, 4, 8}) {
      GbdtParams p;
      p.max_depth = depth;
      grid.push_back(p);
    }
    const auto r = grid_search(s.train, grid, 5, seed);
    hits += r.best.max_depth == 1;
  }
  EXPECT_GE(hits, 4);
}

TEST(Ordering, GbdtBeatsLogisticBeatsBaseline) {
  const auto s = ts::synth_split(5000, 1);
  const auto base = baseline_fit(s.train).predict(s.test);
  const std::vector<double> base_score(base.begin(), base.end());
  const auto lp = logistic_fit(s.train).predict_proba(s.test);
  GbdtParams p;
  p.learning_rate = 0.05;
  const auto gp = gbdt_fit(s.train, p).predict_proba(s.test);
  const auto rb = evaluate(s.test.y, base, base_score);
  const auto rl = evaluate(s.test.y, threshold(lp), lp);
  const auto rg = evaluate(s.test.y, threshold(gp), gp);
  EXPECT_GE(rg.f1, rl.f1);
  EXPECT_GE(rl.f1, rb.f1);
  EXPECT_GE(rg.roc_auc, 80);
}
