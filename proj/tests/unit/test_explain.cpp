#include <gtest/gtest.h>

#include <set>

#include "halflife/explain.hpp"
#include "support.hpp"

using namespace halflife;
using namespace halflife::explain;
namespace ts = testing_support;

namespace {

learn::Node split(int f, double thr, int l, int r, double cover) {
  learn::Node n;
  n.feature = f;
  n.threshold = thr;
  n.left = l;
  n.right = r;
  n.cover = cover;
  return n;
}

learn::Node leaf(double w, double cover) {
  learn::Node n;
  n.weight = w;
  n.cover = cover;
  return n;
}

}  // namespace

TEST(TreeShap, MatchesBruteForceOnRandomTrees) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 300; ++rep) {
    const int m = 1 + rep % 4;
    const int depth = 1 + rep % 3;
    const auto t = ts::random_tree(rng, depth, m);
    std::vector<double> x(static_cast<size_t>(m));
    for (auto& v : x) v = u(rng);
    std::vector<double> phi(x.size(), 0.0);
    const double base = tree_shap(t, x.data(), phi);
    const auto want = ts::brute_force_shapley(t, x.data(), m);
    for (int j = 0; j < m; ++j) EXPECT_NEAR(phi[static_cast<size_t>(j)], want[static_cast<size_t>(j)], 1e-9);
    EXPECT_NEAR(base, ts::conditional_value(t, 0, x.data(), 0), 1e-12);
    EXPECT_NEAR(base + std::accumulate(phi.begin(), phi.end(), 0.0), t.predict(x.data()), 1e-9);
  }
}

TEST(TreeShap, SymmetricFeaturesShareCredit) {
  // y = 1 iff x0 >= 0.5 and x1 >= 0.5, built both ways round
  learn::Tree t;
  t.nodes = {split(0, 0.5, 1, 2, 40), leaf(0, 20),          split(1, 0.5, 3, 4, 20),
             leaf(0, 10),             leaf(1, 10)};
  learn::Tree u;
  u.nodes = {split(1, 0.5, 1, 2, 40), leaf(0, 20), split(0, 0.5, 3, 4, 20), leaf(0, 10), leaf(1, 10)};
  const double x[] = {0.9, 0.9, 0.3};
  std::vector<double> pt(3, 0.0), pu(3, 0.0);
  tree_shap(t, x, pt);
  tree_shap(u, x, pu);
  EXPECT_NEAR(pt[0], pt[1], 1e-12);
  EXPECT_NEAR(pt[0], pu[0], 1e-12);
  EXPECT_EQ(pt[2], 0.0);
}

TEST(TreeShap, UnusedFeatureIsExactlyZero) {
  const auto s = ts::synth_split(800, 2);
  learn::GbdtParams p;
  p.n_trees = 30;
  const auto m = learn::gbdt_fit(s.train, p);
  std::set<int> used;
  for (const auto& t : m.trees)
    for (const auto& nd : t.nodes)
      if (!nd.is_leaf()) used.insert(nd.feature);
  ASSERT_LT(used.size(), s.train.cols());
  for (const auto& a : tree_shap(m, s.test))
    for (size_t j = 0; j < a.phi.size(); ++j)
      if (!used.count(static_cast<int>(j))) {
        EXPECT_EQ(a.phi[j], 0.0);
      }
}

TEST(TreeShap, LocalAccuracyOnEveryTestRow) {
  const auto s = ts::synth_split(1500, 3);
  learn::GbdtParams p;
  p.n_trees = 80;
  p.max_depth = 4;
  const auto m = learn::gbdt_fit(s.train, p);
  const auto att = tree_shap(m, s.test, 2);
  ASSERT_EQ(att.size(), s.test.rows());
  for (size_t i = 0; i < att.size(); ++i) {
    const double sum = att[i].base_value + std::accumulate(att[i].phi.begin(), att[i].phi.end(), 0.0);
    EXPECT_NEAR(sum, m.margin(s.test.row(i)), 1e-6);
    EXPECT_EQ(att[i].video_id, s.test.ids[i]);
  }
}

TEST(TreeShap, SchemaMismatchRejected) {
  const auto s = ts::synth_split(300, 4);
  learn::GbdtParams p;
  p.n_trees = 3;
  const auto m = learn::gbdt_fit(s.train, p);
  auto other = s.test;
  std::swap(other.feature_names[0], other.feature_names[1]);
  EXPECT_THROW(tree_shap(m, other), ValidationError);
}

TEST(ShapSummary, AllZeroKeepsIndexOrder) {
  const std::vector<std::string> names = {"a", "b", "c"};
  const std::vector<Attribution> att = {{"x", 0.0, {0, 0, 0}}, {"y", 0.0, {0, 0, 0}}};
  const auto rows = shap_summary(att, names);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].index, i);
    EXPECT_EQ(rows[i].mean_abs_phi, 0.0);
    EXPECT_EQ(rows[i].rank, i + 1);
  }
}

TEST(ShapSummary, RanksByMeanAbsolute) {
  const std::vector<std::string> names = {"a", "b", "c"};
  const std::vector<Attribution> att = {{"x", 0.0, {0.1, -2, 1}}, {"y", 0.0, {-0.1, 0, -1.5}}};
  const auto rows = shap_summary(att, names);
  EXPECT_EQ(rows[0].feature, "c");
  EXPECT_DOUBLE_EQ(rows[0].mean_abs_phi, 1.25);
  EXPECT_EQ(rows[1].feature, "b");
  EXPECT_EQ(rows[2].feature, "a");
}

TEST(Permutation, DeterministicAndPlanted) {
  const auto s = ts::synth_split(3000, 5);
  learn::GbdtParams p;
  p.learning_rate = 0.05;
  const auto m = learn::gbdt_fit(s.train, p);
  const auto a = permutation_importance(m, s.test, auc_metric, 10, 7);
  const auto b = permutation_importance(m, s.test, auc_metric, 10, 7);
  ASSERT_EQ(a.size(), 25u);
  for (size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].mean_drop, b[j].mean_drop);
    EXPECT_EQ(a[j].std_drop, b[j].std_drop);
  }
  // strongest planted term: length carries weight 1.2
  EXPECT_EQ(a[importance_order(a)[0]].feature, "length");
  // publication weekday never enters the planted target
  const auto& day = a[*features::feature_index("day_of_week")];
  EXPECT_LT(std::abs(day.mean_drop), 2 * day.std_drop + 1e-9);
}

TEST(Permutation, UnusedColumnHasZeroDrop) {
  auto s = ts::synth_split(800, 6);
  // a predictor that ignores column 0 cannot lose anything when it is shuffled
  const Predictor f = [](const double* x) { return learn::sigmoid(-1e-3 * x[1] + 1e-2 * x[3]); };
  const auto imp = permutation_importance(f, s.test, auc_metric, 5, 1);
  EXPECT_EQ(imp[0].mean_drop, 0.0);
  EXPECT_EQ(imp[0].std_drop, 0.0);
}

TEST(RankAgreement, ShapAndPermutationAgree) {
  // Stumps, the depth grid search picks on this data. Deeper trees pick up
  // noise columns whose permutation drops are sign-random on 600 rows.
  const std::set<std::string> planted = {"channel_video_count", "length", "country_avg_half_life"};
  std::vector<double> rho;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = ts::synth_split(5000, seed);
    learn::GbdtParams p;
    p.max_depth = 1;
    const auto m = learn::gbdt_fit(s.train, p);
    const auto summary = shap_summary(tree_shap(m, s.test), s.test.feature_names);
    const auto imp = permutation_importance(m, s.test);
    std::vector<double> shap(25), perm(25);
    for (const auto& r : summary) shap[r.index] = r.mean_abs_phi;
    for (size_t j = 0; j < 25; ++j) perm[j] = imp[j].mean_drop;
    rho.push_back(ts::spearman(shap, perm));
    std::set<std::string> top_shap, top_perm;
    const auto order = importance_order(imp);
    for (size_t k = 0; k < 3; ++k) {
      top_shap.insert(summary[k].feature);
      top_perm.insert(imp[order[k]].feature);
    }
    EXPECT_EQ(top_shap, planted) << seed;
    EXPECT_EQ(top_perm, planted) << seed;
  }
  std::sort(rho.begin(), rho.end());
  EXPECT_GE(rho[2], 0.6);
}
