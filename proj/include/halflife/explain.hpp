#pragma once

// Path-dependent TreeSHAP for GbdtModel and permutation importance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "halflife/learn.hpp"
#include "halflife/parallel.hpp"

namespace halflife::explain {

struct Attribution {
  std::string video_id;
  double base_value = 0;    // expected margin
  std::vector<double> phi;  // margin (log-odds) scale
};

namespace detail {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0;
  double one_fraction = 0;
  double weight = 0;
};

inline void extend(std::vector<PathElement>& path, int depth, double zero, double one, int feature) {
  const auto d = static_cast<size_t>(depth);
  path[d] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    const auto u = static_cast<size_t>(i);
    path[u + 1].weight += one * path[u].weight * (i + 1) / static_cast<double>(depth + 1);
    path[u].weight = zero * path[u].weight * (depth - i) / static_cast<double>(depth + 1);
  }
}

inline void unwind(std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<size_t>(index)].one_fraction;
  const double zero = path[static_cast<size_t>(index)].zero_fraction;
  double next = path[static_cast<size_t>(depth)].weight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& w = path[static_cast<size_t>(i)].weight;
    if (one != 0) {
      const double tmp = w;
      w = next * (depth + 1) / ((i + 1) * one);
      next = tmp - w * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      w = w * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& p = path[static_cast<size_t>(i)];
    const auto& q = path[static_cast<size_t>(i + 1)];
    p.feature = q.feature;
    p.zero_fraction = q.zero_fraction;
    p.one_fraction = q.one_fraction;
  }
}

inline double unwound_sum(const std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<size_t>(index)].one_fraction;
  const double zero = path[static_cast<size_t>(index)].zero_fraction;
  double next = path[static_cast<size_t>(depth)].weight;
  double total = 0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0) {
      const double tmp = next * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next = path[static_cast<size_t>(i)].weight - tmp * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      total += path[static_cast<size_t>(i)].weight / zero / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

inline void recurse(const learn::Tree& tree, int node, const double* x, double scale, std::span<double> phi,
                    std::vector<PathElement> path, int depth, double zero, double one, int feature) {
  path.resize(static_cast<size_t>(depth) + 2);
  extend(path, depth, zero, one, feature);
  const auto& nd = tree.nodes[static_cast<size_t>(node)];
  if (nd.is_leaf()) {
    for (int i = 1; i <= depth; ++i) {
      const auto& p = path[static_cast<size_t>(i)];
      phi[static_cast<size_t>(p.feature)] +=
          unwound_sum(path, depth, i) * (p.one_fraction - p.zero_fraction) * nd.weight * scale;
    }
    return;
  }
  const int hot = x[nd.feature] < nd.threshold ? nd.left : nd.right;
  const int cold = hot == nd.left ? nd.right : nd.left;
  double incoming_zero = 1, incoming_one = 1;
  int k = 1;
  for (; k <= depth; ++k)
    if (path[static_cast<size_t>(k)].feature == nd.feature) break;
  if (k <= depth) {
    incoming_zero = path[static_cast<size_t>(k)].zero_fraction;
    incoming_one = path[static_cast<size_t>(k)].one_fraction;
    unwind(path, depth, k);
    --depth;
  }
  const double hot_zero = tree.nodes[static_cast<size_t>(hot)].cover / nd.cover;
  const double cold_zero = tree.nodes[static_cast<size_t>(cold)].cover / nd.cover;
  recurse(tree, hot, x, scale, phi, path, depth + 1, hot_zero * incoming_zero, incoming_one, nd.feature);
  recurse(tree, cold, x, scale, phi, path, depth + 1, cold_zero * incoming_zero, 0.0, nd.feature);
}

}  // namespace detail

/// Cover-weighted mean leaf value.
inline double expected_value(const learn::Tree& tree, int node = 0) {
  const auto& nd = tree.nodes[static_cast<size_t>(node)];
  if (nd.is_leaf()) return nd.weight;
  const auto& l = tree.nodes[static_cast<size_t>(nd.left)];
  const auto& r = tree.nodes[static_cast<size_t>(nd.right)];
  return (l.cover * expected_value(tree, nd.left) + r.cover * expected_value(tree, nd.right)) / nd.cover;
}

/// Adds scale * (Shapley values of one tree at x) to phi and returns
/// scale * the tree's expected value.
inline double tree_shap(const learn::Tree& tree, const double* x, std::span<double> phi, double scale = 1.0) {
  if (tree.nodes.empty()) return 0.0;
  for (const auto& nd : tree.nodes) {
    if (!nd.is_leaf() && !(nd.cover > 0)) throw DomainError("tree_shap: split node without cover");
    if (!nd.is_leaf() && static_cast<size_t>(nd.feature) >= phi.size())
      throw DomainError("tree_shap: split feature outside the row");
  }
  detail::recurse(tree, 0, x, scale, phi, {}, 0, 1.0, 1.0, -1);
  return scale * expected_value(tree);
}

inline Attribution tree_shap(const learn::GbdtModel& model, std::span<const double> row, std::string video_id = {}) {
  if (row.size() != model.n_features()) throw ValidationError("tree_shap: row width does not match the model schema");
  Attribution a;
  a.video_id = std::move(video_id);
  a.phi.assign(row.size(), 0.0);
  a.base_value = model.base_score;
  for (const auto& t : model.trees) a.base_value += tree_shap(t, row.data(), a.phi, model.learning_rate);
  return a;
}

inline std::vector<Attribution> tree_shap(const learn::GbdtModel& model, const learn::Dataset& d, int jobs = 1) {
  model.check_schema(d.feature_names);
  std::vector<Attribution> out(d.rows());
  parallel_for(d.rows(), jobs, [&](size_t i) { out[i] = tree_shap(model, {d.row(i), d.cols()}, d.ids[i]); });
  return out;
}

struct SummaryRow {
  std::string feature;
  size_t index = 0;
  double mean_abs_phi = 0;
  size_t rank = 0;  // 1-based
};

/// Features by descending mean |phi|, ties by feature index.
inline std::vector<SummaryRow> shap_summary(std::span<const Attribution> attributions,
                                            std::span<const std::string> names) {
  if (attributions.empty()) throw DomainError("shap_summary: no attributions");
  std::vector<SummaryRow> rows(names.size());
  for (size_t j = 0; j < names.size(); ++j) rows[j] = {names[j], j, 0.0, 0};
  for (const auto& a : attributions) {
    if (a.phi.size() != names.size()) throw ValidationError("shap_summary: attribution width mismatch");
    for (size_t j = 0; j < names.size(); ++j) rows[j].mean_abs_phi += std::abs(a.phi[j]);
  }
  for (auto& r : rows) r.mean_abs_phi /= static_cast<double>(attributions.size());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SummaryRow& a, const SummaryRow& b) { return a.mean_abs_phi > b.mean_abs_phi; });
  for (size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

struct Importance {
  std::string feature;
  double mean_drop = 0;
  double std_drop = 0;
};

using Predictor = std::function<double(const double*)>;                            // probability
using Metric = std::function<double(std::span<const int>, std::span<const double>)>;  // higher is better

inline double auc_metric(std::span<const int> y, std::span<const double> p) { return 100.0 * learn::roc_auc(y, p); }

/// Shuffles one column at a time and reports the mean and sample standard
/// deviation of the metric drop over n_repeats shuffles.
inline std::vector<Importance> permutation_importance(const Predictor& predict, const learn::Dataset& test,
                                                      const Metric& metric = auc_metric, int n_repeats = 10,
                                                      std::uint64_t seed = 42) {
  const size_t n = test.rows(), m = test.cols();
  std::vector<double> prob(n);
  for (size_t i = 0; i < n; ++i) prob[i] = predict(test.row(i));
  const double reference = metric(test.y, prob);
  std::mt19937_64 rng(seed);
  std::vector<Importance> out(m);
  std::vector<double> row(m);
  std::vector<size_t> perm(n);
  for (size_t j = 0; j < m; ++j) {
    std::vector<double> drops;
    for (int r = 0; r < n_repeats; ++r) {
      std::iota(perm.begin(), perm.end(), size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (size_t i = 0; i < n; ++i) {
        std::copy(test.row(i), test.row(i) + m, row.begin());
        row[j] = test.at(perm[i], j);
        prob[i] = predict(row.data());
      }
      drops.push_back(reference - metric(test.y, prob));
    }
    const double mean = std::accumulate(drops.begin(), drops.end(), 0.0) / static_cast<double>(drops.size());
    double var = 0;
    for (double d : drops) var += (d - mean) * (d - mean);
    out[j] = {test.feature_names[j], mean, drops.size() > 1 ? std::sqrt(var / static_cast<double>(drops.size() - 1)) : 0.0};
  }
  return out;
}

inline std::vector<Importance> permutation_importance(const learn::GbdtModel& model, const learn::Dataset& test,
                                                      const Metric& metric = auc_metric, int n_repeats = 10,
                                                      std::uint64_t seed = 42) {
  model.check_schema(test.feature_names);
  return permutation_importance([&](const double* x) { return learn::sigmoid(model.margin(x)); }, test, metric,
                                n_repeats, seed);
}

/// Indices ordered by descending mean drop, ties by index.
inline std::vector<size_t> importance_order(std::span<const Importance> imp) {
  std::vector<size_t> idx(imp.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return imp[a].mean_drop > imp[b].mean_drop; });
  return idx;
}

}  // namespace halflife::explain
