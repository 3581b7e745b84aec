#pragma once

// Early-vs-late classifiers: channel-average baseline, L2 logistic
// regression and gradient-boosted trees, with stratified splitting, k-fold
// grid search and weighted metrics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "halflife/csv.hpp"
#include "halflife/error.hpp"
#include "halflife/features.hpp"
#include "halflife/parallel.hpp"

namespace halflife::learn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Row-major design matrix with labels and the identifiers the baseline needs.
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::string> ids;
  std::vector<std::string> channels;
  std::vector<double> half_life;

  size_t rows() const { return y.size(); }
  size_t cols() const { return feature_names.size(); }
  const double* row(size_t r) const { return x.data() + r * cols(); }
  double at(size_t r, size_t c) const { return x[r * cols() + c]; }

  void add(std::span<const double> values, int label, std::string id = {}, std::string channel = {},
           double hours = 0.0) {
    if (values.size() != cols()) throw DomainError("Dataset::add: row has wrong width");
    x.insert(x.end(), values.begin(), values.end());
    y.push_back(label);
    ids.push_back(std::move(id));
    channels.push_back(std::move(channel));
    half_life.push_back(hours);
  }

  Dataset subset(std::span<const size_t> idx) const {
    Dataset d;
    d.feature_names = feature_names;
    d.x.reserve(idx.size() * cols());
    for (size_t i : idx) d.add({row(i), cols()}, y[i], ids[i], channels[i], half_life[i]);
    return d;
  }

  std::uint64_t schema_hash() const { return features::schema_hash(feature_names); }
};

inline Dataset make_dataset(std::vector<std::string> names) {
  Dataset d;
  d.feature_names = std::move(names);
  return d;
}

inline Dataset from_records(std::span<const features::FeatureRecord> records) {
  Dataset d = make_dataset(features::schema_names());
  for (const auto& r : records) {
    if (!r.fv.label) throw DomainError("from_records: row " + r.fv.video_id + " has no label");
    d.add(r.fv.values, *r.fv.label, r.fv.video_id, r.channel_id, r.half_life);
  }
  return d;
}

/// Reads features.csv. Predictor columns are everything except the leading
/// identifier columns and `label`. With `split` set, only rows of that split
/// are kept.
inline Dataset load_features(const csv::Table& t, std::optional<std::string> split = {}) {
  t.require({"video_id", "label"});
  for (const auto& f : features::kSchema) t.column(f.name);
  std::vector<std::string> names;
  std::vector<size_t> cols;
  for (size_t c = 0; c < t.header().size(); ++c) {
    const auto& h = t.header()[c];
    if (h == "label" || std::find(features::kLeadingColumns.begin(), features::kLeadingColumns.end(), h) !=
                            features::kLeadingColumns.end()) {
      continue;
    }
    names.push_back(h);
    cols.push_back(c);
  }
  if (split) t.require({"split"});
  Dataset d = make_dataset(names);
  std::vector<double> values(names.size());
  for (size_t r = 0; r < t.size(); ++r) {
    if (split && t.at(r, "split") != *split) continue;
    for (size_t j = 0; j < cols.size(); ++j) values[j] = t.number<double>(r, names[j]);
    const int label = t.number<int>(r, "label");
    if (label != 0 && label != 1) throw ValidationError(t.name() + ": label must be 0 or 1");
    d.add(values, label, t.at(r, "video_id"), t.has("channel_id") ? t.at(r, "channel_id") : std::string(),
          t.has("half_life") ? t.number<double>(r, "half_life") : 0.0);
  }
  return d;
}

inline void require_finite(const Dataset& d) {
  for (double v : d.x)
    if (!std::isfinite(v)) throw DomainError("non-finite feature value");
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.8;
  bool stratified = true;
  std::uint64_t seed = 42;
};

struct Split {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

/// Per class c, round(f * n_c) rows (clamped to [1, n_c - 1]) go to train
/// after a seeded shuffle. Both index lists are returned in ascending order.
inline Split split(std::span<const int> y, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) throw DomainError("train_fraction must be in (0, 1)");
  std::mt19937_64 rng(spec.seed);
  Split s;
  auto take = [&](std::vector<size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<long long>(idx.size());
    const auto k = std::clamp<long long>(std::llround(spec.train_fraction * static_cast<double>(n)), 1, n - 1);
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + k);
    s.test.insert(s.test.end(), idx.begin() + k, idx.end());
  };
  std::array<std::vector<size_t>, 2> by_class;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw DomainError("split: labels must be 0 or 1");
    by_class[static_cast<size_t>(y[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2) {
      throw DomainError("split: class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                        " rows, need at least 2");
    }
  }
  if (spec.stratified) {
    take(by_class[0]);
    take(by_class[1]);
  } else {
    std::vector<size_t> all(y.size());
    std::iota(all.begin(), all.end(), size_t{0});
    take(all);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Stratified k-fold assignment: each class is shuffled and dealt
/// round-robin, continuing the deal across classes.
inline std::vector<std::vector<size_t>> stratified_folds(std::span<const int> y, size_t k, std::uint64_t seed) {
  if (k < 2) throw DomainError("k-fold needs k >= 2");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<size_t>> folds(k);
  size_t next = 0;
  for (int c = 0; c < 2; ++c) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i : idx) folds[next++ % k].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct EvalReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, roc_auc = 0;  // percent
};

/// Every evaluate() call records |accuracy - weighted recall| here.
struct EvalAudit {
  std::atomic<size_t> evaluations{0};
  std::atomic<size_t> violations{0};
  static EvalAudit& instance() {
    static EvalAudit a;
    return a;
  }
};

/// Mann-Whitney AUC with midranks for tied scores, in [0, 1].
inline double roc_auc(std::span<const int> y, std::span<const double> scores) {
  const size_t n = y.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (size_t i = 0; i < n; ++i) {
    if (y[i] == 1) {
      ++pos;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw DomainError("ROC AUC undefined for a single-class y_true");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

/// Weighted F1 only; used inside grid search where AUC may be undefined.
inline double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred) {
  double tp[2] = {0, 0}, pred[2] = {0, 0}, sup[2] = {0, 0};
  for (size_t i = 0; i < y_true.size(); ++i) {
    ++sup[y_true[i]];
    ++pred[y_pred[i]];
    if (y_true[i] == y_pred[i]) ++tp[y_true[i]];
  }
  const double n = static_cast<double>(y_true.size());
  double f1 = 0;
  for (int c = 0; c < 2; ++c) {
    const double p = pred[c] > 0 ? tp[c] / pred[c] : 0.0;
    const double r = sup[c] > 0 ? tp[c] / sup[c] : 0.0;
    f1 += sup[c] / n * (p + r > 0 ? 2 * p * r / (p + r) : 0.0);
  }
  return 100.0 * f1;
}

/// Support-weighted precision, recall and F1 (zero when a class is never
/// predicted), accuracy and ROC AUC, all in percent.
inline EvalReport evaluate(std::span<const int> y_true, std::span<const int> y_pred, std::span<const double> scores) {
  if (y_true.size() != y_pred.size() || y_true.size() != scores.size())
    throw DomainError("evaluate: sequences are not aligned");
  if (y_true.empty()) throw DomainError("evaluate: empty input");
  double tp[2] = {0, 0}, pred[2] = {0, 0}, sup[2] = {0, 0};
  for (size_t i = 0; i < y_true.size(); ++i) {
    if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1))
      throw DomainError("evaluate: labels must be 0 or 1");
    ++sup[y_true[i]];
    ++pred[y_pred[i]];
    if (y_true[i] == y_pred[i]) ++tp[y_true[i]];
  }
  const double n = static_cast<double>(y_true.size());
  EvalReport r;
  r.accuracy = 100.0 * (tp[0] + tp[1]) / n;
  for (int c = 0; c < 2; ++c) {
    const double w = sup[c] / n;
    const double p = pred[c] > 0 ? tp[c] / pred[c] : 0.0;
    const double rc = sup[c] > 0 ? tp[c] / sup[c] : 0.0;
    r.precision += 100.0 * w * p;
    r.recall += 100.0 * w * rc;
    r.f1 += 100.0 * w * (p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0);
  }
  r.roc_auc = 100.0 * roc_auc(y_true, scores);
  auto& audit = EvalAudit::instance();
  ++audit.evaluations;
  if (std::abs(r.accuracy - r.recall) > 1e-9) ++audit.violations;
  return r;
}

inline std::vector<int> threshold(std::span<const double> prob, double cut = 0.5) {
  std::vector<int> out(prob.size());
  for (size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] >= cut ? 1 : 0;
  return out;
}

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double prior_log_odds(std::span<const int> y) {
  const double n = static_cast<double>(y.size());
  double pos = 0;
  for (int v : y) pos += v;
  const double p = std::clamp(n > 0 ? pos / n : 0.5, 1e-6, 1.0 - 1e-6);
  return logit(p);
}

// ---------------------------------------------------------------------------
// Channel-average baseline
// ---------------------------------------------------------------------------

/// Channels whose mean training half-life is at most the median of channel
/// means predict early (0), others late (1); unseen channels get the
/// training majority class.
struct BaselineModel {
  std::map<std::string, double> channel_mean;
  double median = 0;
  int majority = 0;

  int predict(const std::string& channel) const {
    auto it = channel_mean.find(channel);
    if (it == channel_mean.end()) return majority;
    return it->second <= median ? 0 : 1;
  }

  std::vector<int> predict(const Dataset& d) const {
    std::vector<int> out(d.rows());
    for (size_t i = 0; i < d.rows(); ++i) out[i] = predict(d.channels[i]);
    return out;
  }

  json to_json() const {
    return {{"model", "baseline"}, {"median", median}, {"majority", majority}, {"channel_mean", channel_mean}};
  }
  static BaselineModel from_json(const json& j) {
    BaselineModel m;
    m.median = j.at("median").get<double>();
    m.majority = j.at("majority").get<int>();
    m.channel_mean = j.at("channel_mean").get<std::map<std::string, double>>();
    return m;
  }
};

inline BaselineModel baseline_fit(const Dataset& train) {
  BaselineModel m;
  std::map<std::string, std::pair<double, size_t>> acc;
  size_t pos = 0;
  for (size_t i = 0; i < train.rows(); ++i) {
    acc[train.channels[i]].first += train.half_life[i];
    ++acc[train.channels[i]].second;
    pos += static_cast<size_t>(train.y[i]);
  }
  std::vector<double> means;
  for (const auto& [c, sn] : acc) {
    const double mean = sn.first / static_cast<double>(sn.second);
    m.channel_mean[c] = mean;
    means.push_back(mean);
  }
  std::sort(means.begin(), means.end());
  if (!means.empty()) {
    const size_t k = means.size();
    m.median = k % 2 ? means[k / 2] : 0.5 * (means[k / 2 - 1] + means[k / 2]);
  }
  m.majority = 2 * pos > train.rows() ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

struct LogisticParams {
  double l2 = 1e-3;
  int max_iter = 10000;
  double tolerance = 1e-6;
};

/// Mean log-loss plus (l2 / 2) |w|^2 over standardised rows. theta[0] is the
/// unpenalised intercept.
class LogisticObjective {
 public:
  LogisticObjective(const std::vector<double>& z, std::span<const int> y, size_t cols, double l2)
      : z_(z), y_(y), cols_(cols), l2_(l2) {}

  double value(std::span<const double> theta) const {
    double loss = 0;
    for (size_t i = 0; i < y_.size(); ++i) {
      const double m = margin(theta, i);
      loss += softplus(m) - y_[i] * m;
    }
    loss /= static_cast<double>(y_.size());
    double reg = 0;
    for (size_t j = 1; j < theta.size(); ++j) reg += theta[j] * theta[j];
    return loss + 0.5 * l2_ * reg;
  }

  std::vector<double> gradient(std::span<const double> theta) const {
    std::vector<double> g(theta.size(), 0.0);
    for (size_t i = 0; i < y_.size(); ++i) {
      const double r = sigmoid(margin(theta, i)) - y_[i];
      g[0] += r;
      const double* zi = z_.data() + i * cols_;
      for (size_t j = 0; j < cols_; ++j) g[j + 1] += r * zi[j];
    }
    const double n = static_cast<double>(y_.size());
    for (size_t j = 0; j < g.size(); ++j) g[j] = g[j] / n + (j ? l2_ * theta[j] : 0.0);
    return g;
  }

  size_t dimension() const { return cols_ + 1; }

 private:
  double margin(std::span<const double> theta, size_t i) const {
    const double* zi = z_.data() + i * cols_;
    double m = theta[0];
    for (size_t j = 0; j < cols_; ++j) m += theta[j + 1] * zi[j];
    return m;
  }

  const std::vector<double>& z_;
  std::span<const int> y_;
  size_t cols_;
  double l2_;
};

struct LogisticModel {
  std::vector<std::string> feature_names;
  std::vector<double> mean, scale;  // training standardisation
  std::vector<double> theta;        // intercept first
  int iterations = 0;
  double gradient_norm = 0;

  double margin(const double* x) const {
    double m = theta[0];
    for (size_t j = 0; j < mean.size(); ++j) m += theta[j + 1] * (x[j] - mean[j]) / scale[j];
    return m;
  }

  std::vector<double> predict_proba(const Dataset& d) const {
    if (d.cols() != mean.size()) throw DomainError("logistic: feature count mismatch");
    require_finite(d);
    std::vector<double> p(d.rows());
    for (size_t i = 0; i < d.rows(); ++i) p[i] = sigmoid(margin(d.row(i)));
    return p;
  }

  json to_json() const {
    return {{"model", "logistic"},
            {"feature_names", feature_names},
            {"schema_hash", features::hash_hex(features::schema_hash(feature_names))},
            {"mean", mean},
            {"scale", scale},
            {"theta", theta},
            {"iterations", iterations},
            {"gradient_norm", gradient_norm}};
  }
  static LogisticModel from_json(const json& j) {
    LogisticModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.mean = j.at("mean").get<std::vector<double>>();
    m.scale = j.at("scale").get<std::vector<double>>();
    m.theta = j.at("theta").get<std::vector<double>>();
    m.iterations = j.value("iterations", 0);
    m.gradient_norm = j.value("gradient_norm", 0.0);
    if (m.scale.size() != m.mean.size() || m.theta.size() != m.mean.size() + 1)
      throw ValidationError("logistic model: inconsistent parameter sizes");
    return m;
  }
};

/// Standardised copy of `d` using `mean` and `scale`.
inline std::vector<double> standardise(const Dataset& d, std::span<const double> mean, std::span<const double> scale) {
  std::vector<double> z(d.x.size());
  for (size_t i = 0; i < d.rows(); ++i)
    for (size_t j = 0; j < d.cols(); ++j) z[i * d.cols() + j] = (d.at(i, j) - mean[j]) / scale[j];
  return z;
}

/// Full-batch gradient descent with Armijo backtracking; stops when the
/// gradient norm drops below the tolerance or after max_iter steps.
inline LogisticModel logistic_fit(const Dataset& train, const LogisticParams& params = {}) {
  require_finite(train);
  if (train.rows() == 0) throw DomainError("logistic_fit: empty training set");
  const size_t n = train.rows(), m = train.cols();
  LogisticModel model;
  model.feature_names = train.feature_names;
  model.mean.assign(m, 0.0);
  model.scale.assign(m, 1.0);
  for (size_t j = 0; j < m; ++j) {
    double s = 0, ss = 0;
    for (size_t i = 0; i < n; ++i) s += train.at(i, j);
    const double mu = s / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) ss += (train.at(i, j) - mu) * (train.at(i, j) - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    model.mean[j] = mu;
    model.scale[j] = sd > 0 ? sd : 1.0;
  }
  const auto z = standardise(train, model.mean, model.scale);
  const LogisticObjective f(z, train.y, m, params.l2);

  std::vector<double> theta(m + 1, 0.0), trial(m + 1);
  theta[0] = prior_log_odds(train.y);
  double fx = f.value(theta);
  double step = 1.0;
  int it = 0;
  double gnorm = 0;
  for (; it < params.max_iter; ++it) {
    const auto g = f.gradient(theta);
    const double g2 = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    gnorm = std::sqrt(g2);
    if (gnorm < params.tolerance) break;
    step = std::min(step * 2.0, 1e4);
    while (true) {
      for (size_t j = 0; j <= m; ++j) trial[j] = theta[j] - step * g[j];
      const double ft = f.value(trial);
      if (ft <= fx - 0.5 * step * g2) {
        theta.swap(trial);
        fx = ft;
        break;
      }
      step *= 0.5;
      if (step < 1e-20) break;
    }
    if (step < 1e-20) break;
  }
  model.theta = std::move(theta);
  model.iterations = it;
  model.gradient_norm = gnorm;
  return model;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

struct GbdtParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;  // minimum hessian sum per child
  int jobs = 1;
};

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  double weight = 0;  // -G/(H+lambda) at this node
  double cover = 0;   // training rows reaching this node

  bool is_leaf() const { return feature < 0; }
};

/// Flat binary tree; node 0 is the root and x[feature] < threshold goes left.
struct Tree {
  std::vector<Node> nodes;

  double predict(const double* x) const {
    int i = 0;
    while (!nodes[static_cast<size_t>(i)].is_leaf()) {
      const auto& nd = nodes[static_cast<size_t>(i)];
      i = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(i)].weight;
  }

  int depth(int i = 0) const {
    const auto& nd = nodes[static_cast<size_t>(i)];
    return nd.is_leaf() ? 0 : 1 + std::max(depth(nd.left), depth(nd.right));
  }

  json to_json(int i = 0) const {
    const auto& nd = nodes[static_cast<size_t>(i)];
    if (nd.is_leaf()) return {{"leaf", nd.weight}, {"cover", nd.cover}};
    return {{"split_feature", nd.feature}, {"threshold", nd.threshold}, {"weight", nd.weight},
            {"cover", nd.cover},           {"left", to_json(nd.left)},  {"right", to_json(nd.right)}};
  }

  static Tree from_json(const json& j) {
    Tree t;
    std::function<int(const json&)> add = [&](const json& n) {
      const int id = static_cast<int>(t.nodes.size());
      t.nodes.emplace_back();
      Node nd;
      nd.cover = n.at("cover").get<double>();
      if (n.contains("leaf")) {
        nd.weight = n.at("leaf").get<double>();
      } else {
        nd.feature = n.at("split_feature").get<int>();
        nd.threshold = n.at("threshold").get<double>();
        nd.weight = n.value("weight", 0.0);
        nd.left = add(n.at("left"));
        nd.right = add(n.at("right"));
      }
      t.nodes[static_cast<size_t>(id)] = nd;
      return id;
    };
    add(j);
    return t;
  }
};

struct GbdtModel {
  std::vector<std::string> feature_names;
  double base_score = 0;  // prior log-odds
  double learning_rate = 0.1;
  int max_depth = 3;
  double lambda = 1.0;
  double gamma = 0.0;
  std::vector<Tree> trees;
  std::vector<double> loss_history;  // training log-loss before and after each round

  size_t n_features() const { return feature_names.size(); }

  /// Raw log-odds using the first `n_trees` trees (all by default).
  double margin(const double* x, size_t n_trees = SIZE_MAX) const {
    double m = 0;
    const size_t k = std::min(n_trees, trees.size());
    for (size_t t = 0; t < k; ++t) m += trees[t].predict(x);
    return base_score + learning_rate * m;
  }

  std::vector<double> predict_proba(const Dataset& d, size_t n_trees = SIZE_MAX) const {
    check_schema(d.feature_names);
    std::vector<double> p(d.rows());
    for (size_t i = 0; i < d.rows(); ++i) p[i] = sigmoid(margin(d.row(i), n_trees));
    return p;
  }

  void check_schema(std::span<const std::string> names) const {
    if (features::schema_hash(names) != features::schema_hash(feature_names)) {
      throw ValidationError("schema hash mismatch: model " + features::hash_hex(features::schema_hash(feature_names)) +
                            ", data " + features::hash_hex(features::schema_hash(names)));
    }
  }

  json to_json() const {
    json trees_j = json::array();
    for (const auto& t : trees) trees_j.push_back(t.to_json());
    return {{"model", "gbdt"},
            {"feature_names", feature_names},
            {"schema_hash", features::hash_hex(features::schema_hash(feature_names))},
            {"base_score", base_score},
            {"learning_rate", learning_rate},
            {"max_depth", max_depth},
            {"lambda", lambda},
            {"gamma", gamma},
            {"n_trees", trees.size()},
            {"loss_history", loss_history},
            {"trees", trees_j}};
  }

  static GbdtModel from_json(const json& j) {
    GbdtModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (j.at("schema_hash").get<std::string>() != features::hash_hex(features::schema_hash(m.feature_names)))
      throw ValidationError("gbdt model: stored schema hash does not match its feature names");
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.max_depth = j.at("max_depth").get<int>();
    m.lambda = j.at("lambda").get<double>();
    m.gamma = j.value("gamma", 0.0);
    m.loss_history = j.value("loss_history", std::vector<double>{});
    for (const auto& t : j.at("trees")) m.trees.push_back(Tree::from_json(t));
    for (const auto& t : m.trees) {
      for (const auto& nd : t.nodes) {
        if (!std::isfinite(nd.weight)) throw ValidationError("gbdt model: non-finite leaf weight");
        if (!nd.is_leaf() && static_cast<size_t>(nd.feature) >= m.n_features())
          throw ValidationError("gbdt model: split feature index out of range");
      }
    }
    return m;
  }
};

namespace detail {

inline double mean_log_loss(std::span<const double> margin, std::span<const int> y) {
  double s = 0;
  for (size_t i = 0; i < y.size(); ++i) s += softplus(margin[i]) - y[i] * margin[i];
  return s / static_cast<double>(y.size());
}

struct Candidate {
  double gain = 0;
  double threshold = 0;
  int feature = -1;
};

/// Grows one tree level by level. For every open node and feature, rows are
/// scanned in presorted order and each boundary between distinct values is
/// scored; ties in gain keep the lower feature, then the lower threshold.
inline Tree grow_tree(const Dataset& d, const std::vector<std::vector<size_t>>& order, std::span<const double> g,
                      std::span<const double> h, const GbdtParams& p) {
  const size_t n = d.rows(), m = d.cols();
  Tree tree;
  std::vector<int> node_of(n, 0);
  struct Stats {
    double G = 0, H = 0, count = 0;
  };
  std::vector<Stats> stats(1);
  for (size_t i = 0; i < n; ++i) {
    stats[0].G += g[i];
    stats[0].H += h[i];
    stats[0].count += 1;
  }
  tree.nodes.push_back({-1, 0, -1, -1, -stats[0].G / (stats[0].H + p.lambda), stats[0].count});
  std::vector<int> open = {0};
  auto score = [&](double G, double H) { return G * G / (H + p.lambda); };

  for (int depth = 0; depth < p.max_depth && !open.empty(); ++depth) {
    // slot[node] = position in `open`, or -1.
    std::vector<int> slot(tree.nodes.size(), -1);
    for (size_t k = 0; k < open.size(); ++k) slot[static_cast<size_t>(open[k])] = static_cast<int>(k);
    std::vector<std::vector<Candidate>> best(m, std::vector<Candidate>(open.size()));

    parallel_for(m, p.jobs, [&](size_t f) {
      std::vector<Stats> left(open.size());
      std::vector<double> last(open.size(), 0.0);
      std::vector<char> seen(open.size(), 0);
      auto& out = best[f];
      for (size_t i : order[f]) {
        const int s = slot[static_cast<size_t>(node_of[i])];
        if (s < 0) continue;
        const auto k = static_cast<size_t>(s);
        const double v = d.at(i, f);
        if (seen[k] && v > last[k]) {
          const auto& tot = stats[static_cast<size_t>(open[k])];
          const auto& L = left[k];
          const double GR = tot.G - L.G, HR = tot.H - L.H;
          if (L.H >= p.min_child_weight && HR >= p.min_child_weight) {
            const double gain = 0.5 * (score(L.G, L.H) + score(GR, HR) - score(tot.G, tot.H)) - p.gamma;
            if (gain > out[k].gain) {
              double thr = last[k] + (v - last[k]) / 2;
              if (!(thr > last[k])) thr = v;
              out[k] = {gain, thr, static_cast<int>(f)};
            }
          }
        }
        left[k].G += g[i];
        left[k].H += h[i];
        left[k].count += 1;
        last[k] = v;
        seen[k] = 1;
      }
    });

    std::vector<int> next;
    std::vector<int> split_left(tree.nodes.size(), -1);
    for (size_t k = 0; k < open.size(); ++k) {
      Candidate c;
      for (size_t f = 0; f < m; ++f)
        if (best[f][k].feature >= 0 && best[f][k].gain > c.gain) c = best[f][k];
      if (c.feature < 0) continue;
      const int id = open[k];
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      stats.resize(tree.nodes.size());
      auto& nd = tree.nodes[static_cast<size_t>(id)];
      nd.feature = c.feature;
      nd.threshold = c.threshold;
      nd.left = l;
      nd.right = l + 1;
      split_left[static_cast<size_t>(id)] = l;
      next.push_back(l);
      next.push_back(l + 1);
    }
    if (next.empty()) break;
    for (size_t i = 0; i < n; ++i) {
      const auto id = static_cast<size_t>(node_of[i]);
      if (id >= split_left.size() || split_left[id] < 0) continue;
      const auto& nd = tree.nodes[id];
      node_of[i] = d.at(i, static_cast<size_t>(nd.feature)) < nd.threshold ? nd.left : nd.right;
      auto& s = stats[static_cast<size_t>(node_of[i])];
      s.G += g[i];
      s.H += h[i];
      s.count += 1;
    }
    for (int id : next) {
      auto& nd = tree.nodes[static_cast<size_t>(id)];
      const auto& s = stats[static_cast<size_t>(id)];
      nd.weight = -s.G / (s.H + p.lambda);
      nd.cover = s.count;
    }
    open = std::move(next);
  }
  return tree;
}

}  // namespace detail

/// Second-order boosting on logistic loss with exact greedy splits.
/// A single-class training set yields the prior-only model.
inline GbdtModel gbdt_fit(const Dataset& train, const GbdtParams& p = {}) {
  require_finite(train);
  if (p.n_trees < 0 || p.max_depth < 0 || !(p.learning_rate > 0) || p.lambda < 0)
    throw DomainError("gbdt_fit: invalid hyperparameters");
  const size_t n = train.rows(), m = train.cols();
  GbdtModel model;
  model.feature_names = train.feature_names;
  model.learning_rate = p.learning_rate;
  model.max_depth = p.max_depth;
  model.lambda = p.lambda;
  model.gamma = p.gamma;
  model.base_score = prior_log_odds(train.y);
  if (n == 0) return model;
  std::vector<double> margin(n, model.base_score);
  model.loss_history.push_back(detail::mean_log_loss(margin, train.y));
  const bool single_class =
      std::all_of(train.y.begin(), train.y.end(), [&](int v) { return v == train.y.front(); });
  if (single_class) return model;

  std::vector<std::vector<size_t>> order(m, std::vector<size_t>(n));
  parallel_for(m, p.jobs, [&](size_t f) {
    std::iota(order[f].begin(), order[f].end(), size_t{0});
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](size_t a, size_t b) { return train.at(a, f) < train.at(b, f); });
  });

  std::vector<double> g(n), h(n);
  for (int t = 0; t < p.n_trees; ++t) {
    for (size_t i = 0; i < n; ++i) {
      const double pr = sigmoid(margin[i]);
      g[i] = pr - train.y[i];
      h[i] = pr * (1.0 - pr);
    }
    auto tree = detail::grow_tree(train, order, g, h, p);
    for (size_t i = 0; i < n; ++i) margin[i] += p.learning_rate * tree.predict(train.row(i));
    model.trees.push_back(std::move(tree));
    model.loss_history.push_back(detail::mean_log_loss(margin, train.y));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

inline std::vector<GbdtParams> default_gbdt_grid() {
  std::vector<GbdtParams> grid;
  for (int depth : {3, 4, 6})
    for (double lr : {0.05, 0.1, 0.3})
      for (int trees : {100, 200, 400}) {
        GbdtParams gp;
        gp.max_depth = depth;
        gp.learning_rate = lr;
        gp.n_trees = trees;
        grid.push_back(gp);
      }
  return grid;
}

inline std::vector<LogisticParams> default_logistic_grid() {
  std::vector<LogisticParams> grid;
  for (double l2 : {1e-4, 1e-3, 1e-2, 1e-1}) grid.push_back({l2, 10000, 1e-6});
  return grid;
}

template <class Params>
struct GridResult {
  Params best;
  size_t best_index = 0;
  std::vector<std::optional<double>> scores;  // mean weighted F1 per entry; nullopt = skipped
  std::vector<std::string> warnings;
};

namespace detail {

inline bool single_class(std::span<const int> y) {
  return std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); });
}

template <class Params>
GridResult<Params> select(const std::vector<Params>& grid, std::vector<std::vector<double>> fold_scores,
                          std::vector<char> skipped, std::vector<std::string> warnings) {
  GridResult<Params> r;
  r.warnings = std::move(warnings);
  std::optional<size_t> best;
  for (size_t c = 0; c < grid.size(); ++c) {
    if (skipped[c]) {
      r.scores.emplace_back();
      continue;
    }
    const auto& s = fold_scores[c];
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    r.scores.emplace_back(mean);
    if (!best || mean > *r.scores[*best]) best = c;
  }
  if (!best) throw DomainError("grid search: every configuration was skipped");
  r.best_index = *best;
  r.best = grid[*best];
  return r;
}

struct Folds {
  std::vector<Dataset> train, valid;
  std::vector<char> degenerate;
};

inline Folds make_folds(const Dataset& d, size_t k, std::uint64_t seed) {
  const auto folds = stratified_folds(d.y, k, seed);
  Folds f;
  for (size_t i = 0; i < k; ++i) {
    std::vector<size_t> tr;
    for (size_t j = 0; j < k; ++j)
      if (j != i) tr.insert(tr.end(), folds[j].begin(), folds[j].end());
    std::sort(tr.begin(), tr.end());
    f.train.push_back(d.subset(tr));
    f.valid.push_back(d.subset(folds[i]));
    f.degenerate.push_back(f.valid.back().rows() == 0 || single_class(f.train.back().y) ||
                           single_class(f.valid.back().y));
  }
  return f;
}

}  // namespace detail

/// Stratified k-fold search maximising mean weighted F1; ties keep the
/// earlier entry. Entries differing only in n_trees share one fit per fold
/// and are scored on tree prefixes.
inline GridResult<GbdtParams> grid_search(const Dataset& train, const std::vector<GbdtParams>& grid, size_t k = 5,
                                          std::uint64_t seed = 42, int jobs = 1) {
  if (grid.empty()) throw DomainError("grid search: empty grid");
  const auto folds = detail::make_folds(train, k, seed);
  std::vector<std::string> warnings;
  std::vector<char> skipped(grid.size(), 0);
  for (size_t i = 0; i < k; ++i) {
    if (folds.degenerate[i]) {
      warnings.push_back("fold " + std::to_string(i) + " has a single class; skipping every configuration");
      std::fill(skipped.begin(), skipped.end(), 1);
    }
  }
  // Group entries by everything except n_trees.
  std::vector<std::vector<size_t>> groups;
  for (size_t c = 0; c < grid.size(); ++c) {
    bool placed = false;
    for (auto& grp : groups) {
      const auto& a = grid[grp.front()];
      const auto& b = grid[c];
      if (a.max_depth == b.max_depth && a.learning_rate == b.learning_rate && a.lambda == b.lambda &&
          a.gamma == b.gamma && a.min_child_weight == b.min_child_weight) {
        grp.push_back(c);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({c});
  }
  std::vector<std::vector<double>> fold_scores(grid.size(), std::vector<double>(k, 0.0));
  if (!skipped.empty() && !skipped[0]) {
    parallel_for(groups.size() * k, jobs, [&](size_t task) {
      const auto& grp = groups[task / k];
      const size_t fold = task % k;
      GbdtParams p = grid[grp.front()];
      for (size_t c : grp) p.n_trees = std::max(p.n_trees, grid[c].n_trees);
      p.jobs = 1;
      const auto model = gbdt_fit(folds.train[fold], p);
      for (size_t c : grp) {
        const auto pred = threshold(model.predict_proba(folds.valid[fold], static_cast<size_t>(grid[c].n_trees)));
        fold_scores[c][fold] = weighted_f1(folds.valid[fold].y, pred);
      }
    });
  }
  return detail::select(grid, std::move(fold_scores), std::move(skipped), std::move(warnings));
}

inline GridResult<LogisticParams> grid_search(const Dataset& train, const std::vector<LogisticParams>& grid,
                                              size_t k = 5, std::uint64_t seed = 42, int jobs = 1) {
  if (grid.empty()) throw DomainError("grid search: empty grid");
  const auto folds = detail::make_folds(train, k, seed);
  std::vector<std::string> warnings;
  std::vector<char> skipped(grid.size(), 0);
  for (size_t i = 0; i < k; ++i) {
    if (folds.degenerate[i]) {
      warnings.push_back("fold " + std::to_string(i) + " has a single class; skipping every configuration");
      std::fill(skipped.begin(), skipped.end(), 1);
    }
  }
  std::vector<std::vector<double>> fold_scores(grid.size(), std::vector<double>(k, 0.0));
  if (!skipped[0]) {
    parallel_for(grid.size() * k, jobs, [&](size_t task) {
      const size_t c = task / k, fold = task % k;
      const auto model = logistic_fit(folds.train[fold], grid[c]);
      const auto pred = threshold(model.predict_proba(folds.valid[fold]));
      fold_scores[c][fold] = weighted_f1(folds.valid[fold].y, pred);
    });
  }
  return detail::select(grid, std::move(fold_scores), std::move(skipped), std::move(warnings));
}

}  // namespace halflife::learn
