#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "halflife/core.hpp"
#include "halflife/learn.hpp"
#include "halflife/pipeline.hpp"
#include "halflife/synth.hpp"

namespace testing_support {

using namespace halflife;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("halflife_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct SynthSplit {
  synth::FeatureCorpus corpus;
  learn::Dataset train, test;
};

/// synth_features -> rule annotations -> binning/split -> datasets.
inline SynthSplit synth_split(size_t n, std::uint64_t seed, double noise = synth::kDefaultFeatureNoise) {
  SynthSplit s;
  s.corpus = synth::synth_features(n, seed, noise);
  std::map<std::string, double> hl;
  for (size_t i = 0; i < s.corpus.videos.size(); ++i) hl[s.corpus.videos[i].video_id] = s.corpus.half_life[i];
  RuleAnnotator annotator;
  PrepareOptions opt;
  opt.split.seed = seed;
  auto prep = prepare_features(s.corpus.videos, s.corpus.channels, hl, annotator, opt);
  std::vector<features::FeatureRecord> tr, te;
  for (auto& r : prep.records) (r.split == "train" ? tr : te).push_back(std::move(r));
  s.train = learn::from_records(tr);
  s.test = learn::from_records(te);
  return s;
}

// ---------------------------------------------------------------------------
// Gap-rule oracle: enumerates the missing runs and applies the rules as
// written, without sharing code with the validators.
// ---------------------------------------------------------------------------

struct Run {
  size_t start, length;
};

inline std::vector<Run> missing_runs(const std::vector<bool>& present) {
  std::vector<Run> runs;
  for (size_t i = 0; i < present.size();) {
    if (present[i]) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < present.size() && !present[j]) ++j;
    runs.push_back({i, j - i});
    i = j;
  }
  return runs;
}

/// Hourly rule: hours 1..12 hold at most one gap; >= 12 observed slots.
inline bool oracle_accept_a(const std::vector<bool>& present) {
  size_t early = 0, observed = 0;
  for (const auto& r : missing_runs(present))
    for (size_t i = r.start; i < r.start + r.length; ++i)
      if (i >= 1 && i <= 12) ++early;
  for (bool p : present) observed += p;
  return early <= 1 && observed >= 12;
}

/// Five-minute rule: every run has length <= 2 and the last slot is present.
inline bool oracle_accept_b(const std::vector<bool>& present) {
  if (!present.back()) return false;
  for (const auto& r : missing_runs(present))
    if (r.length > 2) return false;
  return true;
}

/// Linear interpolation between flanking observations, edge copy.
inline std::vector<double> oracle_impute(const std::vector<std::optional<double>>& v) {
  std::vector<double> out(v.size());
  std::vector<size_t> known;
  for (size_t i = 0; i < v.size(); ++i)
    if (v[i]) known.push_back(i);
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i]) {
      out[i] = *v[i];
      continue;
    }
    auto hi = std::lower_bound(known.begin(), known.end(), i);
    if (hi == known.begin()) out[i] = *v[*hi];
    else if (hi == known.end()) out[i] = *v[known.back()];
    else {
      const size_t b = *hi, a = *(hi - 1);
      out[i] = *v[a] + (*v[b] - *v[a]) * static_cast<double>(i - a) / static_cast<double>(b - a);
    }
  }
  return out;
}

/// Direct scan: first index whose views are >= half of the last value.
inline size_t oracle_half_life_slot(const std::vector<std::int64_t>& views) {
  for (size_t i = 0; i < views.size(); ++i)
    if (2 * views[i] >= views.back()) return i;
  return views.size() - 1;
}

// ---------------------------------------------------------------------------
// Shapley oracle: exact enumeration with cover-weighted conditional
// expectations as the value function.
// ---------------------------------------------------------------------------

inline double conditional_value(const learn::Tree& t, int node, const double* x, unsigned subset) {
  const auto& nd = t.nodes[static_cast<size_t>(node)];
  if (nd.is_leaf()) return nd.weight;
  if (subset >> nd.feature & 1u) return conditional_value(t, x[nd.feature] < nd.threshold ? nd.left : nd.right, x, subset);
  const auto& l = t.nodes[static_cast<size_t>(nd.left)];
  const auto& r = t.nodes[static_cast<size_t>(nd.right)];
  return (l.cover * conditional_value(t, nd.left, x, subset) + r.cover * conditional_value(t, nd.right, x, subset)) /
         nd.cover;
}

inline std::vector<double> brute_force_shapley(const learn::Tree& t, const double* x, int m) {
  std::vector<double> phi(static_cast<size_t>(m), 0.0);
  for (int j = 0; j < m; ++j) {
    for (unsigned s = 0; s < (1u << m); ++s) {
      if (s >> j & 1u) continue;
      const int k = __builtin_popcount(s);
      const double w = std::tgamma(k + 1) * std::tgamma(m - k) / std::tgamma(m + 1);
      phi[static_cast<size_t>(j)] += w * (conditional_value(t, 0, x, s | 1u << j) - conditional_value(t, 0, x, s));
    }
  }
  return phi;
}

/// Random complete tree of the given depth over m features with integer
/// leaf covers; internal covers are the sums of their children.
inline learn::Tree random_tree(std::mt19937_64& rng, int depth, int m) {
  std::uniform_int_distribution<int> feat(0, m - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  learn::Tree t;
  const size_t internal = (1u << depth) - 1, total = (1u << (depth + 1)) - 1;
  t.nodes.resize(total);
  for (size_t i = 0; i < internal; ++i) {
    auto& nd = t.nodes[i];
    nd.feature = feat(rng);
    nd.threshold = unit(rng);
    nd.left = static_cast<int>(2 * i + 1);
    nd.right = static_cast<int>(2 * i + 2);
  }
  for (size_t i = internal; i < total; ++i) {
    t.nodes[i].weight = 4 * unit(rng) - 2;
    t.nodes[i].cover = 1 + std::floor(20 * unit(rng));
  }
  for (size_t i = internal; i-- > 0;) t.nodes[i].cover = t.nodes[2 * i + 1].cover + t.nodes[2 * i + 2].cover;
  return t;
}

/// Spearman rank correlation: Pearson correlation of midranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size();) {
      size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace testing_support
