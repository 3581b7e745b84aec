#pragma once

// k-Shape clustering: z-normalisation, shape-based distance (SBD), centroid
// extraction by power iteration, silhouette-driven choice of k.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "halflife/core.hpp"
#include "halflife/fft.hpp"
#include "halflife/parallel.hpp"

namespace halflife::cluster {

using Series = std::vector<double>;

inline constexpr size_t kGridPoints = 97;  // every 15 minutes over 24 h
inline constexpr size_t kFftThreshold = 64;
inline constexpr double kPowerTolerance = 1e-10;
inline constexpr int kPowerMaxIterations = 1000;

/// Population z-normalisation; a (numerically) constant input maps to zeros.
inline Series znorm(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  Series out(x.size(), 0.0);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return out;
  for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

inline double norm(std::span<const double> x) { return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0)); }

/// Cross-correlation r[w + m - 1] = sum_t x[t] * y[t - w] by direct summation.
inline std::vector<double> cross_correlate_direct(std::span<const double> x, std::span<const double> y) {
  const long n = static_cast<long>(x.size()), m = static_cast<long>(y.size());
  std::vector<double> r(static_cast<size_t>(n + m - 1), 0.0);
  for (long w = -(m - 1); w < n; ++w) {
    double s = 0;
    for (long t = std::max(0L, w); t < std::min(n, m + w); ++t) s += x[static_cast<size_t>(t)] * y[static_cast<size_t>(t - w)];
    r[static_cast<size_t>(w + m - 1)] = s;
  }
  return r;
}

enum class CorrelationPath { automatic, direct, fft };

struct ShapeDistance {
  double distance = 0;
  int shift = 0;  // lag w: y shifted right by w best matches x
};

namespace detail {

inline ShapeDistance best_lag(std::span<const double> r, double denom, size_t m) {
  size_t best = 0;
  const long mm = static_cast<long>(m);
  // Ties prefer the smallest |lag|.
  for (size_t i = 1; i < r.size(); ++i) {
    const long wi = static_cast<long>(i) - (mm - 1), wb = static_cast<long>(best) - (mm - 1);
    if (r[i] > r[best] || (r[i] == r[best] && std::abs(wi) < std::abs(wb))) best = i;
  }
  ShapeDistance d;
  d.distance = std::clamp(1.0 - r[best] / denom, 0.0, 2.0);
  d.shift = static_cast<int>(static_cast<long>(best) - (mm - 1));
  return d;
}

}  // namespace detail

/// SBD between already z-normalised, non-constant series of equal length.
inline ShapeDistance sbd_normalized(std::span<const double> x, std::span<const double> y,
                                    CorrelationPath path = CorrelationPath::automatic) {
  const bool use_fft = path == CorrelationPath::fft || (path == CorrelationPath::automatic && x.size() > kFftThreshold);
  const auto r = use_fft ? fft::cross_correlate(x, y) : cross_correlate_direct(x, y);
  return detail::best_lag(r, norm(x) * norm(y), y.size());
}

/// A z-normalised series with its norm and (for long series) its padded
/// spectrum, so repeated SBD evaluations skip the forward transforms.
struct PreparedSeries {
  Series values;
  double norm = 0;
  std::vector<std::complex<double>> spectrum;

  PreparedSeries() = default;
  explicit PreparedSeries(Series z) : values(std::move(z)), norm(cluster::norm(values)) {
    if (values.size() > kFftThreshold) spectrum = fft::spectrum(values, fft::next_pow2(2 * values.size() - 1));
  }
  bool is_zero() const { return norm == 0; }
};

inline ShapeDistance sbd_prepared(const PreparedSeries& x, const PreparedSeries& y) {
  const auto r = x.spectrum.empty() ? cross_correlate_direct(x.values, y.values)
                                    : fft::correlate_spectra(x.spectrum, y.spectrum, x.values.size(), y.values.size());
  return detail::best_lag(r, x.norm * y.norm, y.values.size());
}

/// Shape-based distance in [0, 2] with the aligning shift.
inline ShapeDistance sbd(std::span<const double> x, std::span<const double> y,
                         CorrelationPath path = CorrelationPath::automatic) {
  if (x.size() != y.size()) throw DomainError("sbd: series lengths differ");
  if (x.size() < 2) throw DomainError("sbd: series must have length >= 2");
  const auto zx = znorm(x), zy = znorm(y);
  if (norm(zx) == 0 || norm(zy) == 0) throw DomainError("sbd: constant series");
  return sbd_normalized(zx, zy, path);
}

/// y'[t] = y[t - w], zero-padded.
inline Series shift_series(std::span<const double> y, int w) {
  const long n = static_cast<long>(y.size());
  Series out(y.size(), 0.0);
  for (long t = 0; t < n; ++t) {
    const long s = t - w;
    if (s >= 0 && s < n) out[static_cast<size_t>(t)] = y[static_cast<size_t>(s)];
  }
  return out;
}

/// Centroid of aligned members: leading eigenvector of Q S Q with
/// S = sum x x^T and Q the centring matrix, oriented towards the members and
/// z-normalised. All-zero members give a zero centroid.
inline Series shape_extract(std::span<const Series> members) {
  if (members.empty()) throw DomainError("shape_extract: no members");
  const size_t n = members.front().size();
  auto centre = [n](Series& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    for (auto& e : v) e -= mean;
  };
  auto apply = [&](const Series& v) {
    Series qv = v;
    centre(qv);
    Series out(n, 0.0);
    for (const auto& x : members) {
      const double dot = std::inner_product(x.begin(), x.end(), qv.begin(), 0.0);
      for (size_t i = 0; i < n; ++i) out[i] += dot * x[i];
    }
    centre(out);
    return out;
  };

  Series v(n, 0.0);
  for (const auto& x : members)
    for (size_t i = 0; i < n; ++i) v[i] += x[i];
  centre(v);
  if (norm(v) == 0) {
    for (const auto& x : members) {
      v = x;
      centre(v);
      if (norm(v) > 0) break;
    }
  }
  const double v0 = norm(v);
  if (v0 == 0) return Series(n, 0.0);
  for (auto& e : v) e /= v0;

  for (int it = 0; it < kPowerMaxIterations; ++it) {
    auto next = apply(v);
    const double nn = norm(next);
    if (nn == 0) return Series(n, 0.0);
    double diff = 0;
    for (size_t i = 0; i < n; ++i) {
      next[i] /= nn;
      diff += (next[i] - v[i]) * (next[i] - v[i]);
    }
    v = std::move(next);
    if (std::sqrt(diff) < kPowerTolerance) break;
  }
  double agreement = 0;
  for (const auto& x : members) agreement += std::inner_product(x.begin(), x.end(), v.begin(), 0.0);
  if (agreement < 0)
    for (auto& e : v) e = -e;
  return znorm(v);
}

/// Cumulative views resampled to the 15-minute grid and z-normalised.
inline Series shape_series(const ViewTrajectory& traj) {
  const auto views = traj.views();
  const double step = step_minutes(traj.resolution);
  Series out(kGridPoints);
  for (size_t j = 0; j < kGridPoints; ++j) {
    const double pos = static_cast<double>(j) * 15.0 / step;
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, views.size() - 1);
    const double w = pos - static_cast<double>(lo);
    out[j] = (1 - w) * static_cast<double>(views[lo]) + w * static_cast<double>(views[hi]);
  }
  return znorm(out);
}

struct ClusterModel {
  int k = 1;
  std::vector<Series> centroids;
  std::vector<std::string> ids;
  std::vector<int> labels;  // aligned with ids
  double inertia = 0;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;
  int repairs = 0;
  bool converged = false;

  std::map<std::string, int> assignments() const {
    std::map<std::string, int> m;
    for (size_t i = 0; i < ids.size(); ++i) m[ids[i]] = labels[i];
    return m;
  }
};

struct KShapeOptions {
  int max_iter = 100;
  std::uint64_t seed = 42;
  int restarts = 5;
  int jobs = 1;
};

namespace detail {

inline bool is_zero(const Series& s) {
  return std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; });
}

inline double distance_or_inf(const PreparedSeries& x, const PreparedSeries& c) {
  return c.is_zero() ? std::numeric_limits<double>::infinity() : sbd_prepared(c, x).distance;
}

inline PreparedSeries refine(std::span<const PreparedSeries> series, std::span<const int> labels, int j,
                             const PreparedSeries& centroid) {
  std::vector<Series> members;
  for (size_t i = 0; i < series.size(); ++i) {
    if (labels[i] != j) continue;
    if (centroid.is_zero()) {
      members.push_back(series[i].values);
    } else {
      members.push_back(shift_series(series[i].values, sbd_prepared(centroid, series[i]).shift));
    }
  }
  if (members.empty()) return PreparedSeries(Series(series.front().values.size(), 0.0));
  return PreparedSeries(shape_extract(members));
}

inline double cluster_cost(std::span<const PreparedSeries> series, std::span<const int> labels, int j,
                           const PreparedSeries& c) {
  double cost = 0;
  for (size_t i = 0; i < series.size(); ++i)
    if (labels[i] == j) cost += distance_or_inf(series[i], c);
  return cost;
}

inline ClusterModel kshape_once(std::span<const PreparedSeries> series, int k, const KShapeOptions& opt) {
  const size_t n = series.size();
  const size_t len = series.front().values.size();
  ClusterModel model;
  model.k = k;
  model.labels.resize(n);
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> draw(0, k - 1);
  for (auto& l : model.labels) l = draw(rng);
  std::vector<PreparedSeries> centroids(static_cast<size_t>(k), PreparedSeries(Series(len, 0.0)));
  std::vector<double> dist(n, 0.0);

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    model.iterations = iter + 1;
    for (int j = 0; j < k; ++j) {
      auto& c = centroids[static_cast<size_t>(j)];
      auto next = refine(series, model.labels, j, c);
      // A refined centroid replaces the old one only if the cluster's total
      // SBD does not grow, so inertia is monotone across iterations.
      if (c.is_zero() || cluster_cost(series, model.labels, j, next) <= cluster_cost(series, model.labels, j, c) + 1e-12)
        c = std::move(next);
    }
    for (size_t i = 0; i < n; ++i) dist[i] = distance_or_inf(series[i], centroids[static_cast<size_t>(model.labels[i])]);

    for (int j = 0; j < k; ++j) {
      std::vector<size_t> size(static_cast<size_t>(k), 0);
      for (int l : model.labels) ++size[static_cast<size_t>(l)];
      if (size[static_cast<size_t>(j)] > 0) continue;
      size_t far = n;
      for (size_t i = 0; i < n; ++i) {
        if (size[static_cast<size_t>(model.labels[i])] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      model.labels[far] = j;
      centroids[static_cast<size_t>(j)] = series[far];
      dist[far] = 0;
      ++model.repairs;
    }

    const auto before = model.labels;
    std::vector<int> next(n);
    parallel_for(n, opt.jobs, [&](size_t i) {
      int best = model.labels[i];
      double best_d = distance_or_inf(series[i], centroids[static_cast<size_t>(best)]);
      for (int j = 0; j < k; ++j) {
        const double d = distance_or_inf(series[i], centroids[static_cast<size_t>(j)]);
        if (d < best_d - 1e-12) {
          best = j;
          best_d = d;
        }
      }
      next[i] = best;
      dist[i] = best_d;
    });
    model.labels = std::move(next);
    model.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
    model.inertia_history.push_back(model.inertia);
    if (model.labels == before) {
      model.converged = true;
      break;
    }
  }
  for (auto& c : centroids) model.centroids.push_back(std::move(c.values));
  return model;
}

}  // namespace detail

/// k-Shape over z-normalised series. Random initial assignment from the seed;
/// with restarts > 1 the lowest-inertia run is kept.
inline ClusterModel kshape(std::span<const Series> series, int k, const KShapeOptions& opt = {},
                           std::span<const std::string> ids = {}) {
  if (k < 1) throw DomainError("kshape: k must be >= 1");
  if (static_cast<size_t>(k) > series.size()) throw DomainError("kshape: k exceeds the number of series");
  for (const auto& s : series) {
    if (s.size() != series.front().size()) throw DomainError("kshape: series lengths differ");
    if (detail::is_zero(s)) throw DomainError("kshape: constant series");
  }
  std::vector<PreparedSeries> prepared;
  prepared.reserve(series.size());
  for (const auto& s : series) prepared.emplace_back(s);
  ClusterModel best;
  std::mt19937_64 seeder(opt.seed);
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    auto run_opt = opt;
    run_opt.seed = r == 0 ? opt.seed : seeder();
    auto m = detail::kshape_once(prepared, k, run_opt);
    if (r == 0 || m.inertia < best.inertia) best = std::move(m);
  }
  if (ids.empty()) {
    for (size_t i = 0; i < series.size(); ++i) best.ids.push_back(std::to_string(i));
  } else {
    best.ids.assign(ids.begin(), ids.end());
  }
  return best;
}

/// Symmetric SBD matrix, row-major n x n.
inline std::vector<double> distance_matrix(std::span<const Series> series, int jobs = 1) {
  const size_t n = series.size();
  std::vector<PreparedSeries> prepared;
  prepared.reserve(n);
  for (const auto& s : series) prepared.emplace_back(s);
  std::vector<double> d(n * n, 0.0);
  parallel_for(n, jobs, [&](size_t i) {
    for (size_t j = i + 1; j < n; ++j) d[i * n + j] = sbd_prepared(prepared[i], prepared[j]).distance;
  });
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) d[j * n + i] = d[i * n + j];
  return d;
}

/// Mean silhouette; singleton clusters score 0.
inline double silhouette(std::span<const double> dist, std::span<const int> labels, int k) {
  const size_t n = labels.size();
  double total = 0;
  std::vector<double> sum(static_cast<size_t>(k));
  std::vector<size_t> size(static_cast<size_t>(k), 0);
  for (int l : labels) ++size[static_cast<size_t>(l)];
  for (size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (size_t j = 0; j < n; ++j)
      if (j != i) sum[static_cast<size_t>(labels[j])] += dist[i * n + j];
    const auto own = static_cast<size_t>(labels[i]);
    if (size[own] < 2) continue;
    const double a = sum[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < sum.size(); ++c)
      if (c != own && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    if (!std::isfinite(b)) continue;
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

inline constexpr double kLowSilhouette = 0.5;

struct BestK {
  int k = 0;
  std::vector<std::pair<int, double>> scores;
  bool low_score_warning = false;
  ClusterModel model;
};

/// Picks k in [k_min, k_max] with the highest mean SBD silhouette; ties keep
/// the smaller k. Flags a warning when the best score is below kLowSilhouette.
inline BestK best_k(std::span<const Series> series, int k_min, int k_max, const KShapeOptions& opt = {},
                    std::span<const std::string> ids = {}) {
  if (k_min < 2 || k_max < k_min) throw DomainError("best_k: need 2 <= k_min <= k_max");
  if (series.size() < static_cast<size_t>(k_max)) throw DomainError("best_k: fewer series than k_max");
  const auto dist = distance_matrix(series, opt.jobs);
  BestK out;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    auto model = kshape(series, k, opt, ids);
    const double s = silhouette(dist, model.labels, k);
    out.scores.emplace_back(k, s);
    if (s > best) {
      best = s;
      out.k = k;
      out.model = std::move(model);
    }
  }
  out.low_score_warning = best < kLowSilhouette;
  return out;
}

inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DomainError("adjusted_rand_index: size mismatch");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : table) index += c2(v);
  for (const auto& [_, v] : rows) sa += c2(v);
  for (const auto& [_, v] : cols) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace halflife::cluster
