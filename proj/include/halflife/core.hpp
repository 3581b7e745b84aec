#pragma once

// Trajectory domain types, Dataset A/B gap rules, gap filling and the
// 24-hour half-life metric.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halflife/error.hpp"

namespace halflife {

inline constexpr int kWindowMinutes = 1440;

enum class Resolution { hourly, five_minute };

inline constexpr int step_minutes(Resolution r) { return r == Resolution::hourly ? 60 : 5; }
inline constexpr size_t slot_count(Resolution r) { return kWindowMinutes / step_minutes(r) + 1; }

inline std::string_view to_string(Resolution r) {
  return r == Resolution::hourly ? "hourly" : "five-minute";
}

inline Resolution parse_resolution(std::string_view s) {
  if (s == "hourly") return Resolution::hourly;
  if (s == "five-minute" || s == "five_minute" || s == "5min") return Resolution::five_minute;
  throw ValidationError("unknown resolution '" + std::string(s) + "'");
}

struct Snapshot {
  int minute = 0;
  std::int64_t views = 0;
  std::optional<std::int64_t> likes;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// Cumulative views of one video on a fixed grid. A disengaged slot is a
/// missing observation.
struct ViewTrajectory {
  std::string video_id;
  Resolution resolution = Resolution::hourly;
  std::vector<std::optional<Snapshot>> slots;

  static ViewTrajectory empty(std::string id, Resolution r) {
    ViewTrajectory t{std::move(id), r, {}};
    t.slots.resize(slot_count(r));
    return t;
  }

  int minute_of(size_t slot) const { return static_cast<int>(slot) * step_minutes(resolution); }

  /// Places snapshots on the grid. Throws on off-grid or duplicate minutes.
  static ViewTrajectory from_snapshots(std::string id, Resolution r, std::span<const Snapshot> snaps) {
    auto t = empty(std::move(id), r);
    const int step = step_minutes(r);
    for (const auto& s : snaps) {
      if (s.minute < 0 || s.minute > kWindowMinutes || s.minute % step != 0) {
        throw ValidationError(t.video_id + ": minute " + std::to_string(s.minute) + " is off the " +
                              std::string(to_string(r)) + " grid");
      }
      auto& slot = t.slots[static_cast<size_t>(s.minute / step)];
      if (slot) throw ValidationError(t.video_id + ": duplicate minute " + std::to_string(s.minute));
      slot = s;
    }
    return t;
  }

  std::vector<std::int64_t> views() const {
    std::vector<std::int64_t> v;
    v.reserve(slots.size());
    for (const auto& s : slots) {
      if (!s) throw DomainError(video_id + ": trajectory has missing slots");
      v.push_back(s->views);
    }
    return v;
  }

  size_t missing_count() const {
    return static_cast<size_t>(std::count_if(slots.begin(), slots.end(), [](const auto& s) { return !s; }));
  }

  friend bool operator==(const ViewTrajectory&, const ViewTrajectory&) = default;
};

struct VideoRecord {
  std::string video_id;
  std::string channel_id;
  std::string title;
  std::int64_t length = 0;  // seconds
  bool is_age_restricted = false;
  std::string thumbnail_url;
  std::string published_datetime;  // ISO 8601, UTC
  std::int64_t num_comments = 0;
  std::string country;
};

struct ChannelRecord {
  std::string channel_id;
  std::int64_t channel_view_count = 0;
  std::int64_t channel_video_count = 0;
  std::int64_t channel_num_subscribers = 0;
  int joined_year = 2005;
  std::string country;
};

struct HalfLife {
  double hours = 0.0;
  double overshoot_pct = 0.0;
  size_t slot = 0;
};

/// Thrown when the 24-hour total is zero.
class UndefinedHalfLife : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Structural check shared by both validators: grid length, slot minutes,
/// and non-decreasing views over the observed slots.
inline void check_well_formed(const ViewTrajectory& traj) {
  if (traj.slots.size() != slot_count(traj.resolution)) {
    throw ValidationError(traj.video_id + ": expected " + std::to_string(slot_count(traj.resolution)) +
                          " slots, got " + std::to_string(traj.slots.size()));
  }
  std::optional<std::int64_t> prev;
  for (size_t i = 0; i < traj.slots.size(); ++i) {
    const auto& s = traj.slots[i];
    if (!s) continue;
    if (s->minute != traj.minute_of(i)) {
      throw ValidationError(traj.video_id + ": slot " + std::to_string(i) + " carries minute " +
                            std::to_string(s->minute));
    }
    if (s->views < 0) throw ValidationError(traj.video_id + ": negative view count");
    if (prev && s->views < *prev) {
      throw ValidationError(traj.video_id + ": cumulative views decrease at minute " + std::to_string(s->minute));
    }
    prev = s->views;
  }
}

struct Decision {
  bool accepted = true;
  std::string reason;

  static Decision accept() { return {}; }
  static Decision reject(std::string why) { return {false, std::move(why)}; }
};

/// Hourly (Dataset A) rule: at most one gap in hours 1..12, and at least
/// 12 observed hours overall.
inline Decision validate_a(const ViewTrajectory& traj) {
  if (traj.resolution != Resolution::hourly) throw ValidationError(traj.video_id + ": ruleset A needs hourly data");
  check_well_formed(traj);
  size_t early_missing = 0;
  for (size_t h = 1; h <= 12; ++h) early_missing += traj.slots[h] ? 0 : 1;
  if (early_missing > 1) {
    return Decision::reject(std::to_string(early_missing) + " missing values in the first 12 hours");
  }
  const size_t present = traj.slots.size() - traj.missing_count();
  if (present < 12) return Decision::reject("only " + std::to_string(present) + " observed hours");
  return Decision::accept();
}

/// Five-minute (Dataset B) rule: no run of more than two missing slots and
/// the minute-1440 slot must be present.
inline Decision validate_b(const ViewTrajectory& traj) {
  if (traj.resolution != Resolution::five_minute) {
    throw ValidationError(traj.video_id + ": ruleset B needs five-minute data");
  }
  check_well_formed(traj);
  if (!traj.slots.back()) return Decision::reject("final slot (minute 1440) missing");
  size_t run = 0;
  for (size_t i = 0; i < traj.slots.size(); ++i) {
    run = traj.slots[i] ? 0 : run + 1;
    if (run > 2) return Decision::reject("more than two consecutive missing slots ending at minute " +
                                         std::to_string(traj.minute_of(i)));
  }
  return Decision::accept();
}

/// Fills gaps: interior runs are linearly interpolated between the flanking
/// observations (a one-slot gap is the mean of its neighbours), edge runs copy
/// the nearest observation. Interpolated counts round to the nearest integer.
inline ViewTrajectory impute(const ViewTrajectory& traj) {
  check_well_formed(traj);
  std::vector<size_t> known;
  for (size_t i = 0; i < traj.slots.size(); ++i)
    if (traj.slots[i]) known.push_back(i);
  if (known.empty()) throw DomainError(traj.video_id + ": every slot is missing");

  ViewTrajectory out = traj;
  auto fill = [&](size_t i, std::int64_t views, std::optional<std::int64_t> likes) {
    out.slots[i] = Snapshot{traj.minute_of(i), views, likes};
  };
  for (size_t i = 0; i < known.front(); ++i) fill(i, traj.slots[known.front()]->views, traj.slots[known.front()]->likes);
  for (size_t i = known.back() + 1; i < traj.slots.size(); ++i)
    fill(i, traj.slots[known.back()]->views, traj.slots[known.back()]->likes);
  for (size_t k = 0; k + 1 < known.size(); ++k) {
    const size_t lo = known[k], hi = known[k + 1];
    const auto& a = *traj.slots[lo];
    const auto& b = *traj.slots[hi];
    for (size_t i = lo + 1; i < hi; ++i) {
      const double w = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      const auto lerp = [w](std::int64_t x, std::int64_t y) {
        return static_cast<std::int64_t>(std::llround(static_cast<double>(x) + w * static_cast<double>(y - x)));
      };
      std::optional<std::int64_t> likes;
      if (a.likes && b.likes) likes = lerp(*a.likes, *b.likes);
      fill(i, lerp(a.views, b.views), likes);
    }
  }
  for (size_t i = 1; i < out.slots.size(); ++i) out.slots[i]->views = std::max(out.slots[i]->views, out.slots[i - 1]->views);
  return out;
}

/// First slot whose cumulative views reach half of the final-slot total.
/// Hourly grids report whole hours; five-minute grids report minutes / 60.
inline HalfLife half_life(const ViewTrajectory& traj) {
  const auto views = traj.views();
  if (views.empty()) throw DomainError(traj.video_id + ": empty trajectory");
  const double total = static_cast<double>(views.back());
  if (total <= 0) throw UndefinedHalfLife(traj.video_id + ": zero 24-hour views");
  const double half = total / 2.0;
  size_t slot = 0;
  while (static_cast<double>(views[slot]) < half) ++slot;
  HalfLife h;
  h.slot = slot;
  h.hours = static_cast<double>(traj.minute_of(slot)) / 60.0;
  h.overshoot_pct = 100.0 * (static_cast<double>(views[slot]) - half) / half;
  return h;
}

/// Nearest-rank quantile: the smallest value whose rank is >= ceil(p * n).
inline double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of empty input");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

struct QuantileReport {
  static constexpr double kProbabilities[5] = {0.10, 0.25, 0.50, 0.75, 0.90};
  double values[5] = {};

  double q10() const { return values[0]; }
  double q25() const { return values[1]; }
  double q50() const { return values[2]; }
  double q75() const { return values[3]; }
  double q90() const { return values[4]; }
};

inline QuantileReport halflife_quantiles(std::span<const double> hours) {
  if (hours.empty()) throw DomainError("halflife_quantiles: empty input");
  std::vector<double> sorted(hours.begin(), hours.end());
  std::sort(sorted.begin(), sorted.end());
  QuantileReport r;
  for (size_t i = 0; i < 5; ++i) r.values[i] = nearest_rank(sorted, QuantileReport::kProbabilities[i]);
  return r;
}

struct CountryRow {
  std::string country;
  size_t videos = 0;
  double mean_hours = 0.0;
  int bin = 0;  // 1..5; 0 = no data
};

/// Per-country mean half-life with five equal-width bins over the observed
/// range of country means. Countries in `known_countries` that have no
/// videos are reported with bin 0.
inline std::vector<CountryRow> country_report(std::span<const VideoRecord> videos,
                                              const std::map<std::string, double>& hours_by_video,
                                              std::span<const std::string> known_countries = {}) {
  std::map<std::string, std::pair<double, size_t>> acc;
  for (const auto& v : videos) {
    auto it = hours_by_video.find(v.video_id);
    if (it == hours_by_video.end()) continue;
    auto& [sum, n] = acc[v.country];
    sum += it->second;
    ++n;
  }
  std::vector<CountryRow> rows;
  double lo = 0, hi = 0;
  for (const auto& [country, sn] : acc) {
    const double m = sn.first / static_cast<double>(sn.second);
    if (rows.empty()) lo = hi = m;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    rows.push_back({country, sn.second, m, 1});
  }
  const double width = (hi - lo) / 5.0;
  if (width > 0) {
    for (auto& r : rows) r.bin = std::clamp(1 + static_cast<int>(std::floor((r.mean_hours - lo) / width)), 1, 5);
  }
  for (const auto& c : known_countries) {
    if (!acc.count(c)) rows.push_back({c, 0, 0.0, 0});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.country < b.country; });
  rows.erase(std::unique(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.country == b.country; }),
             rows.end());
  return rows;
}

}  // namespace halflife
