#pragma once

// The 25-predictor design matrix, early/late target binning and the
// training-only country average.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "halflife/annotate.hpp"
#include "halflife/core.hpp"
#include "halflife/csv.hpp"
#include "halflife/io.hpp"
#include "halflife/parallel.hpp"

namespace halflife::features {

enum class Kind { numeric, binary, ordinal };

struct FeatureInfo {
  std::string_view name;
  Kind kind;
  std::string_view encoding;
};

inline constexpr size_t kNumFeatures = 25;

inline constexpr std::array<FeatureInfo, kNumFeatures> kSchema = {{
    {"channel_view_count", Kind::numeric, "raw count"},
    {"channel_video_count", Kind::numeric, "raw count"},
    {"channel_num_subscribers", Kind::numeric, "raw count"},
    {"length", Kind::numeric, "seconds"},
    {"sentiment", Kind::ordinal, "-1 negative, 0 neutral, 1 positive"},
    {"subjectivity", Kind::binary, "1 subjective"},
    {"has_named_entities", Kind::binary, "1 yes"},
    {"urgency", Kind::ordinal, "1 low, 2 medium, 3 high"},
    {"is_emotional", Kind::binary, "1 yes"},
    {"has_emojis", Kind::binary, "1 yes"},
    {"is_question", Kind::binary, "1 yes"},
    {"verb_tense", Kind::ordinal, "1 past, 2 present, 3 future"},
    {"day_of_week", Kind::ordinal, "0 Monday .. 6 Sunday, UTC"},
    {"hour_of_publication", Kind::ordinal, "0..23, UTC"},
    {"title_num_tokens", Kind::numeric, "whitespace tokens"},
    {"channel_age", Kind::numeric, "years"},
    {"title_category_Conflict", Kind::binary, "one-hot"},
    {"title_category_Economy", Kind::binary, "one-hot"},
    {"title_category_Health_and_Safety", Kind::binary, "one-hot"},
    {"title_category_Other", Kind::binary, "one-hot"},
    {"title_category_Politics", Kind::binary, "one-hot"},
    {"title_category_Science/Tech", Kind::binary, "one-hot"},
    {"title_category_Society", Kind::binary, "one-hot"},
    {"title_category_Sports", Kind::binary, "one-hot"},
    {"country_avg_half_life", Kind::numeric, "hours, training split only"},
}};

inline constexpr size_t kCategoryBegin = 16;
inline constexpr size_t kChannelVideoCount = 1;
inline constexpr size_t kLength = 3;
inline constexpr size_t kCountryAvgHalfLife = 24;

inline std::vector<std::string> schema_names() {
  std::vector<std::string> out;
  for (const auto& f : kSchema) out.emplace_back(f.name);
  return out;
}

inline std::optional<size_t> feature_index(std::string_view name) {
  for (size_t i = 0; i < kSchema.size(); ++i)
    if (kSchema[i].name == name) return i;
  return std::nullopt;
}

/// 64-bit FNV-1a over the names, each terminated by '\n'.
inline std::uint64_t schema_hash(std::span<const std::string> names) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& n : names) {
    for (unsigned char c : n) h = (h ^ c) * 0x100000001b3ULL;
    h = (h ^ '\n') * 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct FeatureVector {
  std::string video_id;
  std::array<double, kNumFeatures> values{};
  std::optional<int> label;
};

inline int channel_age(const ChannelRecord& ch, int collection_year) {
  if (ch.joined_year > collection_year) {
    throw DomainError("channel " + ch.channel_id + " joined in " + std::to_string(ch.joined_year) +
                      ", after collection year " + std::to_string(collection_year));
  }
  return collection_year - ch.joined_year;
}

/// Videos and half-lives of the training split. The country average can
/// only be built from this type.
class TrainingView {
 public:
  TrainingView(std::span<const VideoRecord> videos, std::span<const double> half_lives)
      : videos_(videos), half_lives_(half_lives) {
    if (videos.size() != half_lives.size()) throw DomainError("TrainingView: videos and half-lives differ in length");
  }
  std::span<const VideoRecord> videos() const { return videos_; }
  std::span<const double> half_lives() const { return half_lives_; }

 private:
  std::span<const VideoRecord> videos_;
  std::span<const double> half_lives_;
};

struct CountryAverages {
  std::map<std::string, double> means;
  double global_mean = 0.0;

  double lookup(const std::string& country) const {
    auto it = means.find(country);
    return it == means.end() ? global_mean : it->second;
  }
};

inline CountryAverages country_avg_half_life(const TrainingView& train) {
  CountryAverages out;
  std::map<std::string, std::pair<double, size_t>> acc;
  double total = 0;
  for (size_t i = 0; i < train.videos().size(); ++i) {
    const double h = train.half_lives()[i];
    total += h;
    const auto& c = train.videos()[i].country;
    if (c.empty()) continue;
    acc[c].first += h;
    ++acc[c].second;
  }
  if (!train.videos().empty()) out.global_mean = total / static_cast<double>(train.videos().size());
  for (const auto& [c, sn] : acc) out.means[c] = sn.first / static_cast<double>(sn.second);
  return out;
}

struct Binning {
  std::vector<std::optional<int>> labels;  // 0 early, 1 late, nullopt dropped
  double early_threshold = 0;
  double late_threshold = 0;
};

/// 30/40/30 binning. The early threshold is the nearest-rank 30th
/// percentile; the late threshold is its mirror, the value at rank
/// n + 1 - ceil(0.3 n) in ascending order.
inline Binning bin_targets(std::span<const double> half_lives) {
  const size_t n = half_lives.size();
  if (n < 10) throw DomainError("bin_targets needs at least 10 videos, got " + std::to_string(n));
  std::vector<double> sorted(half_lives.begin(), half_lives.end());
  std::sort(sorted.begin(), sorted.end());
  const auto tail = static_cast<size_t>(std::ceil(0.3 * static_cast<double>(n) - 1e-9));
  Binning b;
  b.early_threshold = sorted[tail - 1];
  b.late_threshold = sorted[n - tail];
  if (!(b.early_threshold < b.late_threshold)) {
    throw DomainError("bin_targets: early and late thresholds coincide; no class separation");
  }
  b.labels.reserve(n);
  for (double h : half_lives) {
    if (h <= b.early_threshold) b.labels.emplace_back(0);
    else if (h >= b.late_threshold) b.labels.emplace_back(1);
    else b.labels.emplace_back(std::nullopt);
  }
  return b;
}

struct RowError {
  std::string video_id;
  std::string reason;
};

struct Matrix {
  std::vector<FeatureVector> rows;
  std::vector<RowError> errors;
  std::vector<size_t> source_index;  // index into the input videos per row
};

/// One FeatureVector per video that joins to a channel; `annotations` and
/// `labels` are aligned with `videos` (labels may be empty).
inline Matrix build_matrix(std::span<const VideoRecord> videos, std::span<const ChannelRecord> channels,
                           std::span<const TitleAnnotation> annotations, const CountryAverages& countries,
                           std::span<const std::optional<int>> labels, int collection_year, int jobs = 1) {
  if (annotations.size() != videos.size()) throw DomainError("build_matrix: one annotation per video required");
  if (!labels.empty() && labels.size() != videos.size()) throw DomainError("build_matrix: labels not aligned");
  std::unordered_map<std::string, const ChannelRecord*> by_id;
  for (const auto& c : channels) by_id.emplace(c.channel_id, &c);

  std::vector<std::optional<FeatureVector>> built(videos.size());
  std::vector<std::string> failure(videos.size());
  parallel_for(videos.size(), jobs, [&](size_t i) {
    const auto& v = videos[i];
    auto it = by_id.find(v.channel_id);
    if (it == by_id.end()) {
      failure[i] = "unknown channel '" + v.channel_id + "'";
      return;
    }
    const auto& ch = *it->second;
    const auto& a = annotations[i];
    try {
      const auto t = io::parse_utc(v.published_datetime);
      FeatureVector fv;
      fv.video_id = v.video_id;
      auto& x = fv.values;
      x[0] = static_cast<double>(ch.channel_view_count);
      x[1] = static_cast<double>(ch.channel_video_count);
      x[2] = static_cast<double>(ch.channel_num_subscribers);
      x[3] = static_cast<double>(v.length);
      x[4] = a.sentiment;
      x[5] = a.subjectivity;
      x[6] = a.has_named_entities;
      x[7] = a.urgency;
      x[8] = a.is_emotional;
      x[9] = a.has_emojis;
      x[10] = a.is_question;
      x[11] = a.verb_tense;
      x[12] = t.day_of_week;
      x[13] = t.hour;
      x[14] = a.title_num_tokens;
      x[15] = channel_age(ch, collection_year);
      for (size_t c = 0; c < kCategories.size(); ++c) x[kCategoryBegin + c] = a.category == kCategories[c] ? 1.0 : 0.0;
      x[kCountryAvgHalfLife] = countries.lookup(v.country.empty() ? ch.country : v.country);
      if (!labels.empty()) fv.label = labels[i];
      built[i] = std::move(fv);
    } catch (const Error& e) {
      failure[i] = e.what();
    }
  });

  Matrix m;
  for (size_t i = 0; i < videos.size(); ++i) {
    if (built[i]) {
      m.rows.push_back(std::move(*built[i]));
      m.source_index.push_back(i);
    } else {
      m.errors.push_back({videos[i].video_id, failure[i]});
    }
  }
  return m;
}

// features.csv: identifiers, the split, the raw half-life, the 25 predictors
// and the label.

inline const csv::Row kLeadingColumns = {"video_id", "channel_id", "split", "half_life"};

struct FeatureRecord {
  FeatureVector fv;
  std::string channel_id;
  std::string split;  // "train" or "test"
  double half_life = 0;
};

inline csv::Row feature_header() {
  csv::Row h = kLeadingColumns;
  for (const auto& f : kSchema) h.emplace_back(f.name);
  h.emplace_back("label");
  return h;
}

inline std::string format_feature_csv(std::span<const FeatureRecord> rows) {
  std::vector<csv::Row> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    csv::Row row = {r.fv.video_id, r.channel_id, r.split, csv::fmt_double(r.half_life, 17)};
    for (double v : r.fv.values) row.push_back(csv::fmt_double(v, 17));
    row.push_back(r.fv.label ? std::to_string(*r.fv.label) : std::string());
    out.push_back(std::move(row));
  }
  return csv::format(feature_header(), out);
}

}  // namespace halflife::features
