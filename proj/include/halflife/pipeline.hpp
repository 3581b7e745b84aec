#pragma once

// Metadata + half-lives -> labelled, split feature records.

#include <map>
#include <string>
#include <vector>

#include "halflife/annotate.hpp"
#include "halflife/features.hpp"
#include "halflife/learn.hpp"

namespace halflife {

struct PrepareOptions {
  learn::SplitSpec split;
  int collection_year = 2024;
  int jobs = 1;
};

struct Prepared {
  std::vector<features::FeatureRecord> records;
  std::vector<features::RowError> errors;
  features::Binning binning;
  features::CountryAverages countries;
};

/// Bins the half-lives of every video that has one, draws the stratified
/// split, fits the country averages on the training rows and builds the
/// 25-predictor rows. Videos without a half-life are reported as errors.
inline Prepared prepare_features(const std::vector<VideoRecord>& videos, const std::vector<ChannelRecord>& channels,
                                 const std::map<std::string, double>& half_life, const TitleAnnotator& annotator,
                                 const PrepareOptions& opt = {}) {
  Prepared out;
  std::vector<VideoRecord> kept;
  std::vector<double> hours;
  for (const auto& v : videos) {
    auto it = half_life.find(v.video_id);
    if (it == half_life.end()) {
      out.errors.push_back({v.video_id, "no half-life"});
      continue;
    }
    kept.push_back(v);
    hours.push_back(it->second);
  }
  out.binning = features::bin_targets(hours);

  std::vector<VideoRecord> labelled;
  std::vector<double> labelled_hours;
  std::vector<int> y;
  for (size_t i = 0; i < kept.size(); ++i) {
    if (!out.binning.labels[i]) continue;
    labelled.push_back(kept[i]);
    labelled_hours.push_back(hours[i]);
    y.push_back(*out.binning.labels[i]);
  }
  const auto parts = learn::split(y, opt.split);
  std::vector<char> is_train(labelled.size(), 0);
  std::vector<VideoRecord> train_videos;
  std::vector<double> train_hours;
  for (size_t i : parts.train) {
    is_train[i] = 1;
    train_videos.push_back(labelled[i]);
    train_hours.push_back(labelled_hours[i]);
  }
  out.countries = features::country_avg_half_life(features::TrainingView(train_videos, train_hours));

  std::vector<std::string> titles;
  titles.reserve(labelled.size());
  for (const auto& v : labelled) titles.push_back(v.title);
  std::vector<TitleAnnotation> annotations;
  if (opt.jobs > 1 && dynamic_cast<const RuleAnnotator*>(&annotator)) {
    annotations.resize(titles.size());
    parallel_for(titles.size(), opt.jobs, [&](size_t i) { annotations[i] = annotator.annotate(titles[i]); });
  } else {
    annotations = annotator.annotate_all(titles);
  }

  std::vector<std::optional<int>> labels(y.begin(), y.end());
  auto m = features::build_matrix(labelled, channels, annotations, out.countries, labels, opt.collection_year,
                                  opt.jobs);
  out.errors.insert(out.errors.end(), m.errors.begin(), m.errors.end());
  for (size_t r = 0; r < m.rows.size(); ++r) {
    const size_t i = m.source_index[r];
    out.records.push_back({std::move(m.rows[r]), labelled[i].channel_id, is_train[i] ? "train" : "test",
                           labelled_hours[i]});
  }
  return out;
}

}  // namespace halflife
