#pragma once

// Deterministic generators: 24-hour trajectories for the four diffusion
// families, and metadata tables with a planted half-life dependence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "halflife/core.hpp"

namespace halflife::synth {

enum class Family { sigmoid, logarithmic, linear, stepped };

inline constexpr std::array<Family, 4> kFamilies = {Family::sigmoid, Family::logarithmic, Family::linear,
                                                    Family::stepped};

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::sigmoid: return "sigmoid";
    case Family::logarithmic: return "logarithmic";
    case Family::linear: return "linear";
    case Family::stepped: return "stepped";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : kFamilies)
    if (to_string(f) == s) return f;
  throw ValidationError("unknown family '" + std::string(s) + "'");
}

struct Step {
  double at_hours = 0;
  double height = 0;  // views contributed by this step
};

struct GrowthSpec {
  Family family = Family::linear;
  std::int64_t total_views = 1000;
  double midpoint_hours = 6.0;  // sigmoid
  double steepness = 1.0;       // sigmoid, per hour
  double log_rate = 1.0;        // logarithmic, per hour
  std::vector<Step> steps;      // stepped
  double noise_level = 0.0;     // relative noise on increments, [0, 0.2]
  std::uint64_t seed = 0;
};

// Parameter ranges used by draw_spec / generate_cohort.
// Stepped trajectories are two steep ramps near kStepAnchors (+- kStepJitter)
// with the first ramp carrying kStepShareRange of the total.
inline constexpr double kSigmoidMidpointRange[2] = {6.5, 8.5};
inline constexpr double kSigmoidSteepnessRange[2] = {1.0, 1.5};
inline constexpr double kLogRateRange[2] = {1.0, 4.0};
inline constexpr double kStepAnchors[2] = {5.0, 16.0};
inline constexpr double kStepJitter = 0.75;
inline constexpr double kStepShareRange[2] = {0.45, 0.55};
inline constexpr double kStepSteepness = 4.0;
inline constexpr double kLogTotalViewsRange[2] = {3.0, 6.0};  // log10
inline constexpr double kLikeRatio = 0.03;

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Normalised cumulative shape, 0 at t=0 and 1 at t=24h.
inline double shape(const GrowthSpec& s, double t) {
  switch (s.family) {
    case Family::linear:
      return t / 24.0;
    case Family::logarithmic:
      return std::log1p(s.log_rate * t) / std::log1p(s.log_rate * 24.0);
    case Family::sigmoid: {
      const double a = logistic(-s.steepness * s.midpoint_hours);
      const double b = logistic(s.steepness * (24.0 - s.midpoint_hours));
      return (logistic(s.steepness * (t - s.midpoint_hours)) - a) / (b - a);
    }
    case Family::stepped: {
      double sum = 0, total = 0;
      for (const auto& st : s.steps) {
        const double a = logistic(-kStepSteepness * st.at_hours);
        const double b = logistic(kStepSteepness * (24.0 - st.at_hours));
        sum += st.height * (logistic(kStepSteepness * (t - st.at_hours)) - a) / (b - a);
        total += st.height;
      }
      return sum / total;
    }
  }
  return 0;
}

}  // namespace detail

inline void validate(const GrowthSpec& s) {
  if (s.total_views <= 0) throw DomainError("total_views must be positive");
  if (!(s.noise_level >= 0 && s.noise_level <= 0.2)) throw DomainError("noise_level must lie in [0, 0.2]");
  switch (s.family) {
    case Family::sigmoid:
      if (!(s.midpoint_hours > 0 && s.midpoint_hours < 24)) throw DomainError("sigmoid midpoint must lie in (0, 24)");
      if (!(s.steepness > 0)) throw DomainError("sigmoid steepness must be positive");
      break;
    case Family::logarithmic:
      if (!(s.log_rate > 0)) throw DomainError("logarithmic rate must be positive");
      break;
    case Family::linear:
      break;
    case Family::stepped: {
      if (s.steps.empty()) throw DomainError("stepped family needs at least one step");
      double sum = 0;
      for (const auto& st : s.steps) {
        if (!(st.height > 0) || !(st.at_hours > 0 && st.at_hours < 24)) throw DomainError("invalid step");
        sum += st.height;
      }
      if (std::abs(sum - static_cast<double>(s.total_views)) > 1e-6 * static_cast<double>(s.total_views))
        throw DomainError("step heights must sum to total_views");
      break;
    }
  }
}

/// Cumulative, non-decreasing trajectory ending exactly at total_views.
/// Noise multiplies each increment by max(0, 1 + noise * N(0,1)); the
/// increments are then re-accumulated and rescaled to the total.
inline ViewTrajectory generate(const GrowthSpec& spec, Resolution resolution, std::string video_id = "v") {
  validate(spec);
  const size_t n = slot_count(resolution);
  const double step_h = step_minutes(resolution) / 60.0;
  const double total = static_cast<double>(spec.total_views);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> cum(n, 0.0);
  double prev = 0.0;
  for (size_t i = 1; i < n; ++i) {
    const double v = total * detail::shape(spec, static_cast<double>(i) * step_h);
    double inc = std::max(0.0, v - prev);
    prev = v;
    if (spec.noise_level > 0) inc *= std::max(0.0, 1.0 + spec.noise_level * gauss(rng));
    cum[i] = cum[i - 1] + inc;
  }
  const double scale = cum.back() > 0 ? total / cum.back() : 0.0;
  auto traj = ViewTrajectory::empty(std::move(video_id), resolution);
  for (size_t i = 0; i < n; ++i) {
    const double c = scale > 0 ? cum[i] * scale : total * detail::shape(spec, static_cast<double>(i) * step_h);
    const auto views = i + 1 == n ? spec.total_views : std::min<std::int64_t>(spec.total_views, std::llround(c));
    traj.slots[i] = Snapshot{traj.minute_of(i), views, std::llround(static_cast<double>(views) * kLikeRatio)};
  }
  return traj;
}

/// Draws family parameters from the documented ranges.
inline GrowthSpec draw_spec(Family family, std::mt19937_64& rng, double noise_level) {
  auto uniform = [&](const double (&r)[2]) { return std::uniform_real_distribution<double>(r[0], r[1])(rng); };
  GrowthSpec s;
  s.family = family;
  s.total_views = std::llround(std::pow(10.0, uniform(kLogTotalViewsRange)));
  s.noise_level = noise_level;
  switch (family) {
    case Family::sigmoid:
      s.midpoint_hours = uniform(kSigmoidMidpointRange);
      s.steepness = uniform(kSigmoidSteepnessRange);
      break;
    case Family::logarithmic:
      s.log_rate = uniform(kLogRateRange);
      break;
    case Family::linear:
      break;
    case Family::stepped: {
      const double share = uniform(kStepShareRange);
      const double first = static_cast<double>(s.total_views) * share;
      for (size_t i = 0; i < 2; ++i) {
        const double at = kStepAnchors[i] + std::uniform_real_distribution<double>(-kStepJitter, kStepJitter)(rng);
        s.steps.push_back({at, i == 0 ? first : static_cast<double>(s.total_views) - first});
      }
      break;
    }
  }
  s.seed = rng();
  return s;
}

struct Cohort {
  std::vector<ViewTrajectory> trajectories;
  std::vector<Family> labels;
};

/// 4 * n_per_family trajectories, families interleaved in kFamilies order.
inline Cohort generate_cohort(size_t n_per_family, std::uint64_t seed, double noise_level = 0.1,
                              Resolution resolution = Resolution::five_minute) {
  if (n_per_family < 1) throw DomainError("n_per_family must be >= 1");
  std::mt19937_64 rng(seed);
  Cohort c;
  for (size_t i = 0; i < n_per_family; ++i) {
    for (auto f : kFamilies) {
      const auto spec = draw_spec(f, rng, noise_level);
      char id[32];
      std::snprintf(id, sizeof id, "syn%05zu", c.trajectories.size());
      c.trajectories.push_back(generate(spec, resolution, id));
      c.labels.push_back(f);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Metadata with planted half-life dependence
// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 20> kCountries = {"US", "DE", "GB", "FR", "IN", "BR", "JP", "MX", "ES", "IT",
                                                           "CA", "AU", "NG", "EG", "TR", "PL", "KR", "AR", "SA", "MT"};

// Planted model: z = g(-s_count) + 1.2 g(s_length) + g(s_country) + U(-noise, noise),
// half-life = clamp(7 + 2.5 z, 0.5, 23.5), with g(s) = tanh(6 s) and each s
// a standardised log-scale input. Every other column is independent of z.
inline constexpr double kLogVideoCountMean = 3.5, kLogVideoCountSd = 0.6;  // log10
inline constexpr double kLogLengthMean = 6.0, kLogLengthSd = 0.7;          // ln seconds
inline constexpr double kCountryMeanRange[2] = {4.0, 15.0};
inline constexpr double kDefaultFeatureNoise = 3.5;
inline constexpr double kPlantedSharpness = 6;

inline double planted_score(std::int64_t channel_video_count, std::int64_t length, double country_latent) {
  const auto g = [](double s) { return std::tanh(kPlantedSharpness * s); };
  const double s_count = (std::log10(static_cast<double>(std::max<std::int64_t>(channel_video_count, 1))) -
                          kLogVideoCountMean) / kLogVideoCountSd;
  const double s_len = (std::log(static_cast<double>(std::max<std::int64_t>(length, 1))) - kLogLengthMean) /
                       kLogLengthSd;
  const double mid = 0.5 * (kCountryMeanRange[0] + kCountryMeanRange[1]);
  const double s_country = (country_latent - mid) / ((kCountryMeanRange[1] - kCountryMeanRange[0]) / std::sqrt(12.0));
  return g(-s_count) + 1.2 * g(s_len) + g(s_country);
}

inline double planted_half_life(double score, double noise_draw) {
  return std::clamp(7.0 + 2.5 * (score + noise_draw), 0.5, 23.5);
}

struct FeatureCorpus {
  std::vector<ChannelRecord> channels;
  std::vector<VideoRecord> videos;
  std::vector<double> half_life;      // aligned with videos
  std::vector<double> planted;        // noise-free score, aligned with videos
  std::map<std::string, double> country_latent;
};

namespace detail {

inline constexpr std::array<const char*, 8> kTopicWords[] = {
    {"war", "troops", "missile", "attack", "ceasefire", "army", "clashes", "strike"},
    {"economy", "inflation", "market", "stocks", "budget", "prices", "jobs", "bank"},
    {"health", "hospital", "virus", "vaccine", "accident", "fire", "flood", "safety"},
    {"celebrity", "movie", "music", "festival", "weather", "travel", "recipe", "show"},
    {"election", "president", "parliament", "minister", "vote", "senate", "campaign", "government"},
    {"technology", "AI", "science", "space", "research", "startup", "smartphone", "software"},
    {"community", "protest", "school", "families", "education", "housing", "migrants", "culture"},
    {"football", "match", "championship", "olympics", "coach", "league", "tennis", "goal"},
};
inline constexpr std::array<const char*, 6> kSubjects = {"Berlin", "Washington", "the city", "officials", "residents",
                                                         "the region"};
inline constexpr std::array<const char*, 6> kVerbs = {"faces", "reacts to", "announced", "will discuss", "debates",
                                                      "reported"};

inline std::string make_title(std::mt19937_64& rng) {
  auto pick = [&](size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(rng); };
  const auto& words = kTopicWords[pick(8)];
  std::string t;
  if (pick(6) == 0) t += "BREAKING: ";
  t += kSubjects[pick(kSubjects.size())];
  t += " ";
  t += kVerbs[pick(kVerbs.size())];
  t += " ";
  t += words[pick(8)];
  if (pick(2) == 0) {
    t += " and ";
    t += words[pick(8)];
  }
  if (pick(5) == 0) t += " \xF0\x9F\x94\xA5";  // U+1F525
  t += pick(4) == 0 ? "?" : "";
  return t;
}

}  // namespace detail

/// n videos over n/20 channels (at least 10) spread across 20 countries.
inline FeatureCorpus synth_features(size_t n, std::uint64_t seed, double noise = kDefaultFeatureNoise) {
  if (n < 100) throw DomainError("synth_features needs n >= 100");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureCorpus fc;

  for (const char* c : kCountries) {
    fc.country_latent[c] =
        kCountryMeanRange[0] + (kCountryMeanRange[1] - kCountryMeanRange[0]) * unit(rng);
  }
  const size_t n_channels = std::max<size_t>(10, n / 20);
  for (size_t i = 0; i < n_channels; ++i) {
    ChannelRecord ch;
    char id[32];
    std::snprintf(id, sizeof id, "ch%04zu", i);
    ch.channel_id = id;
    ch.country = kCountries[i % kCountries.size()];
    ch.channel_video_count =
        std::max<std::int64_t>(1, std::llround(std::pow(10.0, kLogVideoCountMean + kLogVideoCountSd * gauss(rng))));
    ch.channel_num_subscribers = std::llround(std::pow(10.0, 5.5 + 0.8 * gauss(rng)));
    ch.channel_view_count = std::llround(std::pow(10.0, 8.0 + 0.9 * gauss(rng)));
    ch.joined_year = std::uniform_int_distribution<int>(2005, 2023)(rng);
    fc.channels.push_back(std::move(ch));
  }

  std::uniform_int_distribution<size_t> pick_channel(0, n_channels - 1);
  for (size_t i = 0; i < n; ++i) {
    const auto& ch = fc.channels[pick_channel(rng)];
    VideoRecord v;
    char id[32];
    std::snprintf(id, sizeof id, "vid%06zu", i);
    v.video_id = id;
    v.channel_id = ch.channel_id;
    v.country = ch.country;
    v.title = detail::make_title(rng);
    v.length = std::max<std::int64_t>(10, std::llround(std::exp(kLogLengthMean + kLogLengthSd * gauss(rng))));
    v.is_age_restricted = unit(rng) < 0.02;
    v.thumbnail_url = "https://i.ytimg.com/vi/" + v.video_id + "/hqdefault.jpg";
    const int day = std::uniform_int_distribution<int>(0, 46)(rng);  // 2024-08-15 .. 2024-09-30
    const int month = day < 17 ? 8 : 9;
    const int dom = day < 17 ? 15 + day : day - 16;
    char ts[32];
    std::snprintf(ts, sizeof ts, "2024-%02d-%02dT%02d:%02d:%02dZ", month, dom,
                  std::uniform_int_distribution<int>(0, 23)(rng), std::uniform_int_distribution<int>(0, 59)(rng),
                  std::uniform_int_distribution<int>(0, 59)(rng));
    v.published_datetime = ts;
    v.num_comments = std::llround(std::pow(10.0, 1.5 + 0.7 * gauss(rng)));
    const double score = planted_score(ch.channel_video_count, v.length, fc.country_latent[ch.country]);
    const double eps = noise > 0 ? std::uniform_real_distribution<double>(-noise, noise)(rng) : 0.0;
    fc.planted.push_back(score);
    fc.half_life.push_back(planted_half_life(score, eps));
    fc.videos.push_back(std::move(v));
  }
  return fc;
}

}  // namespace halflife::synth
