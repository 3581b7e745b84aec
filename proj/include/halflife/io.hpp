#pragma once

// CSV schemas for trajectories, metadata and half-life tables.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "halflife/core.hpp"
#include "halflife/csv.hpp"

namespace halflife::io {

inline const csv::Row kTrajectoryHeader = {"video_id", "minute", "views", "likes"};
inline const csv::Row kVideoHeader = {"video_id",      "channel_id",         "title",        "length", "is_age_restricted",
                                      "thumbnail_url", "published_datetime", "num_comments", "country"};
inline const csv::Row kChannelHeader = {"channel_id",          "channel_view_count", "channel_video_count",
                                        "channel_num_subscribers", "joined_year",     "country"};
inline const csv::Row kHalfLifeHeader = {"video_id", "half_life_hours", "overshoot_pct"};

/// Hourly when every minute in the table is a multiple of 60.
inline Resolution infer_resolution(const csv::Table& t) {
  for (size_t r = 0; r < t.size(); ++r)
    if (t.number<int>(r, "minute") % 60 != 0) return Resolution::five_minute;
  return Resolution::hourly;
}

/// Trajectories in first-appearance order of their video_id.
inline std::vector<ViewTrajectory> parse_trajectories(const csv::Table& t, std::optional<Resolution> resolution = {}) {
  t.require({"video_id", "minute", "views"});
  const bool has_likes = t.has("likes");
  const Resolution res = resolution ? *resolution : infer_resolution(t);
  std::vector<std::string> order;
  std::map<std::string, std::vector<Snapshot>> by_id;
  for (size_t r = 0; r < t.size(); ++r) {
    const auto& id = t.at(r, "video_id");
    Snapshot s;
    s.minute = t.number<int>(r, "minute");
    s.views = t.number<std::int64_t>(r, "views");
    if (has_likes && !t.at(r, "likes").empty()) s.likes = t.number<std::int64_t>(r, "likes");
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(s);
  }
  std::vector<ViewTrajectory> out;
  out.reserve(order.size());
  for (const auto& id : order) out.push_back(ViewTrajectory::from_snapshots(id, res, by_id[id]));
  return out;
}

inline std::vector<ViewTrajectory> load_trajectories(const std::filesystem::path& p,
                                                     std::optional<Resolution> resolution = {}) {
  return parse_trajectories(csv::Table::load(p), resolution);
}

inline std::string format_trajectories(std::span<const ViewTrajectory> trajs) {
  std::vector<csv::Row> rows;
  for (const auto& t : trajs) {
    for (const auto& s : t.slots) {
      if (!s) continue;
      rows.push_back({t.video_id, std::to_string(s->minute), std::to_string(s->views),
                      s->likes ? std::to_string(*s->likes) : std::string()});
    }
  }
  return csv::format(kTrajectoryHeader, rows);
}

inline bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "0" || s == "false" || s == "False" || s == "FALSE" || s.empty()) return false;
  throw ValidationError("cannot parse boolean '" + s + "'");
}

inline std::vector<VideoRecord> parse_videos(const csv::Table& t) {
  t.require({"video_id", "channel_id", "title", "length", "published_datetime"});
  std::vector<VideoRecord> out;
  for (size_t r = 0; r < t.size(); ++r) {
    VideoRecord v;
    v.video_id = t.at(r, "video_id");
    v.channel_id = t.at(r, "channel_id");
    v.title = t.at(r, "title");
    v.length = t.number<std::int64_t>(r, "length");
    if (v.length <= 0) throw ValidationError(t.name() + ": video " + v.video_id + " has non-positive length");
    if (t.has("is_age_restricted")) v.is_age_restricted = parse_bool(t.at(r, "is_age_restricted"));
    if (t.has("thumbnail_url")) v.thumbnail_url = t.at(r, "thumbnail_url");
    v.published_datetime = t.at(r, "published_datetime");
    if (t.has("num_comments")) v.num_comments = t.number<std::int64_t>(r, "num_comments");
    if (t.has("country")) v.country = t.at(r, "country");
    out.push_back(std::move(v));
  }
  return out;
}

inline std::vector<ChannelRecord> parse_channels(const csv::Table& t) {
  t.require({"channel_id", "channel_view_count", "channel_video_count", "channel_num_subscribers", "joined_year"});
  std::vector<ChannelRecord> out;
  for (size_t r = 0; r < t.size(); ++r) {
    ChannelRecord c;
    c.channel_id = t.at(r, "channel_id");
    c.channel_view_count = t.number<std::int64_t>(r, "channel_view_count");
    c.channel_video_count = t.number<std::int64_t>(r, "channel_video_count");
    c.channel_num_subscribers = t.number<std::int64_t>(r, "channel_num_subscribers");
    c.joined_year = t.number<int>(r, "joined_year");
    if (t.has("country")) c.country = t.at(r, "country");
    if (c.joined_year < 2005) throw ValidationError(t.name() + ": channel " + c.channel_id + " joined before 2005");
    if (c.channel_view_count < 0 || c.channel_video_count < 0 || c.channel_num_subscribers < 0)
      throw ValidationError(t.name() + ": channel " + c.channel_id + " has negative counts");
    out.push_back(std::move(c));
  }
  return out;
}

inline std::string format_videos(std::span<const VideoRecord> videos) {
  std::vector<csv::Row> rows;
  for (const auto& v : videos) {
    rows.push_back({v.video_id, v.channel_id, v.title, std::to_string(v.length), v.is_age_restricted ? "1" : "0",
                    v.thumbnail_url, v.published_datetime, std::to_string(v.num_comments), v.country});
  }
  return csv::format(kVideoHeader, rows);
}

inline std::string format_channels(std::span<const ChannelRecord> channels) {
  std::vector<csv::Row> rows;
  for (const auto& c : channels) {
    rows.push_back({c.channel_id, std::to_string(c.channel_view_count), std::to_string(c.channel_video_count),
                    std::to_string(c.channel_num_subscribers), std::to_string(c.joined_year), c.country});
  }
  return csv::format(kChannelHeader, rows);
}

struct HalfLifeRow {
  std::string video_id;
  double hours = 0;
  double overshoot_pct = 0;
};

inline std::vector<HalfLifeRow> parse_halflives(const csv::Table& t) {
  t.require({"video_id", "half_life_hours"});
  std::vector<HalfLifeRow> out;
  for (size_t r = 0; r < t.size(); ++r) {
    HalfLifeRow h{t.at(r, "video_id"), t.number<double>(r, "half_life_hours"), 0.0};
    if (t.has("overshoot_pct")) h.overshoot_pct = t.number<double>(r, "overshoot_pct");
    out.push_back(std::move(h));
  }
  return out;
}

inline std::string format_halflives(std::span<const HalfLifeRow> rows) {
  std::vector<csv::Row> out;
  for (const auto& h : rows) out.push_back({h.video_id, csv::fmt_double(h.hours), csv::fmt_double(h.overshoot_pct)});
  return csv::format(kHalfLifeHeader, out);
}

struct UtcTime {
  int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;
  int day_of_week = 3;  // Monday = 0
};

/// Accepts `YYYY-MM-DD[T ]HH:MM[:SS][Z|+00:00]`; offsets other than UTC are
/// applied to the hour.
inline UtcTime parse_utc(std::string_view s) {
  auto digits = [&](size_t pos, size_t n) {
    if (pos + n > s.size()) throw ValidationError("bad datetime '" + std::string(s) + "'");
    int v = 0;
    for (size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') throw ValidationError("bad datetime '" + std::string(s) + "'");
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw ValidationError("bad datetime '" + std::string(s) + "'");
  UtcTime t;
  t.year = digits(0, 4);
  t.month = digits(5, 2);
  t.day = digits(8, 2);
  t.hour = digits(11, 2);
  t.minute = digits(14, 2);
  size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    t.second = digits(pos + 1, 2);
    pos += 3;
    while (pos < s.size() && (s[pos] == '.' || (s[pos] >= '0' && s[pos] <= '9'))) ++pos;
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '+' ? 1 : -1;
      const int oh = digits(pos + 1, 2);
      size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      const int om = digits(mpos, 2);
      offset_minutes = sign * (oh * 60 + om);
      pos = mpos + 2;
    }
    if (pos != s.size()) throw ValidationError("bad datetime '" + std::string(s) + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{t.year}, month{static_cast<unsigned>(t.month)}, day{static_cast<unsigned>(t.day)}};
  if (!ymd.ok() || t.hour > 23 || t.minute > 59 || t.second > 60)
    throw ValidationError("bad datetime '" + std::string(s) + "'");
  auto tp = sys_days{ymd} + hours{t.hour} + minutes{t.minute} + seconds{t.second} - minutes{offset_minutes};
  const auto dp = floor<days>(tp);
  const year_month_day utc{dp};
  const hh_mm_ss hms{tp - dp};
  t.year = static_cast<int>(utc.year());
  t.month = static_cast<int>(static_cast<unsigned>(utc.month()));
  t.day = static_cast<int>(static_cast<unsigned>(utc.day()));
  t.hour = static_cast<int>(hms.hours().count());
  t.minute = static_cast<int>(hms.minutes().count());
  t.second = static_cast<int>(hms.seconds().count());
  t.day_of_week = static_cast<int>(weekday{dp}.iso_encoding()) - 1;
  return t;
}

}  // namespace halflife::io
