#pragma once

// Simulated collection of five-minute view snapshots: discovery of new
// videos, monitoring for 24 hours, and handoff to an on-disk store.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "halflife/core.hpp"
#include "halflife/csv.hpp"
#include "halflife/parallel.hpp"
#include "halflife/synth.hpp"

namespace halflife::collector {

using nlohmann::json;

inline constexpr int kTickMinutes = 5;

struct VideoInfo {
  std::string channel_id;
  std::string video_id;
  int publish_minute = 0;
};

struct Stats {
  std::int64_t views = 0;
  std::optional<std::int64_t> likes;
};

class SourceError : public Error {
 public:
  using Error::Error;
};

/// What a platform client must provide. Implementations must tolerate
/// concurrent fetch_stats calls.
class SourcePort {
 public:
  virtual ~SourcePort() = default;
  /// Videos of `channel` published in (since, until].
  virtual std::vector<VideoInfo> list_new_videos(const std::string& channel, int since, int until) const = 0;
  /// Throws SourceError on failure.
  virtual Stats fetch_stats(const std::string& video_id, int now) const = 0;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual int now() const = 0;  // minutes since the run origin
  virtual void advance(int minutes) = 0;
};

class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(int start = 0) : now_(start) {}
  int now() const override { return now_; }
  void advance(int minutes) override { now_ += minutes; }

 private:
  int now_;
};

/// Real time; advance() sleeps until the next boundary.
class WallClock final : public Clock {
 public:
  WallClock() : origin_(std::chrono::steady_clock::now()) {}
  int now() const override { return now_; }
  void advance(int minutes) override {
    now_ += minutes;
    std::this_thread::sleep_until(origin_ + std::chrono::minutes(now_));
  }

 private:
  std::chrono::steady_clock::time_point origin_;
  int now_ = 0;
};

// ---------------------------------------------------------------------------
// Scripted synthetic source
// ---------------------------------------------------------------------------

struct ScriptedVideo {
  std::string channel_id;
  std::string video_id;
  int publish_minute = 0;
  synth::Family family = synth::Family::linear;
  std::int64_t total_views = 1000;
  std::uint64_t seed = 0;
};

inline std::vector<ScriptedVideo> parse_script(std::string_view text) {
  std::vector<ScriptedVideo> out;
  size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = json::parse(line);
      ScriptedVideo v;
      v.channel_id = j.at("channel_id").get<std::string>();
      v.video_id = j.at("video_id").get<std::string>();
      v.publish_minute = j.at("publish_minute").get<int>();
      v.family = synth::parse_family(j.at("family").get<std::string>());
      v.total_views = j.at("total_views").get<std::int64_t>();
      v.seed = j.at("seed").get<std::uint64_t>();
      if (v.publish_minute < 0 || v.total_views <= 0) throw ValidationError("out-of-range value");
      out.push_back(std::move(v));
    } catch (const std::exception& e) {
      throw ValidationError("script line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string format_script(std::span<const ScriptedVideo> videos) {
  std::string out;
  for (const auto& v : videos) {
    json j = {{"channel_id", v.channel_id},
              {"video_id", v.video_id},
              {"publish_minute", v.publish_minute},
              {"family", std::string(synth::to_string(v.family))},
              {"total_views", v.total_views},
              {"seed", v.seed}};
    out += j.dump() + "\n";
  }
  return out;
}

/// The five-minute trajectory a scripted video follows: family parameters
/// drawn from `seed`, total fixed by the script.
inline ViewTrajectory scripted_trajectory(const ScriptedVideo& v, double noise_level = 0.1) {
  std::mt19937_64 rng(v.seed);
  auto spec = synth::draw_spec(v.family, rng, noise_level);
  const double ratio = static_cast<double>(v.total_views) / static_cast<double>(spec.total_views);
  for (auto& s : spec.steps) s.height *= ratio;
  spec.total_views = v.total_views;
  return synth::generate(spec, Resolution::five_minute, v.video_id);
}

/// Serves each scripted video's generator value at slot floor(age / 5),
/// frozen after 24 hours. Faults are drawn per (video, minute) from the run
/// seed, plus any explicitly scheduled ones.
class SyntheticSource final : public SourcePort {
 public:
  SyntheticSource(std::vector<ScriptedVideo> script, double fault_rate = 0.0, std::uint64_t run_seed = 42)
      : fault_rate_(fault_rate), run_seed_(run_seed) {
    for (auto& v : script) {
      trajectories_.emplace(v.video_id, scripted_trajectory(v));
      publish_[v.video_id] = v.publish_minute;
      script_.push_back(std::move(v));
    }
  }

  /// Fails every fetch of `video_id` whose age falls in slot `slot`.
  void fail_at(const std::string& video_id, size_t slot) { scheduled_.insert({video_id, slot}); }

  std::vector<VideoInfo> list_new_videos(const std::string& channel, int since, int until) const override {
    std::vector<VideoInfo> out;
    for (const auto& v : script_) {
      if (v.channel_id == channel && v.publish_minute > since && v.publish_minute <= until)
        out.push_back({v.channel_id, v.video_id, v.publish_minute});
    }
    return out;
  }

  Stats fetch_stats(const std::string& video_id, int now) const override {
    const auto it = trajectories_.find(video_id);
    if (it == trajectories_.end()) throw SourceError("unknown video " + video_id);
    const int age = now - publish_.at(video_id);
    if (age < 0) throw SourceError(video_id + " is not published yet");
    const auto slot = std::min<size_t>(static_cast<size_t>(age / kTickMinutes), it->second.slots.size() - 1);
    if (scheduled_.count({video_id, slot}) || fault(video_id, now)) throw SourceError("transient failure");
    const auto& snap = *it->second.slots[slot];
    return {snap.views, snap.likes};
  }

  std::set<std::string> channels() const {
    std::set<std::string> c;
    for (const auto& v : script_) c.insert(v.channel_id);
    return c;
  }

  const ViewTrajectory& trajectory(const std::string& video_id) const { return trajectories_.at(video_id); }
  std::uint64_t run_seed() const { return run_seed_; }
  double fault_rate() const { return fault_rate_; }

 private:
  bool fault(const std::string& video_id, int now) const {
    if (fault_rate_ <= 0) return false;
    // splitmix64 over FNV-1a(video_id) ^ seed ^ minute
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : video_id) h = (h ^ c) * 0x100000001b3ULL;
    std::uint64_t z = h ^ run_seed_ ^ (static_cast<std::uint64_t>(now) * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53 < fault_rate_;
  }

  std::vector<ScriptedVideo> script_;
  std::map<std::string, ViewTrajectory> trajectories_;
  std::map<std::string, int> publish_;
  std::set<std::pair<std::string, size_t>> scheduled_;
  double fault_rate_;
  std::uint64_t run_seed_;
};

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

/// `active/<id>.jsonl` receives one line per snapshot and is renamed into
/// `completed/` when the window closes.
class Store {
 public:
  explicit Store(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "active");
    std::filesystem::create_directories(root_ / "completed");
  }

  /// Removes the files of a previous run.
  void reset() {
    std::filesystem::remove_all(root_ / "active");
    std::filesystem::remove_all(root_ / "completed");
    std::filesystem::remove(root_ / "manifest.json");
    std::filesystem::create_directories(root_ / "active");
    std::filesystem::create_directories(root_ / "completed");
  }

  void append(const std::string& video_id, int minute, const std::optional<Stats>& s) {
    json j = {{"video_id", video_id}, {"minute", minute}};
    if (s) {
      j["views"] = s->views;
      if (s->likes) j["likes"] = *s->likes;
    } else {
      j["missing"] = true;
    }
    std::ofstream out(root_ / "active" / (video_id + ".jsonl"), std::ios::app | std::ios::binary);
    out << j.dump() << '\n';
    if (!out) throw IoError("store: cannot append to " + video_id);
  }

  void complete(const std::string& video_id) {
    std::error_code ec;
    std::filesystem::rename(root_ / "active" / (video_id + ".jsonl"), root_ / "completed" / (video_id + ".jsonl"), ec);
    if (ec) throw IoError("store: cannot finalise " + video_id + ": " + ec.message());
  }

  void write_manifest(const json& manifest) const {
    csv::write_file_atomic(root_ / "manifest.json", manifest.dump(2) + "\n");
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// Reads one store file into a five-minute trajectory; missing lines leave
/// their slot empty.
inline ViewTrajectory read_store_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Snapshot> snaps;
  std::string line, id = path.stem().string();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    if (j.value("missing", false)) continue;
    Snapshot s;
    s.minute = j.at("minute").get<int>();
    s.views = j.at("views").get<std::int64_t>();
    if (j.contains("likes")) s.likes = j.at("likes").get<std::int64_t>();
    snaps.push_back(s);
  }
  return ViewTrajectory::from_snapshots(id, Resolution::five_minute, snaps);
}

/// Completed trajectories in video_id order.
inline std::vector<ViewTrajectory> load_completed(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(root / "completed"))
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ViewTrajectory> out;
  for (const auto& f : files) out.push_back(read_store_file(f));
  return out;
}

// ---------------------------------------------------------------------------
// Monitor
// ---------------------------------------------------------------------------

struct ActiveVideo {
  VideoInfo info;
  int discovered_at = 0;
  size_t collected = 0;
  size_t missing = 0;
};

struct Completed {
  VideoInfo info;
  int discovered_at = 0;
  size_t collected = 0;
  size_t missing = 0;
};

/// Pending, active and completed videos. The trajectory clock of a video
/// starts at its discovery tick, so snapshot minutes are 0, 5, ..., 1440.
struct MonitorState {
  std::deque<VideoInfo> pending;
  std::map<std::string, ActiveVideo> active;
  std::map<std::string, Completed> completed;
  int last_discovery = -1;

  void check_invariants(int now) const {
    std::set<std::string> seen;
    for (const auto& v : pending)
      if (!seen.insert(v.video_id).second) throw DomainError("monitor: " + v.video_id + " queued twice");
    for (const auto& [id, a] : active) {
      if (!seen.insert(id).second) throw DomainError("monitor: " + id + " is both pending and active");
      if (now - a.discovered_at >= kWindowMinutes) throw DomainError("monitor: " + id + " active past 24 h");
    }
    for (const auto& [id, c] : completed)
      if (!seen.insert(id).second) throw DomainError("monitor: " + id + " is completed and still tracked");
  }

  bool known(const std::string& id) const {
    return active.count(id) || completed.count(id) ||
           std::any_of(pending.begin(), pending.end(), [&](const VideoInfo& v) { return v.video_id == id; });
  }
};

/// One five-minute step: a discovery pass that activates new videos with
/// their first snapshot, then a monitoring pass over previously active
/// videos. Videos reaching 24 h are flushed and marked completed.
inline void tick(MonitorState& state, const SourcePort& source, const std::set<std::string>& channels, Store& store,
                 int now, int jobs = 1) {
  for (const auto& ch : channels) {
    auto found = source.list_new_videos(ch, state.last_discovery, now);
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
    for (auto& v : found)
      if (!state.known(v.video_id)) state.pending.push_back(std::move(v));
  }
  state.last_discovery = now;

  std::vector<std::string> fresh;
  while (!state.pending.empty()) {
    auto v = std::move(state.pending.front());
    state.pending.pop_front();
    const auto id = v.video_id;
    state.active.emplace(id, ActiveVideo{std::move(v), now, 0, 0});
    fresh.push_back(id);
  }

  // Every active video is fetched once this tick; new ones get slot 0.
  std::vector<ActiveVideo*> targets;
  for (auto& [id, a] : state.active) targets.push_back(&a);
  std::vector<std::optional<Stats>> results(targets.size());
  parallel_for(targets.size(), jobs, [&](size_t i) {
    try {
      results[i] = source.fetch_stats(targets[i]->info.video_id, now);
    } catch (const SourceError&) {
      results[i].reset();
    }
  });

  std::vector<std::string> done;
  for (size_t i = 0; i < targets.size(); ++i) {
    auto& a = *targets[i];
    const int minute = now - a.discovered_at;
    store.append(a.info.video_id, minute, results[i]);
    ++(results[i] ? a.collected : a.missing);
    if (minute >= kWindowMinutes) done.push_back(a.info.video_id);
  }
  for (const auto& id : done) {
    store.complete(id);
    auto node = state.active.extract(id);
    const auto& a = node.mapped();
    state.completed.emplace(id, Completed{a.info, a.discovered_at, a.collected, a.missing});
  }
  state.check_invariants(now);
}

struct RunOptions {
  int duration_minutes = kWindowMinutes;
  std::uint64_t seed = 42;
  int jobs = 1;
};

inline json manifest(const MonitorState& state, const RunOptions& opt, const SourcePort& source, int ticks,
                     const std::string& status) {
  json completed = json::array(), in_flight = json::array(), pending = json::array();
  for (const auto& [id, c] : state.completed) {
    completed.push_back({{"video_id", id},
                         {"channel_id", c.info.channel_id},
                         {"publish_minute", c.info.publish_minute},
                         {"discovery_latency", c.discovered_at - c.info.publish_minute},
                         {"snapshots", c.collected},
                         {"missing", c.missing}});
  }
  for (const auto& [id, a] : state.active) {
    in_flight.push_back({{"video_id", id},
                         {"channel_id", a.info.channel_id},
                         {"publish_minute", a.info.publish_minute},
                         {"discovery_latency", a.discovered_at - a.info.publish_minute},
                         {"snapshots", a.collected},
                         {"missing", a.missing}});
  }
  for (const auto& v : state.pending) pending.push_back(v.video_id);
  json m = {{"status", status},
            {"seed", opt.seed},
            {"duration_minutes", opt.duration_minutes},
            {"tick_minutes", kTickMinutes},
            {"ticks", ticks},
            {"counts", {{"completed", state.completed.size()}, {"in_flight", state.active.size()},
                        {"pending", state.pending.size()}}},
            {"completed", completed},
            {"in_flight", in_flight},
            {"pending", pending}};
  if (const auto* s = dynamic_cast<const SyntheticSource*>(&source)) {
    m["source"] = {{"kind", "synthetic"}, {"fault_rate", s->fault_rate()}, {"run_seed", s->run_seed()}};
  }
  return m;
}

/// Ticks at now, now+5, ..., now+duration. The store ends up with completed
/// trajectories, the still-active files and a manifest.
inline MonitorState run(const std::set<std::string>& channels, const SourcePort& source, Store& store, Clock& clock,
                        const RunOptions& opt = {}) {
  if (opt.duration_minutes < 0 || opt.duration_minutes % kTickMinutes != 0)
    throw DomainError("collector: duration must be a non-negative multiple of 5 minutes");
  MonitorState state;
  state.last_discovery = clock.now() - kTickMinutes;
  const int end = clock.now() + opt.duration_minutes;
  int ticks = 0;
  try {
    while (true) {
      tick(state, source, channels, store, clock.now(), opt.jobs);
      ++ticks;
      if (clock.now() >= end) break;
      clock.advance(kTickMinutes);
    }
  } catch (const IoError& e) {
    try {
      auto m = manifest(state, opt, source, ticks, "aborted");
      m["error"] = e.what();
      store.write_manifest(m);
    } catch (const std::exception&) {
    }
    throw;
  }
  store.write_manifest(manifest(state, opt, source, ticks, "ok"));
  return state;
}

}  // namespace halflife::collector
