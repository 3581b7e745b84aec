#include <gtest/gtest.h>

#include <fstream>

#include "halflife/collector.hpp"
#include "support.hpp"

using namespace halflife;
using namespace halflife::collector;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

std::vector<ScriptedVideo> script(size_t n, int spacing) {
  std::vector<ScriptedVideo> s;
  for (size_t i = 0; i < n; ++i) {
    s.push_back({"ch" + std::to_string(i % 3), "v" + std::to_string(i), spacing * static_cast<int>(i),
                 synth::kFamilies[i % 4], 1000 + 1000 * static_cast<std::int64_t>(i), i + 1});
  }
  return s;
}

// Last publish minute, rounded up to a whole tick.
int last_publish(const std::vector<ScriptedVideo>& s) {
  int m = 0;
  for (const auto& v : s) m = std::max(m, v.publish_minute);
  return (m + kTickMinutes - 1) / kTickMinutes * kTickMinutes;
}

MonitorState run_script(const SyntheticSource& src, const fs::path& root, int duration, int jobs = 1) {
  Store store(root);
  store.reset();
  SimulatedClock clock;
  return run(src.channels(), src, store, clock, {duration, 42, jobs});
}

std::map<std::string, std::string> snapshot_dir(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = csv::read_file(e.path());
  return files;
}

}  // namespace

TEST(Collector, PerfectSourceGives289Snapshots) {
  ts::TempDir dir("coll");
  const SyntheticSource src(script(1, 0));
  const auto state = run_script(src, dir.path(), kWindowMinutes);
  ASSERT_EQ(state.completed.size(), 1u);
  EXPECT_EQ(state.completed.at("v0").collected, 289u);
  EXPECT_EQ(state.completed.at("v0").missing, 0u);
  const auto t = read_store_file(dir / "completed/v0.jsonl");
  EXPECT_EQ(t.missing_count(), 0u);
  EXPECT_EQ(t.slots.back()->minute, 1440);
}

TEST(Collector, DiscoveryWithinOneTick) {
  ts::TempDir dir("coll");
  auto s = script(12, 1);  // publish minutes 0..11, some between ticks
  const SyntheticSource src(s);
  const auto state = run_script(src, dir.path(), kWindowMinutes + 15);
  ASSERT_EQ(state.completed.size(), s.size());
  for (const auto& [id, c] : state.completed) {
    EXPECT_GE(c.discovered_at, c.info.publish_minute) << id;
    EXPECT_LE(c.discovered_at - c.info.publish_minute, kTickMinutes) << id;
  }
}

TEST(Collector, TwoConsecutiveFailuresAcceptedThreeRejected) {
  for (size_t run_length : {2u, 3u}) {
    ts::TempDir dir("coll");
    SyntheticSource src(script(1, 0));
    for (size_t k = 0; k < run_length; ++k) src.fail_at("v0", 100 + k);
    run_script(src, dir.path(), kWindowMinutes);
    const auto t = read_store_file(dir / "completed/v0.jsonl");
    EXPECT_EQ(t.missing_count(), run_length);
    EXPECT_EQ(validate_b(t).accepted, run_length == 2) << run_length;
  }
}

TEST(Collector, ThreeScriptedVideosComplete) {
  ts::TempDir dir("coll");
  const auto s = script(3, 37);
  const SyntheticSource src(s);
  const auto state = run_script(src, dir.path(), kWindowMinutes + last_publish(s) + kTickMinutes);
  EXPECT_EQ(state.completed.size(), 3u);
  EXPECT_TRUE(state.active.empty());
  EXPECT_EQ(load_completed(dir.path()).size(), 3u);
  const auto m = nlohmann::json::parse(csv::read_file(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["counts"]["completed"], 3);
}

TEST(Collector, ShortRunLeavesVideosInFlight) {
  ts::TempDir dir("coll");
  const SyntheticSource src(script(3, 37));
  const auto state = run_script(src, dir.path(), 600);
  EXPECT_TRUE(state.completed.empty());
  EXPECT_EQ(state.active.size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "active/v2.jsonl"));
}

TEST(Collector, ReplayIsByteIdentical) {
  ts::TempDir a("coll"), b("coll");
  const auto s = script(10, 7);
  const SyntheticSource src1(s, 0.02, 9), src2(s, 0.02, 9);
  const int duration = kWindowMinutes + last_publish(s) + kTickMinutes;
  run_script(src1, a.path(), duration);
  run_script(src2, b.path(), duration, 3);
  const auto fa = snapshot_dir(a.path()), fb = snapshot_dir(b.path());
  EXPECT_EQ(fa.size(), 11u);  // 10 trajectories and the manifest
  EXPECT_EQ(fa, fb);
}

TEST(Collector, FaultRateChangesWithSeed) {
  ts::TempDir a("coll"), b("coll");
  const auto s = script(4, 0);
  run_script(SyntheticSource(s, 0.1, 1), a.path(), kWindowMinutes);
  run_script(SyntheticSource(s, 0.1, 2), b.path(), kWindowMinutes);
  EXPECT_NE(snapshot_dir(a.path()), snapshot_dir(b.path()));
}

TEST(Collector, SnapshotsStrictlyIncreasingOnGrid) {
  ts::TempDir dir("coll");
  const SyntheticSource src(script(5, 3), 0.05, 4);
  run_script(src, dir.path(), kWindowMinutes + 20);
  for (const auto& e : fs::directory_iterator(dir / "completed")) {
    std::ifstream in(e.path());
    std::string line;
    int prev = -1;
    while (std::getline(in, line)) {
      const int minute = nlohmann::json::parse(line).at("minute").get<int>();
      EXPECT_GT(minute, prev);
      EXPECT_EQ(minute % kTickMinutes, 0);
      prev = minute;
    }
    EXPECT_EQ(prev, kWindowMinutes);
  }
}

TEST(Collector, HalfLifeMatchesDirectGeneration) {
  ts::TempDir dir("coll");
  const auto s = script(8, 11);
  const SyntheticSource src(s);
  run_script(src, dir.path(), kWindowMinutes + last_publish(s) + kTickMinutes);
  for (const auto& v : s) {
    const auto collected = read_store_file(dir / ("completed/" + v.video_id + ".jsonl"));
    // bypass: generate the trajectory directly from the script entry
    const auto direct = scripted_trajectory(v);
    EXPECT_EQ(collected.views(), direct.views());
    EXPECT_EQ(half_life(collected).hours, half_life(direct).hours);
  }
}

TEST(Collector, IoFailureAbortsWithManifest) {
  ts::TempDir dir("coll");
  Store store(dir.path());
  fs::remove_all(dir / "active");
  std::ofstream(dir / "active") << "not a directory";
  const SyntheticSource src(script(1, 0));
  SimulatedClock clock;
  EXPECT_THROW(run(src.channels(), src, store, clock, {60, 1, 1}), IoError);
  const auto m = nlohmann::json::parse(csv::read_file(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "aborted");
  EXPECT_TRUE(m.contains("error"));
}

TEST(Collector, DurationMustBeWholeTicks) {
  ts::TempDir dir("coll");
  const SyntheticSource src(script(1, 0));
  EXPECT_THROW(run_script(src, dir.path(), 7), DomainError);
}

TEST(Collector, TickKeepsStatesDisjoint) {
  ts::TempDir dir("coll");
  const SyntheticSource src(script(6, 200));
  Store store(dir.path());
  MonitorState state;
  const auto channels = src.channels();
  for (int now = 0; now <= kWindowMinutes + 1100; now += kTickMinutes) {
    tick(state, src, channels, store, now);
    EXPECT_NO_THROW(state.check_invariants(now));
  }
  EXPECT_EQ(state.completed.size(), 6u);
}

TEST(Script, RoundTripAndErrors) {
  const auto s = script(4, 5);
  const auto back = parse_script(format_script(s));
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[3].video_id, "v3");
  EXPECT_EQ(back[3].family, synth::kFamilies[3]);
  EXPECT_EQ(back[2].publish_minute, 10);
  try {
    parse_script("\n{\"video_id\": 1}\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}
