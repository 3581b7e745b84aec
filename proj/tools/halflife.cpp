// halflife: command-line front end for the trajectory, clustering and
// classification pipeline. Exit codes: 0 ok, 1 validation/runtime failure,
// 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "halflife/annotate.hpp"
#include "halflife/cluster.hpp"
#include "halflife/collector.hpp"
#include "halflife/core.hpp"
#include "halflife/csv.hpp"
#include "halflife/explain.hpp"
#include "halflife/features.hpp"
#include "halflife/io.hpp"
#include "halflife/learn.hpp"
#include "halflife/pipeline.hpp"
#include "halflife/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace halflife;

namespace {

struct Globals {
  std::string data_dir;
  int jobs = 1;
};

Globals g;

fs::path resolve(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || g.data_dir.empty()) return path;
  return fs::path(g.data_dir) / path;
}

void write(const std::string& p, const std::string& content) {
  csv::write_file_atomic(resolve(p), content);
  std::cerr << "wrote " << resolve(p).string() << "\n";
}

std::map<std::string, double> half_life_map(const std::string& path) {
  std::map<std::string, double> out;
  for (const auto& h : io::parse_halflives(csv::Table::load(resolve(path)))) out[h.video_id] = h.hours;
  return out;
}

// --------------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "trajectories";
  size_t n_per_family = 50;
  size_t n = 5000;
  double noise = -1;
  std::string resolution = "five-minute";
  std::uint64_t seed = 42;
  std::string out = ".";
};

void run_synth(const SynthArgs& a) {
  const fs::path dir(a.out);
  json manifest = {{"command", "synth"}, {"kind", a.kind}, {"seed", a.seed}};
  if (a.kind == "trajectories") {
    const double noise = a.noise < 0 ? 0.1 : a.noise;
    const auto cohort = synth::generate_cohort(a.n_per_family, a.seed, noise, parse_resolution(a.resolution));
    std::vector<csv::Row> labels;
    for (size_t i = 0; i < cohort.labels.size(); ++i)
      labels.push_back({cohort.trajectories[i].video_id, std::string(synth::to_string(cohort.labels[i]))});
    write((dir / "trajectories.csv").string(), io::format_trajectories(cohort.trajectories));
    write((dir / "labels.csv").string(), csv::format({"video_id", "family"}, labels));
    manifest["n_per_family"] = a.n_per_family;
    manifest["noise"] = noise;
    manifest["resolution"] = a.resolution;
  } else if (a.kind == "features") {
    const double noise = a.noise < 0 ? synth::kDefaultFeatureNoise : a.noise;
    const auto fc = synth::synth_features(a.n, a.seed, noise);
    std::vector<io::HalfLifeRow> rows;
    for (size_t i = 0; i < fc.videos.size(); ++i) rows.push_back({fc.videos[i].video_id, fc.half_life[i], 0.0});
    write((dir / "videos.csv").string(), io::format_videos(fc.videos));
    write((dir / "channels.csv").string(), io::format_channels(fc.channels));
    write((dir / "halflives.csv").string(), io::format_halflives(rows));
    manifest["n"] = a.n;
    manifest["noise"] = noise;
  } else if (a.kind == "script") {
    std::mt19937_64 rng(a.seed);
    std::vector<collector::ScriptedVideo> script;
    for (size_t i = 0; i < a.n; ++i) {
      collector::ScriptedVideo v;
      v.channel_id = "ch" + std::to_string(i % 3);
      char id[32];
      std::snprintf(id, sizeof id, "col%04zu", i);
      v.video_id = id;
      v.publish_minute = std::uniform_int_distribution<int>(0, 120)(rng);
      v.family = synth::kFamilies[i % synth::kFamilies.size()];
      v.total_views = std::llround(std::pow(10.0, std::uniform_real_distribution<double>(3, 6)(rng)));
      v.seed = rng();
      script.push_back(std::move(v));
    }
    write((dir / "script.jsonl").string(), collector::format_script(script));
    manifest["n"] = a.n;
  }
  write((dir / "synth_manifest.json").string(), manifest.dump(2) + "\n");
}

// --------------------------------------------------------------------------

struct CollectArgs {
  std::string script;
  int duration = -1;
  double fault_rate = 0.0;
  std::uint64_t seed = 42;
  std::string out = "store";
};

void run_collect(const CollectArgs& a) {
  auto script = collector::parse_script(csv::read_file(resolve(a.script)));
  int duration = a.duration;
  if (duration < 0) {
    int last = 0;
    for (const auto& v : script) last = std::max(last, v.publish_minute);
    duration = (last + collector::kTickMinutes - 1) / collector::kTickMinutes * collector::kTickMinutes +
               kWindowMinutes + collector::kTickMinutes;
  }
  collector::SyntheticSource source(std::move(script), a.fault_rate, a.seed);
  collector::Store store(resolve(a.out));
  store.reset();
  collector::SimulatedClock clock;
  const auto state = collector::run(source.channels(), source, store, clock, {duration, a.seed, g.jobs});
  const auto trajs = collector::load_completed(store.root());
  write((fs::path(a.out) / "trajectories.csv").string(), io::format_trajectories(trajs));
  std::cout << "completed " << state.completed.size() << ", in flight " << state.active.size() << ", pending "
            << state.pending.size() << "\n";
}

// --------------------------------------------------------------------------

struct PreprocessArgs {
  std::string in = "trajectories.csv";
  std::string ruleset = "auto";
  std::string out = ".";
};

void run_preprocess(const PreprocessArgs& a) {
  const auto table = csv::Table::load(resolve(a.in));
  std::optional<Resolution> res;
  if (a.ruleset == "A") res = Resolution::hourly;
  if (a.ruleset == "B") res = Resolution::five_minute;
  const auto trajs = io::parse_trajectories(table, res);
  std::vector<ViewTrajectory> clean;
  std::vector<csv::Row> rejected;
  for (const auto& t : trajs) {
    const auto d = t.resolution == Resolution::hourly ? validate_a(t) : validate_b(t);
    if (d.accepted) clean.push_back(impute(t));
    else rejected.push_back({t.video_id, d.reason});
  }
  write((fs::path(a.out) / "clean.csv").string(), io::format_trajectories(clean));
  write((fs::path(a.out) / "rejected.csv").string(), csv::format({"video_id", "reason"}, rejected));
  std::cout << "accepted " << clean.size() << ", rejected " << rejected.size() << "\n";
}

// --------------------------------------------------------------------------

struct HalfLifeArgs {
  std::string in = "clean.csv";
  std::string out = "halflives.csv";
};

void run_halflife(const HalfLifeArgs& a) {
  const auto trajs = io::load_trajectories(resolve(a.in));
  std::vector<io::HalfLifeRow> rows;
  for (const auto& t : trajs) {
    try {
      const auto h = half_life(t);
      rows.push_back({t.video_id, h.hours, h.overshoot_pct});
    } catch (const UndefinedHalfLife& e) {
      std::cerr << "skipped: " << e.what() << "\n";
    }
  }
  write(a.out, io::format_halflives(rows));
}

// --------------------------------------------------------------------------

struct QuantileArgs {
  std::string in = "halflives.csv";
  std::string out = "quantiles.csv";
};

void run_quantiles(const QuantileArgs& a) {
  std::vector<double> hours;
  for (const auto& h : io::parse_halflives(csv::Table::load(resolve(a.in)))) hours.push_back(h.hours);
  const auto q = halflife_quantiles(hours);
  std::vector<csv::Row> rows;
  for (size_t i = 0; i < 5; ++i) {
    rows.push_back({std::to_string(static_cast<int>(std::lround(QuantileReport::kProbabilities[i] * 100))) + "%",
                    csv::fmt_double(q.values[i])});
    std::cout << rows.back()[0] << "\t" << rows.back()[1] << "\n";
  }
  write(a.out, csv::format({"quantile", "hours"}, rows));
}

// --------------------------------------------------------------------------

struct CountryArgs {
  std::string videos = "videos.csv";
  std::string halflives = "halflives.csv";
  std::vector<std::string> countries;
  std::string out = "countries.csv";
};

void run_country_report(const CountryArgs& a) {
  const auto videos = io::parse_videos(csv::Table::load(resolve(a.videos)));
  const auto rows = country_report(videos, half_life_map(a.halflives), a.countries);
  std::vector<csv::Row> out;
  for (const auto& r : rows)
    out.push_back({r.country, std::to_string(r.videos), csv::fmt_double(r.mean_hours), std::to_string(r.bin)});
  write(a.out, csv::format({"country", "videos", "mean_half_life", "bin"}, out));
}

// --------------------------------------------------------------------------

struct ClusterArgs {
  std::string in = "trajectories.csv";
  std::string k = "auto";
  int k_min = 2, k_max = 8;
  int restarts = 5;
  int max_iter = 100;
  std::uint64_t seed = 42;
  std::string labels;
  std::string out = ".";
};

void run_cluster(const ClusterArgs& a) {
  const auto trajs = io::load_trajectories(resolve(a.in));
  std::vector<cluster::Series> series;
  std::vector<std::string> ids;
  for (const auto& t : trajs) {
    if (t.missing_count()) throw ValidationError(t.video_id + ": trajectory has gaps; run preprocess first");
    series.push_back(cluster::shape_series(t));
    ids.push_back(t.video_id);
  }
  cluster::KShapeOptions opt;
  opt.seed = a.seed;
  opt.restarts = a.restarts;
  opt.max_iter = a.max_iter;
  opt.jobs = g.jobs;
  cluster::ClusterModel model;
  const fs::path dir(a.out);
  if (a.k == "auto") {
    auto bk = cluster::best_k(series, a.k_min, a.k_max, opt, ids);
    std::vector<csv::Row> sil;
    for (const auto& [k, s] : bk.scores) sil.push_back({std::to_string(k), csv::fmt_double(s)});
    write((dir / "silhouette.csv").string(), csv::format({"k", "silhouette"}, sil));
    std::cout << "k*=" << bk.k << "\n";
    if (bk.low_score_warning)
      std::cerr << "warning: best silhouette below " << cluster::kLowSilhouette << "; weak cluster structure\n";
    model = std::move(bk.model);
  } else {
    int k = 0;
    try {
      k = std::stoi(a.k);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--k", "expected 'auto' or an integer");
    }
    model = cluster::kshape(series, k, opt, ids);
    std::cout << "k=" << k << "\n";
  }
  std::vector<csv::Row> assign, cents;
  for (size_t i = 0; i < model.ids.size(); ++i) assign.push_back({model.ids[i], std::to_string(model.labels[i])});
  for (size_t c = 0; c < model.centroids.size(); ++c)
    for (size_t p = 0; p < model.centroids[c].size(); ++p)
      cents.push_back({std::to_string(c), std::to_string(p * 15), csv::fmt_double(model.centroids[c][p])});
  write((dir / "clusters.csv").string(), csv::format({"video_id", "cluster"}, assign));
  write((dir / "centroids.csv").string(), csv::format({"cluster", "minute", "value"}, cents));
  std::cout << "inertia " << model.inertia << " after " << model.iterations << " iterations\n";
  if (!a.labels.empty()) {
    const auto t = csv::Table::load(resolve(a.labels));
    t.require({"video_id", "family"});
    std::map<std::string, int> truth;
    for (size_t r = 0; r < t.size(); ++r)
      truth[t.at(r, "video_id")] = static_cast<int>(synth::parse_family(t.at(r, "family")));
    std::vector<int> x, y;
    for (size_t i = 0; i < model.ids.size(); ++i) {
      auto it = truth.find(model.ids[i]);
      if (it == truth.end()) continue;
      x.push_back(model.labels[i]);
      y.push_back(it->second);
    }
    std::cout << "ARI " << cluster::adjusted_rand_index(x, y) << "\n";
  }
}

// --------------------------------------------------------------------------

struct FeaturesArgs {
  std::string videos = "videos.csv";
  std::string channels = "channels.csv";
  std::string halflives = "halflives.csv";
  std::string annotator;
  int collection_year = 2024;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  std::string out = "features.csv";
};

void run_features(const FeaturesArgs& a) {
  const auto videos = io::parse_videos(csv::Table::load(resolve(a.videos)));
  const auto channels = io::parse_channels(csv::Table::load(resolve(a.channels)));
  const auto hl = half_life_map(a.halflives);
  const auto annotator = make_annotator(a.annotator);
  PrepareOptions opt;
  opt.split.seed = a.seed;
  opt.split.train_fraction = a.train_fraction;
  opt.collection_year = a.collection_year;
  opt.jobs = g.jobs;
  const auto prep = prepare_features(videos, channels, hl, *annotator, opt);
  for (const auto& e : prep.errors) std::cerr << "excluded " << e.video_id << ": " << e.reason << "\n";
  write(a.out, features::format_feature_csv(prep.records));
  std::cout << "rows " << prep.records.size() << ", early <= " << prep.binning.early_threshold << " h, late >= "
            << prep.binning.late_threshold << " h\n";
}

// --------------------------------------------------------------------------

struct TrainArgs {
  std::string features = "features.csv";
  std::string model = "gbdt";
  std::string grid = "default";
  int folds = 5;
  int n_trees = 100, max_depth = 3;
  double learning_rate = 0.1, lambda = 1.0, l2 = 1e-3;
  std::uint64_t seed = 42;
  std::string out;
};

void run_train(const TrainArgs& a) {
  const auto train = learn::load_features(csv::Table::load(resolve(a.features)), "train");
  json doc;
  if (a.model == "baseline") {
    doc = learn::baseline_fit(train).to_json();
  } else if (a.model == "logistic") {
    learn::LogisticParams p;
    p.l2 = a.l2;
    if (a.grid == "default") {
      const auto r = learn::grid_search(train, learn::default_logistic_grid(), static_cast<size_t>(a.folds), a.seed,
                                        g.jobs);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      p = r.best;
    }
    doc = learn::logistic_fit(train, p).to_json();
    doc["hyperparameters"] = {{"l2", p.l2}};
  } else {
    learn::GbdtParams p;
    p.n_trees = a.n_trees;
    p.max_depth = a.max_depth;
    p.learning_rate = a.learning_rate;
    p.lambda = a.lambda;
    if (a.grid == "default") {
      const auto r = learn::grid_search(train, learn::default_gbdt_grid(), static_cast<size_t>(a.folds), a.seed,
                                        g.jobs);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      p = r.best;
    }
    p.jobs = g.jobs;
    doc = learn::gbdt_fit(train, p).to_json();
    doc["hyperparameters"] = {{"n_trees", p.n_trees}, {"max_depth", p.max_depth},
                              {"learning_rate", p.learning_rate}, {"lambda", p.lambda}};
  }
  doc["seed"] = a.seed;
  doc["grid"] = a.model == "baseline" ? "none" : a.grid;
  doc["train_rows"] = train.rows();
  write(a.out.empty() ? a.model + ".json" : a.out, doc.dump(1) + "\n");
}

// --------------------------------------------------------------------------

json load_json(const std::string& path) {
  try {
    return json::parse(csv::read_file(resolve(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

struct Scored {
  std::vector<int> pred;
  std::vector<double> score;
};

Scored score_model(const json& doc, const learn::Dataset& test) {
  const auto kind = doc.at("model").get<std::string>();
  Scored s;
  if (kind == "baseline") {
    s.pred = learn::BaselineModel::from_json(doc).predict(test);
    s.score.assign(s.pred.begin(), s.pred.end());
  } else if (kind == "logistic") {
    const auto m = learn::LogisticModel::from_json(doc);
    if (features::schema_hash(m.feature_names) != test.schema_hash())
      throw ValidationError("schema hash mismatch between model and feature file");
    s.score = m.predict_proba(test);
    s.pred = learn::threshold(s.score);
  } else if (kind == "gbdt") {
    s.score = learn::GbdtModel::from_json(doc).predict_proba(test);
    s.pred = learn::threshold(s.score);
  } else {
    throw ValidationError("unknown model kind '" + kind + "'");
  }
  return s;
}

struct EvaluateArgs {
  std::string features = "features.csv";
  std::vector<std::string> models = {"gbdt.json"};
  std::string out = "eval.csv";
};

void run_evaluate(const EvaluateArgs& a) {
  const auto test = learn::load_features(csv::Table::load(resolve(a.features)), "test");
  std::vector<csv::Row> rows;
  for (const auto& path : a.models) {
    const auto doc = load_json(path);
    const auto s = score_model(doc, test);
    const auto r = learn::evaluate(test.y, s.pred, s.score);
    auto f = [](double v) { return csv::fmt_double(v, 6); };
    rows.push_back({doc.at("model").get<std::string>(), f(r.accuracy), f(r.precision), f(r.recall), f(r.f1),
                    f(r.roc_auc)});
    std::cout << rows.back()[0] << ": accuracy " << rows.back()[1] << ", f1 " << rows.back()[4] << ", auc "
              << rows.back()[5] << "\n";
  }
  write(a.out, csv::format({"model", "accuracy", "precision", "recall", "f1_score", "roc_auc"}, rows));
}

// --------------------------------------------------------------------------

struct ExplainArgs {
  std::string features = "features.csv";
  std::string model = "gbdt.json";
  std::string split = "test";
  size_t top = 10;
  int repeats = 10;
  std::uint64_t seed = 42;
  std::string out = ".";
};

void run_explain(const ExplainArgs& a) {
  const auto data = learn::load_features(csv::Table::load(resolve(a.features)), a.split);
  const auto doc = load_json(a.model);
  if (doc.at("model").get<std::string>() != "gbdt") throw ValidationError("explain needs a gbdt model");
  const auto model = learn::GbdtModel::from_json(doc);
  const auto attributions = explain::tree_shap(model, data, g.jobs);
  const auto summary = explain::shap_summary(attributions, data.feature_names);
  const fs::path dir(a.out);

  std::vector<csv::Row> rows;
  for (const auto& s : summary) {
    if (s.rank > a.top) break;
    rows.push_back({s.feature, csv::fmt_double(s.mean_abs_phi), std::to_string(s.rank)});
    std::cout << s.rank << ". " << s.feature << " " << s.mean_abs_phi << "\n";
  }
  write((dir / "shap_summary.csv").string(), csv::format({"feature", "mean_abs_phi", "rank"}, rows));

  // Attributions are on the log-odds scale.
  csv::Row header = {"video_id", "base_value_logodds"};
  for (const auto& n : data.feature_names) header.push_back("phi_" + n);
  rows.clear();
  for (const auto& at : attributions) {
    csv::Row r = {at.video_id, csv::fmt_double(at.base_value, 17)};
    for (double v : at.phi) r.push_back(csv::fmt_double(v, 17));
    rows.push_back(std::move(r));
  }
  write((dir / "attributions.csv").string(), csv::format(header, rows));

  const auto imp = explain::permutation_importance(model, data, explain::auc_metric, a.repeats, a.seed);
  rows.clear();
  for (size_t i : explain::importance_order(imp))
    rows.push_back({imp[i].feature, csv::fmt_double(imp[i].mean_drop), csv::fmt_double(imp[i].std_drop)});
  write((dir / "permutation_importance.csv").string(), csv::format({"feature", "mean_auc_drop", "std"}, rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Half-life analysis of video view trajectories"};
  app.require_subcommand(1);
  if (const char* env = std::getenv("HALFLIFE_DATA_DIR")) g.data_dir = env;
  app.add_option("--data-dir", g.data_dir, "Base directory for relative paths (env HALFLIFE_DATA_DIR)");
  app.add_option("--jobs", g.jobs, "Maximum worker threads")->check(CLI::PositiveNumber);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic trajectories, metadata or a collector script");
  synth_cmd->add_option("--kind", sa.kind, "trajectories | features | script")
      ->check(CLI::IsMember({"trajectories", "features", "script"}))
      ->capture_default_str();
  synth_cmd->add_option("--n-per-family", sa.n_per_family, "Trajectories per growth family")->capture_default_str();
  synth_cmd->add_option("--n", sa.n, "Videos (features, script)")->capture_default_str();
  synth_cmd->add_option("--noise", sa.noise, "Noise level (default 0.1 for trajectories, 3.5 for features)");
  synth_cmd->add_option("--resolution", sa.resolution, "hourly | five-minute")
      ->check(CLI::IsMember({"hourly", "five-minute"}))
      ->capture_default_str();
  synth_cmd->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", sa.out, "Output directory")->capture_default_str();

  CollectArgs ca;
  auto* collect_cmd = app.add_subcommand("collect", "Simulate five-minute collection from a scripted source");
  collect_cmd->add_option("--script", ca.script, "JSONL script of videos")->required();
  collect_cmd->add_option("--duration", ca.duration, "Simulated minutes (default: until every video completes)");
  collect_cmd->add_option("--fault-rate", ca.fault_rate, "Probability that a snapshot fetch fails")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  collect_cmd->add_option("--seed", ca.seed, "Run seed for fault injection")->capture_default_str();
  collect_cmd->add_option("--out", ca.out, "Store directory")->capture_default_str();

  PreprocessArgs pa;
  auto* pre_cmd = app.add_subcommand("preprocess", "Validate and impute trajectories");
  pre_cmd->add_option("--in", pa.in, "Trajectory CSV")->capture_default_str();
  pre_cmd->add_option("--ruleset", pa.ruleset, "A (hourly) | B (five-minute) | auto")
      ->check(CLI::IsMember({"A", "B", "auto"}))
      ->capture_default_str();
  pre_cmd->add_option("--out", pa.out, "Output directory for clean.csv and rejected.csv")->capture_default_str();

  HalfLifeArgs ha;
  auto* hl_cmd = app.add_subcommand("halflife", "Compute half-life and overshoot per video");
  hl_cmd->add_option("--in", ha.in, "Gap-free trajectory CSV")->capture_default_str();
  hl_cmd->add_option("--out", ha.out, "Output CSV")->capture_default_str();

  QuantileArgs qa;
  auto* q_cmd = app.add_subcommand("quantiles", "Nearest-rank half-life quantiles");
  q_cmd->add_option("--in", qa.in, "Half-life CSV")->capture_default_str();
  q_cmd->add_option("--out", qa.out, "Output CSV")->capture_default_str();

  CountryArgs cra;
  auto* cr_cmd = app.add_subcommand("country-report", "Per-country mean half-life with five bins");
  cr_cmd->add_option("--videos", cra.videos, "Video metadata CSV")->capture_default_str();
  cr_cmd->add_option("--halflives", cra.halflives, "Half-life CSV")->capture_default_str();
  cr_cmd->add_option("--country", cra.countries, "Known country to report even without data (repeatable)");
  cr_cmd->add_option("--out", cra.out, "Output CSV")->capture_default_str();

  ClusterArgs cla;
  auto* cl_cmd = app.add_subcommand("cluster", "k-Shape clustering of trajectory shapes");
  cl_cmd->add_option("--in", cla.in, "Gap-free trajectory CSV")->capture_default_str();
  cl_cmd->add_option("--k", cla.k, "Number of clusters or 'auto'")->capture_default_str();
  cl_cmd->add_option("--k-min", cla.k_min, "Smallest k for --k auto")->capture_default_str();
  cl_cmd->add_option("--k-max", cla.k_max, "Largest k for --k auto")->capture_default_str();
  cl_cmd->add_option("--restarts", cla.restarts, "Random restarts per k")->capture_default_str();
  cl_cmd->add_option("--max-iter", cla.max_iter, "Iteration cap per run")->capture_default_str();
  cl_cmd->add_option("--seed", cla.seed, "Random seed")->capture_default_str();
  cl_cmd->add_option("--labels", cla.labels, "Optional video_id,family CSV; reports ARI");
  cl_cmd->add_option("--out", cla.out, "Output directory")->capture_default_str();

  FeaturesArgs fa;
  auto* f_cmd = app.add_subcommand("features", "Build the 25-predictor feature table with early/late labels");
  f_cmd->add_option("--videos", fa.videos, "Video metadata CSV")->capture_default_str();
  f_cmd->add_option("--channels", fa.channels, "Channel metadata CSV")->capture_default_str();
  f_cmd->add_option("--halflives", fa.halflives, "Half-life CSV")->capture_default_str();
  f_cmd->add_option("--annotator", fa.annotator, "External title annotator command (default: built-in rules)");
  f_cmd->add_option("--collection-year", fa.collection_year, "Year used for channel_age")->capture_default_str();
  f_cmd->add_option("--train-fraction", fa.train_fraction, "Stratified train share")->capture_default_str();
  f_cmd->add_option("--seed", fa.seed, "Split seed")->capture_default_str();
  f_cmd->add_option("--out", fa.out, "Output CSV")->capture_default_str();

  TrainArgs ta;
  auto* t_cmd = app.add_subcommand("train", "Fit a classifier on the training split");
  t_cmd->add_option("--features", ta.features, "features.csv")->capture_default_str();
  t_cmd->add_option("--model", ta.model, "baseline | logistic | gbdt")
      ->check(CLI::IsMember({"baseline", "logistic", "gbdt"}))
      ->capture_default_str();
  t_cmd->add_option("--grid", ta.grid, "default (k-fold grid search) | none (use the flags below)")
      ->check(CLI::IsMember({"default", "none"}))
      ->capture_default_str();
  t_cmd->add_option("--folds", ta.folds, "Grid-search folds")->check(CLI::Range(2, 100))->capture_default_str();
  t_cmd->add_option("--n-trees", ta.n_trees, "GBDT trees (--grid none)")->capture_default_str();
  t_cmd->add_option("--max-depth", ta.max_depth, "GBDT depth (--grid none)")->capture_default_str();
  t_cmd->add_option("--learning-rate", ta.learning_rate, "GBDT shrinkage (--grid none)")->capture_default_str();
  t_cmd->add_option("--lambda", ta.lambda, "GBDT L2 on leaf weights")->capture_default_str();
  t_cmd->add_option("--l2", ta.l2, "Logistic L2 penalty (--grid none)")->capture_default_str();
  t_cmd->add_option("--seed", ta.seed, "Fold seed")->capture_default_str();
  t_cmd->add_option("--out", ta.out, "Model JSON (default <model>.json)");

  EvaluateArgs ea;
  auto* e_cmd = app.add_subcommand("evaluate", "Score models on the test split");
  e_cmd->add_option("--features", ea.features, "features.csv")->capture_default_str();
  e_cmd->add_option("--model", ea.models, "Model JSON (repeatable)")->capture_default_str();
  e_cmd->add_option("--out", ea.out, "Output CSV")->capture_default_str();

  ExplainArgs xa;
  auto* x_cmd = app.add_subcommand("explain", "TreeSHAP summary and permutation importance");
  x_cmd->add_option("--features", xa.features, "features.csv")->capture_default_str();
  x_cmd->add_option("--model", xa.model, "GBDT model JSON")->capture_default_str();
  x_cmd->add_option("--split", xa.split, "train | test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  x_cmd->add_option("--top", xa.top, "Features in shap_summary.csv")->capture_default_str();
  x_cmd->add_option("--repeats", xa.repeats, "Permutation repeats")->capture_default_str();
  x_cmd->add_option("--seed", xa.seed, "Permutation seed")->capture_default_str();
  x_cmd->add_option("--out", xa.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth_cmd) run_synth(sa);
    else if (*collect_cmd) run_collect(ca);
    else if (*pre_cmd) run_preprocess(pa);
    else if (*hl_cmd) run_halflife(ha);
    else if (*q_cmd) run_quantiles(qa);
    else if (*cr_cmd) run_country_report(cra);
    else if (*cl_cmd) run_cluster(cla);
    else if (*f_cmd) run_features(fa);
    else if (*t_cmd) run_train(ta);
    else if (*e_cmd) run_evaluate(ea);
    else if (*x_cmd) run_explain(xa);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
