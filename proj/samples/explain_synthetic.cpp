// Trains the three classifiers on synthetic metadata and prints the GBDT
// feature ranking.

#include <cstdio>
#include <map>

#include "halflife/explain.hpp"
#include "halflife/pipeline.hpp"
#include "halflife/synth.hpp"

using namespace halflife;

int main() {
  const auto corpus = synth::synth_features(3000, 5);
  std::map<std::string, double> hl;
  for (size_t i = 0; i < corpus.videos.size(); ++i) hl[corpus.videos[i].video_id] = corpus.half_life[i];

  const RuleAnnotator annotator;
  auto prep = prepare_features(corpus.videos, corpus.channels, hl, annotator);
  std::vector<features::FeatureRecord> train_rows, test_rows;
  for (auto& r : prep.records) (r.split == "train" ? train_rows : test_rows).push_back(std::move(r));
  const auto train = learn::from_records(train_rows);
  const auto test = learn::from_records(test_rows);
  std::printf("early <= %.2f h, late >= %.2f h; %zu train / %zu test rows\n", prep.binning.early_threshold,
              prep.binning.late_threshold, train.rows(), test.rows());

  const auto base = learn::baseline_fit(train).predict(test);
  const auto rb = learn::evaluate(test.y, base, std::vector<double>(base.begin(), base.end()));
  const auto lp = learn::logistic_fit(train).predict_proba(test);
  const auto rl = learn::evaluate(test.y, learn::threshold(lp), lp);
  learn::GbdtParams params;
  params.learning_rate = 0.05;
  const auto gbdt = learn::gbdt_fit(train, params);
  const auto gp = gbdt.predict_proba(test);
  const auto rg = learn::evaluate(test.y, learn::threshold(gp), gp);
  std::printf("%-9s %8s %8s\n", "model", "F1", "AUC");
  std::printf("%-9s %8.2f %8.2f\n", "baseline", rb.f1, rb.roc_auc);
  std::printf("%-9s %8.2f %8.2f\n", "logistic", rl.f1, rl.roc_auc);
  std::printf("%-9s %8.2f %8.2f\n", "gbdt", rg.f1, rg.roc_auc);

  const auto summary = explain::shap_summary(explain::tree_shap(gbdt, test), test.feature_names);
  for (size_t i = 0; i < 5; ++i) std::printf("%zu. %-24s %.4f\n", summary[i].rank, summary[i].feature.c_str(), summary[i].mean_abs_phi);
}
