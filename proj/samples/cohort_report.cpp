// Generates a synthetic cohort, reports half-life quantiles and clusters the
// trajectory shapes.

#include <cstdio>
#include <vector>

#include "halflife/cluster.hpp"
#include "halflife/core.hpp"
#include "halflife/synth.hpp"

using namespace halflife;

int main() {
  const auto cohort = synth::generate_cohort(25, 2024, 0.1);

  std::vector<double> hours;
  std::vector<cluster::Series> series;
  std::vector<int> truth;
  for (size_t i = 0; i < cohort.trajectories.size(); ++i) {
    hours.push_back(half_life(cohort.trajectories[i]).hours);
    series.push_back(cluster::shape_series(cohort.trajectories[i]));
    truth.push_back(static_cast<int>(cohort.labels[i]));
  }

  const auto q = halflife_quantiles(hours);
  std::printf("half-life quantiles (h): 10%% %.2f  25%% %.2f  50%% %.2f  75%% %.2f  90%% %.2f\n", q.q10(), q.q25(),
              q.q50(), q.q75(), q.q90());

  const auto bk = cluster::best_k(series, 2, 6);
  for (const auto& [k, s] : bk.scores) std::printf("k=%d silhouette %.3f\n", k, s);
  std::printf("k*=%d, ARI against the generating families %.3f\n", bk.k,
              cluster::adjusted_rand_index(truth, bk.model.labels));
}
