#pragma once

// Importance sampling of the DSM transition probability with ISM paths.
//
//   p_hat = p_ism(y | x) * mean_j w(P_j),   w = DSM path density / ISM path density
//
// Weights are handled as logs throughout. Parallel runs split the N samples
// into contiguous blocks, one random stream per worker, and merge the
// partial sums in worker order, so a report depends only on (seed, workers).

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dsmis/dsm.hpp"
#include "dsmis/ism.hpp"
#include "dsmis/random.hpp"

namespace dsmis {

struct WeightSample {
  double log_w = 0.0;
  std::size_t m = 0;
};

// log w for one path. Throws std::invalid_argument for an invalid path.
WeightSample log_importance_weight(const DsmModel& dsm, const Path& path, const SequencePair& pair,
                                   double T);

// Same computation in another floating-point type.
template <class Scalar>
Scalar log_importance_weight_as(const DsmModel& dsm, const Path& path, const SequencePair& pair,
                                double T) {
  const auto d = path_log_densities<Scalar>(dsm, path, pair, T);
  return d.dsm - d.ism;
}

// Weight evaluation for many paths of one (model, pair, T): the starting
// total rates are computed once. Not thread-safe; use one per worker.
class WeightEvaluator {
 public:
  WeightEvaluator(const DsmModel& dsm, const SequencePair& pair, double T);
  WeightSample operator()(const Path& path);

 private:
  const DsmModel& dsm_;
  const SequencePair& pair_;
  double T_;
  double ism_total_;
  double dsm_total_;
  std::vector<Base> scratch_;
};

struct RunConfig {
  std::size_t N = 10000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::optional<double> epsilon;
  std::optional<double> delta;
};

struct EstimateReport {
  double log_p_hat = 0.0;
  double log_p_ism = 0.0;
  double mean_log_w = 0.0;
  double log_mean_w = 0.0;
  double cv2 = 0.0;
  double ess = 0.0;
  double se_rel = 0.0;
  // L2_hat = 1 + cv2 and a delta-method standard error for it.
  double l2_hat = 1.0;
  double l2_se = 0.0;
  double mean_m = 0.0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double wall_time = 0.0;
  // Median runs: p_hat of every batch (log scale) and their seeds.
  std::vector<double> batch_log_p_hat;
  std::vector<std::uint64_t> batch_seeds;
};

// Throws std::invalid_argument for N = 0, workers = 0 or T <= 0, and
// NumericError if the endpoint cannot be reached.
EstimateReport estimate(const DsmModel& dsm, const SequencePair& pair, double T,
                        const RunConfig& cfg);

// Draws N weights with one stream; used by diagnostics and tests.
std::vector<WeightSample> sample_weights(const DsmModel& dsm, const SequencePair& pair, double T,
                                         std::size_t N, Rng& rng);

// (mean w^2) / (mean w)^2 from log weights. Requires at least 2 samples.
double empirical_l2(const std::vector<WeightSample>& weights);

enum class SampleSizeConvention { figure, chi2_delta };

SampleSizeConvention parse_convention(std::string_view name);
const char* to_string(SampleSizeConvention convention);

// figure:     ceil(L2 / eps^2)
// chi2-delta: max(1, ceil(chi2 / (eps^2 delta)))
std::uint64_t chebychev_sample_size(double epsilon, double l2_or_chi2,
                                    SampleSizeConvention convention = SampleSizeConvention::figure,
                                    double delta = 0.25);

// Smallest odd integer >= 8 ln(1/delta).
std::size_t median_batch_count(double delta);

// Runs median_batch_count(delta) independent estimates with derived seeds and
// returns the batch whose p_hat is the median, with every batch value listed.
EstimateReport median_of_estimates(const DsmModel& dsm, const SequencePair& pair, double T,
                                   const RunConfig& cfg, double delta);

}  // namespace dsmis
