#include "dsmis/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "dsmis/errors.hpp"

namespace dsmis {

WeightSample log_importance_weight(const DsmModel& dsm, const Path& path, const SequencePair& pair,
                                   double T) {
  const auto d = path_log_densities<double>(dsm, path, pair, T);
  return {d.dsm - d.ism, path.m()};
}

WeightEvaluator::WeightEvaluator(const DsmModel& dsm, const SequencePair& pair, double T)
    : dsm_(dsm), pair_(pair), T_(T), ism_total_(0.0) {
  dsm.check_length(pair.n());
  const auto start = pair.start().bases();
  for (std::size_t i = 0; i < start.size(); ++i)
    ism_total_ += dsm.ism().generator(i).exit_rate(start[i]);
  dsm_total_ = total_rate_of<double>(dsm, start);
}

WeightSample WeightEvaluator::operator()(const Path& path) {
  const auto d = path_log_densities<double>(dsm_, path, pair_, T_, ism_total_, dsm_total_, scratch_);
  return {d.dsm - d.ism, path.m()};
}

namespace {

// Sums of w^k, k = 1..4, with w scaled by e^{-shift}; also sum of log w and m.
struct Partial {
  double shift = -std::numeric_limits<double>::infinity();
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  double sum_log_w = 0.0;
  double sum_m = 0.0;
  std::size_t count = 0;
};

Partial summarize(const std::vector<WeightSample>& weights) {
  Partial p;
  p.count = weights.size();
  for (const auto& w : weights) p.shift = std::max(p.shift, w.log_w);
  for (const auto& w : weights) {
    const double v = std::exp(w.log_w - p.shift);
    double power = v;
    for (double& s : p.s) {
      s += power;
      power *= v;
    }
    p.sum_log_w += w.log_w;
    p.sum_m += static_cast<double>(w.m);
  }
  return p;
}

Partial merge(const std::vector<Partial>& parts) {
  Partial out;
  for (const auto& p : parts) out.shift = std::max(out.shift, p.shift);
  for (const auto& p : parts) {
    if (p.count == 0) continue;
    const double scale = std::exp(p.shift - out.shift);
    double factor = scale;
    for (int k = 0; k < 4; ++k) {
      out.s[k] += p.s[k] * factor;
      factor *= scale;
    }
    out.sum_log_w += p.sum_log_w;
    out.sum_m += p.sum_m;
    out.count += p.count;
  }
  return out;
}

void fill_report(const Partial& p, EstimateReport& report) {
  const double n = static_cast<double>(p.count);
  report.N = p.count;
  report.mean_log_w = p.sum_log_w / n;
  report.mean_m = p.sum_m / n;
  report.log_mean_w = p.shift + std::log(p.s[0] / n);
  report.log_p_hat = report.log_p_ism + report.log_mean_w;
  report.cv2 = std::max(0.0, n * p.s[1] / (p.s[0] * p.s[0]) - 1.0);
  report.ess = n / (1.0 + report.cv2);
  report.se_rel = std::sqrt(report.cv2 / n);
  report.l2_hat = 1.0 + report.cv2;

  const double m1 = p.s[0] / n, m2 = p.s[1] / n, m3 = p.s[2] / n, m4 = p.s[3] / n;
  const double g1 = -2.0 * m2 / (m1 * m1 * m1);
  const double g2 = 1.0 / (m1 * m1);
  const double v11 = m2 - m1 * m1;
  const double v12 = m3 - m1 * m2;
  const double v22 = m4 - m2 * m2;
  const double var = (g1 * g1 * v11 + 2.0 * g1 * g2 * v12 + g2 * g2 * v22) / n;
  report.l2_se = std::sqrt(std::max(0.0, var));
}

void sample_block(const JointPathSampler& sampler, WeightEvaluator& weigh, std::size_t count,
                  Rng& rng, std::vector<WeightSample>& out) {
  Path path;
  std::vector<Jump> scratch;
  out.reserve(out.size() + count);
  for (std::size_t j = 0; j < count; ++j) {
    sampler.sample(rng, path, scratch);
    out.push_back(weigh(path));
  }
}

}  // namespace

std::vector<WeightSample> sample_weights(const DsmModel& dsm, const SequencePair& pair, double T,
                                         std::size_t N, Rng& rng) {
  const JointPathSampler sampler(dsm.ism(), pair, T);
  WeightEvaluator weigh(dsm, pair, T);
  std::vector<WeightSample> out;
  sample_block(sampler, weigh, N, rng, out);
  return out;
}

EstimateReport estimate(const DsmModel& dsm, const SequencePair& pair, double T,
                        const RunConfig& cfg) {
  if (cfg.N == 0) throw std::invalid_argument("N must be at least 1");
  if (cfg.workers == 0) throw std::invalid_argument("workers must be at least 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and > 0");
  const auto started = std::chrono::steady_clock::now();
  dsm.check_length(pair.n());

  EstimateReport report;
  report.seed = cfg.seed;
  report.workers = cfg.workers;
  report.log_p_ism = ism_marginal_likelihood(dsm.ism(), pair, T);

  const JointPathSampler sampler(dsm.ism(), pair, T);
  const std::size_t W = std::min(cfg.workers, cfg.N);
  std::vector<Partial> parts(cfg.workers);
  std::vector<std::exception_ptr> errors(W);

  auto run = [&](std::size_t w) {
    try {
      const std::size_t lo = cfg.N * w / W;
      const std::size_t hi = cfg.N * (w + 1) / W;
      Rng rng = make_stream(cfg.seed, w);
      WeightEvaluator weigh(dsm, pair, T);
      std::vector<WeightSample> weights;
      sample_block(sampler, weigh, hi - lo, rng, weights);
      parts[w] = summarize(weights);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  if (W == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(W);
    for (std::size_t w = 0; w < W; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  fill_report(merge(parts), report);
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

double empirical_l2(const std::vector<WeightSample>& weights) {
  if (weights.size() < 2) throw std::invalid_argument("empirical_l2 needs at least 2 weights");
  const Partial p = summarize(weights);
  const double n = static_cast<double>(p.count);
  return std::max(1.0, n * p.s[1] / (p.s[0] * p.s[0]));
}

SampleSizeConvention parse_convention(std::string_view name) {
  if (name == "figure") return SampleSizeConvention::figure;
  if (name == "chi2-delta") return SampleSizeConvention::chi2_delta;
  throw std::invalid_argument("unknown sample-size convention '" + std::string(name) +
                              "' (expected figure or chi2-delta)");
}

const char* to_string(SampleSizeConvention convention) {
  return convention == SampleSizeConvention::figure ? "figure" : "chi2-delta";
}

namespace {

// Ceiling that ignores round-off just above an integer, so 1 / 0.01^2 is 10000.
std::uint64_t snapped_ceil(double x) {
  if (!(x < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(x));
}

}  // namespace

std::uint64_t chebychev_sample_size(double epsilon, double l2_or_chi2,
                                    SampleSizeConvention convention, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  if (!(l2_or_chi2 >= 0.0)) throw std::invalid_argument("bound must be >= 0");
  if (convention == SampleSizeConvention::figure)
    return snapped_ceil(l2_or_chi2 / (epsilon * epsilon));
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
  return std::max<std::uint64_t>(1, snapped_ceil(l2_or_chi2 / (epsilon * epsilon * delta)));
}

std::size_t median_batch_count(double delta) {
  if (!(delta > 0.0 && delta < 0.75)) throw std::invalid_argument("delta must be in (0, 3/4)");
  auto k = static_cast<std::size_t>(std::ceil(8.0 * std::log(1.0 / delta)));
  if (k % 2 == 0) ++k;
  return k;
}

EstimateReport median_of_estimates(const DsmModel& dsm, const SequencePair& pair, double T,
                                   const RunConfig& cfg, double delta) {
  const std::size_t K = median_batch_count(delta);
  std::vector<EstimateReport> batches;
  batches.reserve(K);
  for (std::size_t b = 0; b < K; ++b) {
    RunConfig batch = cfg;
    batch.seed = derive_seed(cfg.seed, b);
    batches.push_back(estimate(dsm, pair, T, batch));
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return batches[l].log_p_hat < batches[r].log_p_hat;
  });
  EstimateReport out = batches[order[K / 2]];
  out.seed = cfg.seed;
  out.batch_log_p_hat.clear();
  out.batch_seeds.clear();
  for (const auto& b : batches) {
    out.batch_log_p_hat.push_back(b.log_p_hat);
    out.batch_seeds.push_back(b.seed);
  }
  return out;
}

}  // namespace dsmis
