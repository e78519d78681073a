#pragma once

// Independent-site proposal model.
//
// Each site evolves under its own a x a generator. Everything that needs
// e^{TQ} goes through uniformization: with gamma_bar = max exit rate and
// R = I + Q / gamma_bar,
//
//   e^{TQ} = sum_m Poisson(m; gamma_bar T) R^m,
//
// truncated where the Poisson upper tail drops below 1e-14 (relative to the
// smallest transition probability). The same series gives the distribution
// of the number of dominated-chain steps on an endpoint-conditioned path,
// which drives the path sampler.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dsmis/random.hpp"
#include "dsmis/seqcore.hpp"

namespace dsmis {

class SiteGenerator {
 public:
  // Off-diagonal rates must be strictly positive and every row must sum to
  // zero to within 1e-12 of its exit rate. Throws std::invalid_argument.
  explicit SiteGenerator(Eigen::MatrixXd rates);

  // Jukes-Cantor: every off-diagonal rate is exit_rate / (a - 1).
  static SiteGenerator jc69(double exit_rate = 1.0, std::size_t alphabet_size = 4);

  std::size_t alphabet_size() const { return static_cast<std::size_t>(rates_.rows()); }
  const Eigen::MatrixXd& rates() const { return rates_; }
  double rate(Base from, Base to) const { return rates_(from, to); }
  // sum_{b != from} rate(from, b), accumulated in index order.
  double exit_rate(Base from) const { return exit_(from); }
  const Eigen::VectorXd& exit_rates() const { return exit_; }

  double max_exit_rate() const { return exit_.maxCoeff(); }
  double min_off_diagonal() const;
  double max_off_diagonal() const;
  // All exit rates equal: the uniformized chain then has a zero diagonal and
  // dominated-chain steps are true substitutions.
  bool constant_exit_rate() const;

  bool operator==(const SiteGenerator& other) const { return rates_ == other.rates_; }

 private:
  Eigen::MatrixXd rates_;
  Eigen::VectorXd exit_;
};

class IsmModel {
 public:
  explicit IsmModel(SiteGenerator shared);
  // One generator per site; identical generators are stored once.
  explicit IsmModel(std::vector<SiteGenerator> per_site);

  bool is_shared() const { return site_index_.empty(); }
  std::size_t alphabet_size() const { return distinct_.front().alphabet_size(); }
  const SiteGenerator& generator(std::size_t site) const {
    return distinct_[site_index_.empty() ? 0 : site_index_[site]];
  }
  const std::vector<SiteGenerator>& distinct_generators() const { return distinct_; }

  // Throws std::invalid_argument if a per-site model does not cover n sites.
  void check_length(std::size_t n) const;

  double gamma_max() const;
  double gamma_min() const;

 private:
  std::vector<SiteGenerator> distinct_;
  std::vector<std::uint32_t> site_index_;
};

struct JumpChain {
  Eigen::MatrixXd R;
  double gamma_bar = 0.0;
};

JumpChain make_jump_chain(const SiteGenerator& g);

// Uniformization tables for one (generator, T). Immutable; shared through
// UniformizationCache.
class UniformizedSite {
 public:
  UniformizedSite(const SiteGenerator& g, double T, double tail_tol = 1e-14);

  double horizon() const { return T_; }
  const JumpChain& chain() const { return chain_; }
  std::size_t truncation() const { return mstar_; }
  const Eigen::MatrixXd& transition() const { return P_; }
  double transition(Base x, Base y) const { return P_(x, y); }
  const Eigen::MatrixXd& power(std::size_t m) const { return powers_[m]; }

  // P(m dominated-chain steps | x -> y in time T). Beyond the truncation
  // point R^m is formed on the fly.
  double step_count_pmf(Base x, Base y, std::size_t m) const;

  // P(at least one step | x -> x).
  double prob_some_steps(Base x) const;

  std::size_t sample_step_count(Base x, Base y, Rng& rng) const;
  // Conditioned on at least one step; requires x -> x.
  std::size_t sample_step_count_given_some(Base x, Rng& rng) const;

  // Appends the true jumps (virtual self-steps removed) of a path with m
  // dominated-chain steps from x to y, labelled with `site`, in time order.
  void sample_path_given_steps(Base x, Base y, std::size_t m, std::size_t site, Rng& rng,
                               std::vector<Jump>& out) const;

 private:
  std::size_t sample_from_cdf(const std::vector<double>& cdf, double lo, Rng& rng) const;

  double T_;
  std::size_t a_;
  JumpChain chain_;
  std::size_t mstar_ = 0;
  std::vector<double> poisson_;             // Poisson(m; gamma_bar T), m <= mstar
  std::vector<Eigen::MatrixXd> powers_;     // R^m, m <= mstar
  Eigen::MatrixXd P_;
  std::vector<std::vector<double>> cdf_;    // [x * a + y] cumulative of poisson_[m] R^m(x, y)
};

// Process-wide cache of uniformization tables keyed by generator contents and
// T. Thread-safe.
std::shared_ptr<const UniformizedSite> uniformized(const SiteGenerator& g, double T);

// (e^{TQ}). Identity at T = 0. Throws std::invalid_argument for T < 0.
Eigen::MatrixXd transition_matrix(const SiteGenerator& g, double T);
// Uncached evaluation with an explicit tail tolerance.
Eigen::MatrixXd transition_matrix(const SiteGenerator& g, double T, double tail_tol);

// sum_i log (e^{T Q_i})_{x_i, y_i}. Throws NumericError if some endpoint is
// unreachable (T = 0 with x != y, or underflow).
double ism_marginal_likelihood(const IsmModel& model, const SequencePair& pair, double T);

// Probability of m dominated-chain steps given the endpoints. For a
// generator with constant exit rate (e.g. JC69) these are true jumps.
double jump_count_pmf(const SiteGenerator& g, Base x, Base y, double T, std::size_t m);

// Endpoint-conditioned single-site path. Jumps carry site 0.
Path sample_endpoint_path(const SiteGenerator& g, Base x, Base y, double T, Rng& rng);

// Draws whole-sequence paths from the endpoint-conditioned ISM. Sites with
// x_i = y_i are visited by geometric skipping with thinning, so the cost per
// path is O(r + number of sites that move) rather than O(n).
class JointPathSampler {
 public:
  JointPathSampler(const IsmModel& model, const SequencePair& pair, double T);

  double horizon() const { return T_; }
  // `scratch` is reused between calls; one per thread.
  void sample(Rng& rng, Path& out, std::vector<Jump>& scratch) const;
  Path sample(Rng& rng) const;

 private:
  struct SiteEntry {
    std::size_t site;
    const UniformizedSite* tables;
    Base x;
    Base y;
    double accept;
  };

  double T_;
  std::vector<std::shared_ptr<const UniformizedSite>> tables_;
  std::vector<SiteEntry> mutated_;
  std::vector<SiteEntry> quiet_;
  double q_max_ = 0.0;
  double log1m_q_max_ = 0.0;
};

Path sample_joint_path(const IsmModel& model, const SequencePair& pair, double T, Rng& rng);

// Sorts by (time, site) and separates equal timestamps on different sites.
// Returns false if a collision cannot be resolved (same site, or nudging
// past the horizon); samplers then redraw.
bool order_jumps(std::vector<Jump>& jumps, double horizon);

// log density of an ISM path ending in pair.end():
//   sum_j log gamma(b_j; prev) - sum_j dt_{j-1} gamma(.; x^{j-1}) - dt_m gamma(.; y)
// The total exit rate is updated per jump from the mutated site only.
// Throws std::invalid_argument for a path that is not valid for the pair.
template <class Scalar = double>
Scalar ism_path_log_density(const IsmModel& model, const Path& path, const SequencePair& pair,
                            double T) {
  using std::log;
  if (path.horizon() != T) throw std::invalid_argument("path horizon differs from T");
  const std::size_t n = pair.n();
  model.check_length(n);
  std::vector<Base> state(pair.start().bases().begin(), pair.start().bases().end());
  const auto& end = pair.end().bases();

  Scalar total = 0;
  for (std::size_t i = 0; i < n; ++i) total += Scalar(model.generator(i).exit_rate(state[i]));

  std::size_t mismatched = pair.r();
  Scalar logp = 0;
  double prev_t = 0.0;
  for (const Jump& jump : path.jumps()) {
    if (jump.site >= n) throw std::invalid_argument("jump site out of range");
    if (!(jump.time > prev_t)) throw std::invalid_argument("jump times not increasing");
    const Base from = state[jump.site];
    if (from == jump.base) throw std::invalid_argument("jump does not change its site");
    const SiteGenerator& g = model.generator(jump.site);
    logp += log(Scalar(g.rate(from, jump.base))) - Scalar(jump.time - prev_t) * total;
    total += Scalar(g.exit_rate(jump.base)) - Scalar(g.exit_rate(from));
    mismatched -= from != end[jump.site];
    mismatched += jump.base != end[jump.site];
    state[jump.site] = jump.base;
    prev_t = jump.time;
  }
  if (mismatched != 0) throw std::invalid_argument("path does not end at the target sequence");
  logp -= Scalar(T - prev_t) * total;
  return logp;
}

}  // namespace dsmis
