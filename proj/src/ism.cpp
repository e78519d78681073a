#include "dsmis/ism.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <limits>
#include <mutex>
#include <unordered_map>

#include "dsmis/errors.hpp"

namespace dsmis {

// ---------------------------------------------------------------------------
// SiteGenerator

SiteGenerator::SiteGenerator(Eigen::MatrixXd rates) : rates_(std::move(rates)) {
  const auto a = rates_.rows();
  if (a < 2 || rates_.cols() != a) throw std::invalid_argument("generator must be square, a >= 2");
  if (!rates_.allFinite()) throw std::invalid_argument("generator has non-finite entries");
  exit_.resize(a);
  for (Eigen::Index x = 0; x < a; ++x) {
    double out = 0.0;
    for (Eigen::Index y = 0; y < a; ++y) {
      if (y == x) continue;
      if (!(rates_(x, y) > 0.0))
        throw std::invalid_argument("generator off-diagonal rates must be strictly positive");
      out += rates_(x, y);
    }
    exit_(x) = out;
    if (std::abs(out + rates_(x, x)) > 1e-12 * std::max(1.0, out))
      throw std::invalid_argument("generator row " + std::to_string(x) + " does not sum to zero");
  }
}

SiteGenerator SiteGenerator::jc69(double exit_rate, std::size_t alphabet_size) {
  if (!(exit_rate > 0.0) || !std::isfinite(exit_rate))
    throw std::invalid_argument("jc69 rate must be positive");
  const auto a = static_cast<Eigen::Index>(alphabet_size);
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(a, a, exit_rate / static_cast<double>(a - 1));
  for (Eigen::Index x = 0; x < a; ++x) {
    double out = 0.0;
    for (Eigen::Index y = 0; y < a; ++y)
      if (y != x) out += q(x, y);
    q(x, x) = -out;
  }
  return SiteGenerator(std::move(q));
}

double SiteGenerator::min_off_diagonal() const {
  double v = std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < rates_.rows(); ++x)
    for (Eigen::Index y = 0; y < rates_.cols(); ++y)
      if (x != y) v = std::min(v, rates_(x, y));
  return v;
}

double SiteGenerator::max_off_diagonal() const {
  double v = 0.0;
  for (Eigen::Index x = 0; x < rates_.rows(); ++x)
    for (Eigen::Index y = 0; y < rates_.cols(); ++y)
      if (x != y) v = std::max(v, rates_(x, y));
  return v;
}

bool SiteGenerator::constant_exit_rate() const {
  return exit_.maxCoeff() == exit_.minCoeff();
}

// ---------------------------------------------------------------------------
// IsmModel

IsmModel::IsmModel(SiteGenerator shared) { distinct_.push_back(std::move(shared)); }

IsmModel::IsmModel(std::vector<SiteGenerator> per_site) {
  if (per_site.empty()) throw std::invalid_argument("per-site model needs at least one site");
  site_index_.reserve(per_site.size());
  const std::size_t a = per_site.front().alphabet_size();
  for (auto& g : per_site) {
    if (g.alphabet_size() != a)
      throw std::invalid_argument("per-site generators use different alphabets");
    auto it = std::find(distinct_.begin(), distinct_.end(), g);
    if (it == distinct_.end()) {
      distinct_.push_back(std::move(g));
      it = std::prev(distinct_.end());
    }
    site_index_.push_back(static_cast<std::uint32_t>(it - distinct_.begin()));
  }
}

void IsmModel::check_length(std::size_t n) const {
  if (!site_index_.empty() && site_index_.size() != n) {
    throw std::invalid_argument("model has " + std::to_string(site_index_.size()) +
                                " per-site generators but sequences have length " +
                                std::to_string(n));
  }
}

double IsmModel::gamma_max() const {
  double v = 0.0;
  for (const auto& g : distinct_) v = std::max(v, g.max_off_diagonal());
  return v;
}

double IsmModel::gamma_min() const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& g : distinct_) v = std::min(v, g.min_off_diagonal());
  return v;
}

// ---------------------------------------------------------------------------
// Uniformization

JumpChain make_jump_chain(const SiteGenerator& g) {
  JumpChain chain;
  chain.gamma_bar = g.max_exit_rate();
  const auto a = static_cast<Eigen::Index>(g.alphabet_size());
  chain.R.resize(a, a);
  for (Eigen::Index x = 0; x < a; ++x) {
    for (Eigen::Index y = 0; y < a; ++y) {
      chain.R(x, y) = x == y ? std::max(0.0, 1.0 - g.exit_rate(static_cast<Base>(x)) / chain.gamma_bar)
                             : g.rates()(x, y) / chain.gamma_bar;
    }
  }
  return chain;
}

namespace {

// Smallest m* with P(Poisson(mu) > m*) below tol, using the Chernoff bound
// P(M >= k) <= e^{-mu} (e mu / k)^k for k > mu.
std::size_t poisson_truncation(double mu, double tol) {
  if (mu <= 0.0) return 0;
  const double log_tol = std::log(tol);
  auto k = static_cast<std::size_t>(std::floor(mu)) + 1;
  while (-mu + static_cast<double>(k) * (1.0 + std::log(mu) - std::log(static_cast<double>(k))) >=
         log_tol)
    ++k;
  return k - 1;
}

double log_poisson(double mu, std::size_t m) {
  if (mu <= 0.0) return m == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double dm = static_cast<double>(m);
  return -mu + dm * std::log(mu) - std::lgamma(dm + 1.0);
}

}  // namespace

UniformizedSite::UniformizedSite(const SiteGenerator& g, double T, double tail_tol)
    : T_(T), a_(g.alphabet_size()), chain_(make_jump_chain(g)) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("time must be finite and >= 0");
  const double mu = chain_.gamma_bar * T;
  const auto a = static_cast<Eigen::Index>(a_);

  auto build = [&](std::size_t mstar) {
    mstar_ = mstar;
    poisson_.resize(mstar + 1);
    powers_.resize(mstar + 1);
    powers_[0] = Eigen::MatrixXd::Identity(a, a);
    for (std::size_t m = 1; m <= mstar; ++m) powers_[m] = powers_[m - 1] * chain_.R;
    P_ = Eigen::MatrixXd::Zero(a, a);
    for (std::size_t m = 0; m <= mstar; ++m) {
      poisson_[m] = std::exp(log_poisson(mu, m));
      P_.noalias() += poisson_[m] * powers_[m];
    }
  };

  build(poisson_truncation(mu, tail_tol));
  // Make the neglected tail small relative to the smallest entry so that the
  // step-count pmf of every (x, y) is normalized to the same tolerance.
  const double min_entry = P_.minCoeff();
  if (mu > 0.0 && min_entry < 1.0 && min_entry > 0.0) {
    const std::size_t refined = poisson_truncation(mu, tail_tol * min_entry);
    if (refined > mstar_) build(refined);
  }

  cdf_.assign(a_ * a_, {});
  for (std::size_t x = 0; x < a_; ++x) {
    for (std::size_t y = 0; y < a_; ++y) {
      auto& cdf = cdf_[x * a_ + y];
      cdf.resize(mstar_ + 1);
      double acc = 0.0;
      for (std::size_t m = 0; m <= mstar_; ++m) {
        acc += poisson_[m] * powers_[m](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
        cdf[m] = acc;
      }
    }
  }
}

double UniformizedSite::step_count_pmf(Base x, Base y, std::size_t m) const {
  const double p = P_(x, y);
  if (!(p > 0.0)) throw NumericError("endpoint unreachable at this T");
  if (m <= mstar_) return poisson_[m] * powers_[m](x, y) / p;
  Eigen::MatrixXd power = powers_[mstar_];
  for (std::size_t k = mstar_; k < m; ++k) power = power * chain_.R;
  return std::exp(log_poisson(chain_.gamma_bar * T_, m)) * power(x, y) / p;
}

double UniformizedSite::prob_some_steps(Base x) const {
  const auto& cdf = cdf_[x * a_ + x];
  return (cdf.back() - cdf.front()) / cdf.back();
}

std::size_t UniformizedSite::sample_from_cdf(const std::vector<double>& cdf, double lo,
                                             Rng& rng) const {
  const double target = lo + uniform01(rng) * (cdf.back() - lo);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  return it == cdf.end() ? mstar_ : static_cast<std::size_t>(it - cdf.begin());
}

std::size_t UniformizedSite::sample_step_count(Base x, Base y, Rng& rng) const {
  const auto& cdf = cdf_[x * a_ + y];
  if (!(cdf.back() >= DBL_MIN)) throw NumericError("endpoint unreachable at this T");
  return sample_from_cdf(cdf, 0.0, rng);
}

std::size_t UniformizedSite::sample_step_count_given_some(Base x, Rng& rng) const {
  const auto& cdf = cdf_[x * a_ + x];
  if (!(cdf.back() > cdf.front())) throw NumericError("no mass on paths with steps");
  return std::max<std::size_t>(1, sample_from_cdf(cdf, cdf.front(), rng));
}

void UniformizedSite::sample_path_given_steps(Base x, Base y, std::size_t m, std::size_t site,
                                              Rng& rng, std::vector<Jump>& out) const {
  if (m == 0) return;
  if (m > mstar_) throw std::invalid_argument("step count beyond truncation");
  thread_local std::vector<double> times;
  times.resize(m);
  for (;;) {
    for (auto& t : times) t = uniform01(rng) * T_;
    std::sort(times.begin(), times.end());
    bool ok = times.front() > 0.0 && times.back() < T_;
    for (std::size_t j = 1; ok && j < m; ++j) ok = times[j] > times[j - 1];
    if (ok) break;
  }
  const auto& R = chain_.R;
  Base prev = x;
  for (std::size_t j = 1; j <= m; ++j) {
    const auto& back = powers_[m - j];
    double norm = 0.0;
    for (std::size_t z = 0; z < a_; ++z) norm += R(prev, z) * back(z, y);
    double u = uniform01(rng) * norm;
    Base next = static_cast<Base>(a_ - 1);
    for (std::size_t z = 0; z < a_; ++z) {
      const double w = R(prev, z) * back(z, y);
      if (w <= 0.0) continue;
      next = static_cast<Base>(z);
      if (u < w) break;
      u -= w;
    }
    if (next != prev) out.push_back({times[j - 1], site, next});
    prev = next;
  }
}

namespace {

struct CacheKey {
  std::vector<double> entries;
  double T;
  bool operator==(const CacheKey&) const = default;
};

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const {
    std::uint64_t h = std::bit_cast<std::uint64_t>(k.T) * 0x9E3779B97F4A7C15ull;
    for (double v : k.entries) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

std::shared_ptr<const UniformizedSite> uniformized(const SiteGenerator& g, double T) {
  static std::mutex mutex;
  static std::unordered_map<CacheKey, std::shared_ptr<const UniformizedSite>, CacheKeyHash> cache;
  CacheKey key{std::vector<double>(g.rates().data(), g.rates().data() + g.rates().size()), T};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto tables = std::make_shared<const UniformizedSite>(g, T);
  std::lock_guard lock(mutex);
  return cache.emplace(std::move(key), std::move(tables)).first->second;
}

Eigen::MatrixXd transition_matrix(const SiteGenerator& g, double T) {
  if (!(T >= 0.0)) throw std::invalid_argument("transition_matrix: T must be >= 0");
  return uniformized(g, T)->transition();
}

Eigen::MatrixXd transition_matrix(const SiteGenerator& g, double T, double tail_tol) {
  if (!(T >= 0.0)) throw std::invalid_argument("transition_matrix: T must be >= 0");
  return UniformizedSite(g, T, tail_tol).transition();
}

double ism_marginal_likelihood(const IsmModel& model, const SequencePair& pair, double T) {
  if (!(T >= 0.0)) throw std::invalid_argument("ism_marginal_likelihood: T must be >= 0");
  model.check_length(pair.n());
  std::vector<std::shared_ptr<const UniformizedSite>> tables;
  for (const auto& g : model.distinct_generators()) tables.push_back(uniformized(g, T));
  double logp = 0.0;
  for (std::size_t i = 0; i < pair.n(); ++i) {
    const auto& g = model.generator(i);
    const auto idx = static_cast<std::size_t>(&g - model.distinct_generators().data());
    const double p = tables[idx]->transition(pair.start()[i], pair.end()[i]);
    if (!(p >= DBL_MIN)) throw NumericError("endpoint unreachable at this T");
    logp += std::log(p);
  }
  return logp;
}

double jump_count_pmf(const SiteGenerator& g, Base x, Base y, double T, std::size_t m) {
  if (!(T > 0.0)) throw std::invalid_argument("jump_count_pmf: T must be > 0");
  return uniformized(g, T)->step_count_pmf(x, y, m);
}

Path sample_endpoint_path(const SiteGenerator& g, Base x, Base y, double T, Rng& rng) {
  if (!(T >= 0.0)) throw std::invalid_argument("sample_endpoint_path: T must be >= 0");
  if (T == 0.0) {
    if (x != y) throw NumericError("endpoint unreachable at this T");
    return Path(0.0);
  }
  const auto tables = uniformized(g, T);
  if (!(tables->transition(x, y) >= DBL_MIN)) throw NumericError("endpoint unreachable at this T");
  std::vector<Jump> jumps;
  const std::size_t m = tables->sample_step_count(x, y, rng);
  tables->sample_path_given_steps(x, y, m, 0, rng, jumps);
  return Path(std::move(jumps), T);
}

// ---------------------------------------------------------------------------
// Joint sampling

bool order_jumps(std::vector<Jump>& jumps, double horizon) {
  std::sort(jumps.begin(), jumps.end(), [](const Jump& lhs, const Jump& rhs) {
    return lhs.time != rhs.time ? lhs.time < rhs.time : lhs.site < rhs.site;
  });
  if (!jumps.empty() && !(jumps.front().time > 0.0)) return false;
  for (std::size_t j = 1; j < jumps.size(); ++j) {
    if (jumps[j].time > jumps[j - 1].time) continue;
    if (jumps[j].site == jumps[j - 1].site) return false;
    jumps[j].time = std::nextafter(jumps[j - 1].time, std::numeric_limits<double>::infinity());
  }
  return jumps.empty() || jumps.back().time < horizon;
}

JointPathSampler::JointPathSampler(const IsmModel& model, const SequencePair& pair, double T)
    : T_(T) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and >= 0");
  model.check_length(pair.n());
  if (T == 0.0) {
    if (pair.r() != 0) throw NumericError("endpoint unreachable at this T");
    return;
  }
  for (const auto& g : model.distinct_generators()) tables_.push_back(uniformized(g, T));
  for (std::size_t i = 0; i < pair.n(); ++i) {
    const auto& g = model.generator(i);
    const auto* tables =
        tables_[static_cast<std::size_t>(&g - model.distinct_generators().data())].get();
    const Base x = pair.start()[i];
    const Base y = pair.end()[i];
    if (!(tables->transition(x, y) >= DBL_MIN)) throw NumericError("endpoint unreachable at this T");
    if (x != y) {
      mutated_.push_back({i, tables, x, y, 1.0});
    } else {
      const double q = tables->prob_some_steps(x);
      quiet_.push_back({i, tables, x, y, q});
      q_max_ = std::max(q_max_, q);
    }
  }
  if (q_max_ > 0.0) {
    for (auto& e : quiet_) e.accept /= q_max_;
    log1m_q_max_ = std::log1p(-q_max_);
  }
}

void JointPathSampler::sample(Rng& rng, Path& out, std::vector<Jump>& scratch) const {
  for (;;) {
    scratch.clear();
    for (const auto& e : mutated_) {
      const std::size_t m = e.tables->sample_step_count(e.x, e.y, rng);
      e.tables->sample_path_given_steps(e.x, e.y, m, e.site, rng, scratch);
    }
    if (q_max_ > 0.0) {
      const std::size_t nq = quiet_.size();
      std::size_t idx = 0;
      for (;;) {
        if (q_max_ < 1.0) {
          const double gap = std::floor(std::log(uniform01(rng)) / log1m_q_max_);
          if (gap >= static_cast<double>(nq - idx)) break;
          idx += static_cast<std::size_t>(gap);
        }
        if (idx >= nq) break;
        const auto& e = quiet_[idx];
        if (e.accept >= 1.0 || uniform01(rng) < e.accept) {
          const std::size_t m = e.tables->sample_step_count_given_some(e.x, rng);
          e.tables->sample_path_given_steps(e.x, e.y, m, e.site, rng, scratch);
        }
        ++idx;
      }
    }
    if (order_jumps(scratch, T_)) break;
  }
  out.assign_ordered(scratch, T_);
}

Path JointPathSampler::sample(Rng& rng) const {
  Path out;
  std::vector<Jump> scratch;
  sample(rng, out, scratch);
  return out;
}

Path sample_joint_path(const IsmModel& model, const SequencePair& pair, double T, Rng& rng) {
  return JointPathSampler(model, pair, T).sample(rng);
}

}  // namespace dsmis
