#include "dsmis/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dsmis {

FullGenerator::FullGenerator(const DsmModel& dsm, std::size_t n, std::size_t state_limit)
    : dsm_(dsm), n_(n), a_(dsm.alphabet_size()), dim_(1) {
  dsm.check_length(n);
  for (std::size_t i = 0; i < n; ++i) {
    place_.push_back(dim_);
    if (dim_ > state_limit / a_)
      throw std::invalid_argument("state space too large: " + std::to_string(a_) + "^" +
                                  std::to_string(n) + " exceeds the limit of " +
                                  std::to_string(state_limit));
    dim_ *= a_;
  }
  exit_.resize(static_cast<Eigen::Index>(dim_));
  std::vector<Base> seq;
  for (std::size_t s = 0; s < dim_; ++s) {
    decode(s, seq);
    exit_(static_cast<Eigen::Index>(s)) = total_rate_of<double>(dsm_, seq);
  }
  gamma_bar_ = exit_.maxCoeff();
}

std::size_t FullGenerator::encode(std::span<const Base> seq) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += place_[i] * seq[i];
  return s;
}

void FullGenerator::decode(std::size_t state, std::vector<Base>& seq) const {
  seq.resize(n_);
  for (std::size_t i = 0; i < n_; ++i, state /= a_) seq[i] = static_cast<Base>(state % a_);
}

void FullGenerator::row(std::size_t state, std::vector<std::pair<std::size_t, double>>& out) const {
  out.clear();
  thread_local std::vector<Base> seq;
  decode(state, seq);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t cleared = state - place_[i] * seq[i];
    for (std::size_t b = 0; b < a_; ++b) {
      if (b == seq[i]) continue;
      out.emplace_back(cleared + place_[i] * b, dsm_.site_rate(seq, i, static_cast<Base>(b)));
    }
  }
}

void FullGenerator::step(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  out.resize(in.size());
  for (std::size_t s = 0; s < dim_; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    out(si) = in(si) * (1.0 - exit_(si) / gamma_bar_);
  }
  std::vector<std::pair<std::size_t, double>> nbrs;
  for (std::size_t s = 0; s < dim_; ++s) {
    const double mass = in(static_cast<Eigen::Index>(s));
    if (mass == 0.0) continue;
    row(s, nbrs);
    for (const auto& [t, rate] : nbrs) out(static_cast<Eigen::Index>(t)) += mass * rate / gamma_bar_;
  }
}

double exact_transition_prob(const DsmModel& dsm, const SequencePair& pair, double T,
                             std::size_t state_limit, double tail_tol) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and >= 0");
  const FullGenerator gen(dsm, pair.n(), state_limit);
  if (T == 0.0) return pair.r() == 0 ? 1.0 : 0.0;

  const auto x = static_cast<Eigen::Index>(gen.encode(pair.start().bases()));
  const auto y = static_cast<Eigen::Index>(gen.encode(pair.end().bases()));
  const double mu = gen.uniformization_rate() * T;
  const double log_mu = std::log(mu);
  const double log_tol = std::log(tail_tol);

  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gen.dimension()));
  Eigen::VectorXd next;
  v(x) = 1.0;
  double p = 0.0;
  for (std::size_t m = 0;; ++m) {
    const double dm = static_cast<double>(m);
    p += std::exp(-mu + dm * log_mu - std::lgamma(dm + 1.0)) * v(y);
    // Chernoff bound on P(Poisson(mu) > m).
    const double k = dm + 1.0;
    if (k > mu && -mu + k * (1.0 + log_mu - std::log(k)) < log_tol) break;
    gen.step(v, next);
    v.swap(next);
  }
  return std::clamp(p, 0.0, 1.0);
}

ForwardRun gillespie_forward(const DsmModel& dsm, const Sequence& x, double T, Rng& rng) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and >= 0");
  const std::size_t n = x.size();
  dsm.check_length(n);
  const std::size_t a = dsm.alphabet_size();
  std::vector<Base> state(x.bases().begin(), x.bases().end());
  std::vector<Jump> jumps;
  double total = total_rate_of<double>(dsm, state);
  double t = 0.0;
  for (;;) {
    double next = t - std::log(uniform01(rng)) / total;
    if (!(next < T)) break;
    if (!(next > t)) next = std::nextafter(t, T);
    t = next;

    double u = uniform01(rng) * total;
    Jump jump{t, n - 1, 0};
    bool chosen = false;
    for (std::size_t i = 0; i < n && !chosen; ++i) {
      for (std::size_t b = 0; b < a; ++b) {
        if (b == state[i]) continue;
        const double rate = dsm.site_rate(state, i, static_cast<Base>(b));
        jump = {t, i, static_cast<Base>(b)};
        if (u < rate) {
          chosen = true;
          break;
        }
        u -= rate;
      }
    }
    total += apply_jump_delta<double>(dsm, std::span<Base>(state), jump);
    jumps.push_back(jump);
  }
  return {Path(std::move(jumps), T), Sequence(std::move(state), a)};
}

OrderingTable enumerate_orderings(const DsmModel& dsm, const SequencePair& pair, std::size_t max_r) {
  dsm.check_length(pair.n());
  const std::size_t r = pair.r();
  if (r > max_r)
    throw std::invalid_argument("r = " + std::to_string(r) + " exceeds the enumeration cap " +
                                std::to_string(max_r));
  OrderingTable table;
  std::vector<std::size_t> order = pair.mutated_sites();
  std::vector<Base> state;
  const auto end = pair.end().bases();
  do {
    state.assign(pair.start().bases().begin(), pair.start().bases().end());
    double phi = 1.0;
    for (std::size_t site : order) {
      phi *= dsm.context().at(state, site, end[site]);
      state[site] = end[site];
    }
    table.orders.push_back(order);
    table.phi.push_back(phi);
  } while (std::next_permutation(order.begin(), order.end()));

  const double count = static_cast<double>(table.phi.size());
  double sum_sq = 0.0;
  for (double v : table.phi) {
    table.Z += v;
    sum_sq += v * v;
  }
  table.l2 = count * sum_sq / (table.Z * table.Z);
  table.kl = 0.0;
  for (double v : table.phi) {
    const double p = v / table.Z;
    table.phi_tilde.push_back(p);
    if (p > 0.0) table.kl += p * std::log(p * count);
  }
  return table;
}

}  // namespace dsmis
