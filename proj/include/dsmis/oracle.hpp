#pragma once

// Brute-force references for small instances: the full a^n-state DSM
// generator, exact transition probabilities, forward simulation, and
// exhaustive enumeration of mutation orderings.

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dsmis/dsm.hpp"
#include "dsmis/random.hpp"
#include "dsmis/seqcore.hpp"

namespace dsmis {

inline constexpr std::size_t kDefaultStateLimit = 16384;  // 4^7

// States are sequences encoded as little-endian base-a integers. Rows are
// generated from the DSM on demand; only the exit-rate vector is stored.
class FullGenerator {
 public:
  // Throws std::invalid_argument if a^n exceeds state_limit.
  FullGenerator(const DsmModel& dsm, std::size_t n, std::size_t state_limit = kDefaultStateLimit);

  std::size_t dimension() const { return dim_; }
  std::size_t length() const { return n_; }
  double uniformization_rate() const { return gamma_bar_; }
  double exit_rate(std::size_t state) const { return exit_(static_cast<Eigen::Index>(state)); }

  std::size_t encode(std::span<const Base> seq) const;
  void decode(std::size_t state, std::vector<Base>& seq) const;

  // Off-diagonal entries of one row as (target state, rate).
  void row(std::size_t state, std::vector<std::pair<std::size_t, double>>& out) const;

  // out = in * (I + Q / uniformization_rate()), in and out as row vectors.
  void step(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;

 private:
  const DsmModel& dsm_;
  std::size_t n_;
  std::size_t a_;
  std::size_t dim_;
  std::vector<std::size_t> place_;  // a^i
  Eigen::VectorXd exit_;
  double gamma_bar_ = 0.0;
};

// (e^{T Q~})_{x, y} by uniformization on the full state space, truncated where
// the Poisson tail drops below tail_tol.
double exact_transition_prob(const DsmModel& dsm, const SequencePair& pair, double T,
                             std::size_t state_limit = kDefaultStateLimit,
                             double tail_tol = 1e-13);

struct ForwardRun {
  Path path;
  Sequence end;
};

// Exact forward simulation of the DSM from x over [0, T].
ForwardRun gillespie_forward(const DsmModel& dsm, const Sequence& x, double T, Rng& rng);

struct OrderingTable {
  std::vector<std::vector<std::size_t>> orders;  // permutations of the mutated sites
  std::vector<double> phi;                      // product of multipliers along each order
  std::vector<double> phi_tilde;                // phi / Z
  double Z = 0.0;
  double l2 = 1.0;                              // r! sum phi^2 / Z^2
  double kl = 0.0;                              // KL(phi_tilde || uniform)
};

// Applies the r observed substitutions in every order. Throws
// std::invalid_argument if r > max_r.
OrderingTable enumerate_orderings(const DsmModel& dsm, const SequencePair& pair,
                                  std::size_t max_r = 8);

}  // namespace dsmis
