#pragma once

// Reference computations used by the tests. None of these call into the
// library's numerical code.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

namespace oracle {

// JC69 with exit rate mu: P(same) = 1/4 + 3/4 e^{-4 mu T / 3}.
inline double jc69_same(double T, double mu = 1.0) {
  return 0.25 + 0.75 * std::exp(-4.0 * mu * T / 3.0);
}
inline double jc69_diff(double T, double mu = 1.0) {
  return 0.25 - 0.25 * std::exp(-4.0 * mu * T / 3.0);
}

// (R^j)_{x,y} for the zero-diagonal JC69 jump chain, from its eigenvalues 1
// and -1/3.
inline double jc69_chain_power(bool same, std::size_t j) {
  const double s = std::pow(-1.0 / 3.0, static_cast<double>(j));
  return same ? 0.25 + 0.75 * s : 0.25 - 0.25 * s;
}

// Jump-count pmf for unit-rate JC69 conditioned on the endpoints.
inline double jc69_jump_pmf(bool same, double T, std::size_t j) {
  const double log_pois = -T + static_cast<double>(j) * std::log(T) - std::lgamma(j + 1.0);
  return std::exp(log_pois) * jc69_chain_power(same, j) / (same ? jc69_same(T) : jc69_diff(T));
}

// Pearson chi-square goodness of fit of integer-valued draws against a pmf.
// Cells with expected count below 5 are pooled with their neighbours; the
// last cell absorbs the upper tail.
template <class Pmf>
double chi_square_p_value(const std::map<std::size_t, std::size_t>& counts, std::size_t total,
                          Pmf pmf) {
  const double N = static_cast<double>(total);
  std::vector<double> expected, observed;
  double e_acc = 0.0, o_acc = 0.0, mass = 0.0;
  std::size_t max_seen = counts.empty() ? 0 : counts.rbegin()->first;
  for (std::size_t m = 0; m <= max_seen + 50; ++m) {
    const double p = pmf(m);
    mass += p;
    e_acc += N * p;
    const auto it = counts.find(m);
    o_acc += it == counts.end() ? 0.0 : static_cast<double>(it->second);
    if (e_acc >= 5.0) {
      expected.push_back(e_acc);
      observed.push_back(o_acc);
      e_acc = o_acc = 0.0;
    }
  }
  e_acc += N * std::max(0.0, 1.0 - mass);
  if (expected.empty()) return 1.0;
  expected.back() += e_acc;
  observed.back() += o_acc;
  if (expected.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i)
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  const boost::math::chi_squared dist(static_cast<double>(expected.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// e^{TQ} by Taylor series with scaling and squaring, in long double.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& Q, double T) {
  using M = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  M A = Q.cast<long double>() * static_cast<long double>(T);
  int squarings = 0;
  long double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.125L) {
    A /= 2.0L;
    norm /= 2.0L;
    ++squarings;
  }
  M result = M::Identity(A.rows(), A.cols());
  M term = result;
  for (int k = 1; k <= 30; ++k) {
    term = term * A / static_cast<long double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result.cast<double>();
}

// Total exit rate of a DNA string under JC69(mu) + CpG(lambda), scanning
// every site and counting the CG pairs it belongs to.
inline double cpg_total_rate(const std::string& seq, double lambda, double mu = 1.0) {
  double total = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    int cg = 0;
    if (i > 0 && seq[i - 1] == 'C' && seq[i] == 'G') ++cg;
    if (i + 1 < seq.size() && seq[i] == 'C' && seq[i + 1] == 'G') ++cg;
    total += mu * std::pow(lambda, cg);
  }
  return total;
}

}  // namespace oracle
