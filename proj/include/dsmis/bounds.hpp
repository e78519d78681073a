#pragma once

// Sample-size bounds for the importance sampler.
//
// Bounds are carried as logs and exponentiated only on output; anything above
// e^700 is reported as +inf with the log kept. The general bound follows the
// uniform-rate constants (theta, c, c'); the CpG bound evaluates the ISM
// jump-count expectation and p_r exactly from the per-site jump-count pmf.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dsmis/dsm.hpp"
#include "dsmis/estimator.hpp"
#include "dsmis/ism.hpp"

namespace dsmis {

struct RateExtremes {
  double gamma_max = 0.0;
  double gamma_min = 0.0;
  double gamma_star = 1.0;
  double phi_max = 1.0;
  double phi_min = 1.0;
  double phi_star = 1.0;
  double gtilde_max = 0.0;
  double gtilde_min = 0.0;
  double q = 0.0;            // a - 1
  double k = 0.0;
  double delta = 0.0;        // q (gamma_max - gamma_min)
  double delta_tilde = 0.0;  // q (k + 1) (gtilde_max - gtilde_min)
};

RateExtremes rate_extremes(const DsmModel& dsm);

struct AssumptionFlags {
  bool r_exceeds_sqrt_n = false;
  bool t_exceeds_p_distance = false;
  bool degenerate_horizon = false;
  // T / (r / n); +inf when r = 0.
  double t_ratio = 0.0;

  bool any() const { return r_exceeds_sqrt_n || t_exceeds_p_distance || degenerate_horizon; }
  std::vector<std::string> messages() const;
};

// Advisory only: r should stay O(sqrt n) and T O(r / n).
AssumptionFlags assumption_check(std::size_t r, std::size_t n, double T);

struct BoundReport {
  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  std::string kind;
  bool is_chi2 = false;      // value bounds chi^2 = L2 - 1 rather than L2
  double log_value = 0.0;
  double value = 1.0;        // +inf when log_value > 700
  bool overflow = false;

  double theta = kNaN;       // general bound constants
  double c = kNaN;
  double c_prime = kNaN;
  double theta_cg = kNaN;    // CpG bound
  double log_mgf = kNaN;     // log E[theta^{m - r}]
  double log_p_r = kNaN;
  double log_l2_phi = 0.0;   // log L2 of the ordering measure used

  std::size_t r = 0;
  std::size_t n = 0;
  double T = 0.0;
  AssumptionFlags flags;

  // log L2 implied by the report (adds 1 back for chi^2 reports).
  double log_l2() const;
};

// Sample size from a bound: figure uses L2, chi2-delta uses chi^2 = L2 - 1.
std::uint64_t bound_sample_size(const BoundReport& report, double epsilon,
                                SampleSizeConvention convention, double delta = 0.25);

// L2 <= exp(r T c + (n - r) T^2 c') * l2_phi with
//   theta = gamma*^3 phi*^{2(k+1)} phi_max^2 e^{2T(delta~ + 2 delta)}
//   c     = (gmax^2 / gmin) q^2 e^{Tq(gmax - gmin)} [theta e^{Tq theta} + 2 e^{Tq gmax}] + 2(2 delta~ + 5 delta)
//   c'    = gmax^2 q^2 e^{Tq(gmax - gmin)} [theta^2 e^{Tq theta} + 2 e^{Tq gmax}]
BoundReport theorem3_l2_bound(const RateExtremes& ex, std::size_t r, std::size_t n, double T,
                              double l2_phi);

// chi^2 bound: the L2 bound above with l2_phi = phi*^{2r}, minus one.
BoundReport theorem1_chi2_bound(const RateExtremes& ex, std::size_t r, std::size_t n, double T);

// E[theta^m] <= theta^r exp(r T theta c e^{Tq theta} + (n - r) T^2 theta^2 c gmin e^{Tq theta})
// p_r       >= exp(-r T c e^{Tq gmax} - (n - r) T^2 c e^{Tq gmax} gmin)
// with c = (gmax^2 / gmin) q^2 e^{Tq(gmax - gmin)}. theta > 0.
double lemma7_log_mgf_bound(double theta, const RateExtremes& ex, std::size_t r, std::size_t n,
                            double T);
double lemma7_mgf_bound(double theta, const RateExtremes& ex, std::size_t r, std::size_t n,
                        double T);
double lemma7_log_pr_lower(const RateExtremes& ex, std::size_t r, std::size_t n, double T);
double lemma7_pr_lower(const RateExtremes& ex, std::size_t r, std::size_t n, double T);

struct MgfAndPr {
  double log_mgf = 0.0;  // log E[theta^{m - r}]
  double log_p_r = 0.0;  // log P(m = r)
  double mgf() const;
  double p_r() const;
};

// Per-site series sum_j theta^j P(m_i = j) with the uniformized jump-count
// pmf. The generator must have a constant exit rate, so that every
// dominated-chain step is a substitution. Defaults to JC69 with unit rate.
MgfAndPr exact_mgf_and_pr_jc69(double theta, const SequencePair& pair, double T,
                               const IsmModel& ism = IsmModel(SiteGenerator::jc69()));

// log E_i[theta^{m_i}] for one site.
double site_log_mgf(const SiteGenerator& g, Base x, Base y, double T, double theta);

// CpG bound with theta_CG = max(lambda^-2, lambda^2) e^{4T max(1 - lambda, lambda - 1)}:
//   L2 <= e^{8 r T max(1 - lambda, lambda - 1)} E[theta_CG^{m - r}] / p_r^2 * l2_phi
BoundReport prop3_l2_bound(double lambda, const SequencePair& pair, double T, double l2_phi);

// L2 of the ordering measure for r_I islands: [2 (1 + lambda^2) / (1 + lambda)^2]^{r_I}.
double prop4_island_l2(std::size_t r_islands, double lambda);

// KL(ordering measure || uniform) for r_I islands. With p = lambda / (1 + lambda):
//   r_I [p ln 2p + (1 - p) ln 2(1 - p)]
double island_kl(std::size_t r_islands, double lambda);

// x = T (TCAT)^{r_I} T, y = T (TTGT)^{r_I} T.
SequencePair island_sequences(std::size_t r_islands);
// Same, padded on the right with T to length n >= 4 r_I + 2.
SequencePair island_sequences(std::size_t r_islands, std::size_t n);

}  // namespace dsmis
