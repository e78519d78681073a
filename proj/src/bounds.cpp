#include "dsmis/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace dsmis {

namespace {

constexpr double kOverflowLog = 700.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  if (a == kInf || b == kInf) return kInf;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// x * y for a possibly infinite y where x = 0 should win.
double scaled(double x, double y) { return x == 0.0 ? 0.0 : x * y; }

void set_l2(BoundReport& report, double log_l2) {
  report.is_chi2 = false;
  report.log_value = log_l2;
  report.overflow = !(log_l2 <= kOverflowLog);
  report.value = report.overflow ? kInf : std::exp(log_l2);
}

void set_chi2_from_l2(BoundReport& report, double log_l2) {
  report.is_chi2 = true;
  report.overflow = !(log_l2 <= kOverflowLog);
  if (report.overflow) {
    report.log_value = log_l2;
    report.value = kInf;
  } else {
    report.value = std::max(0.0, std::expm1(log_l2));
    report.log_value = std::log(report.value);
  }
}

void check_rnT(std::size_t r, std::size_t n, double T) {
  if (r > n) throw std::invalid_argument("r must not exceed n");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and > 0");
}

std::size_t poisson_cutoff(double mu, double tol) {
  if (mu <= 0.0) return 0;
  const double log_tol = std::log(tol);
  auto k = static_cast<std::size_t>(std::floor(mu)) + 1;
  while (-mu + static_cast<double>(k) * (1.0 + std::log(mu) - std::log(static_cast<double>(k))) >=
         log_tol)
    ++k;
  return k;
}

struct SiteSeries {
  double log_mgf = 0.0;
  double log_p0 = -kInf;
  double log_p1 = -kInf;
};

SiteSeries site_series(const SiteGenerator& g, Base x, Base y, double T, double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
  if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
  if (!g.constant_exit_rate())
    throw std::invalid_argument("exact jump-count series needs a constant exit rate");
  const JumpChain chain = make_jump_chain(g);
  const double mu = chain.gamma_bar * T;
  const double log_mu = std::log(mu);
  const double log_theta = std::log(theta);
  const std::size_t cutoff =
      std::max(poisson_cutoff(mu, 1e-17), poisson_cutoff(mu * theta, 1e-17)) + 1;

  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(chain.R.rows(), chain.R.cols());
  double lse_theta = -kInf;
  double lse_one = -kInf;
  std::vector<double> base_terms;
  for (std::size_t m = 0; m <= cutoff; ++m) {
    if (m > 0) power = power * chain.R;
    const double entry = power(x, y);
    double term = -kInf;
    if (entry > 0.0) {
      const double dm = static_cast<double>(m);
      term = -mu + dm * log_mu - std::lgamma(dm + 1.0) + std::log(entry);
    }
    base_terms.push_back(term);
    lse_one = log_add(lse_one, term);
    if (term != -kInf) lse_theta = log_add(lse_theta, term + static_cast<double>(m) * log_theta);
  }
  SiteSeries out;
  out.log_mgf = lse_theta - lse_one;
  out.log_p0 = base_terms[0] - lse_one;
  out.log_p1 = base_terms.size() > 1 ? base_terms[1] - lse_one : -kInf;
  return out;
}

}  // namespace

RateExtremes rate_extremes(const DsmModel& dsm) {
  RateExtremes ex;
  ex.gamma_max = dsm.ism().gamma_max();
  ex.gamma_min = dsm.ism().gamma_min();
  ex.gamma_star = ex.gamma_max / ex.gamma_min;
  ex.phi_max = dsm.context().phi_max();
  ex.phi_min = dsm.context().phi_min();
  ex.phi_star = dsm.context().phi_star();
  ex.gtilde_max = ex.gamma_max * ex.phi_max;
  ex.gtilde_min = ex.gamma_min * ex.phi_min;
  ex.q = static_cast<double>(dsm.alphabet_size() - 1);
  ex.k = static_cast<double>(dsm.context().k());
  ex.delta = ex.q * (ex.gamma_max - ex.gamma_min);
  ex.delta_tilde = ex.q * (ex.k + 1.0) * (ex.gtilde_max - ex.gtilde_min);
  return ex;
}

std::vector<std::string> AssumptionFlags::messages() const {
  std::vector<std::string> out;
  if (degenerate_horizon) out.emplace_back("degenerate horizon: T <= 0");
  if (r_exceeds_sqrt_n) out.emplace_back("r exceeds sqrt(n)");
  if (t_exceeds_p_distance) {
    std::ostringstream msg;
    msg << "T exceeds r/n (ratio " << t_ratio << ")";
    out.push_back(msg.str());
  }
  return out;
}

AssumptionFlags assumption_check(std::size_t r, std::size_t n, double T) {
  AssumptionFlags flags;
  flags.degenerate_horizon = !(T > 0.0);
  flags.r_exceeds_sqrt_n = static_cast<double>(r) * static_cast<double>(r) > static_cast<double>(n);
  const double p_distance = n ? static_cast<double>(r) / static_cast<double>(n) : 0.0;
  flags.t_ratio = p_distance > 0.0 ? T / p_distance : kInf;
  flags.t_exceeds_p_distance = T > p_distance * (1.0 + 1e-12) && T > 0.0;
  return flags;
}

double BoundReport::log_l2() const {
  if (!is_chi2) return log_value;
  return overflow ? log_value : std::log1p(value);
}

std::uint64_t bound_sample_size(const BoundReport& report, double epsilon,
                                SampleSizeConvention convention, double delta) {
  const double log_l2 = report.log_l2();
  if (!(log_l2 <= kOverflowLog)) return std::numeric_limits<std::uint64_t>::max();
  const double measure = convention == SampleSizeConvention::figure
                             ? std::exp(log_l2)
                             : (report.is_chi2 ? report.value : std::max(0.0, std::expm1(log_l2)));
  return chebychev_sample_size(epsilon, measure, convention, delta);
}

BoundReport theorem3_l2_bound(const RateExtremes& ex, std::size_t r, std::size_t n, double T,
                              double l2_phi) {
  check_rnT(r, n, T);
  if (!(l2_phi >= 1.0 - 1e-12)) throw std::invalid_argument("l2_phi must be >= 1");
  const double q = ex.q;
  const double log_theta = 3.0 * std::log(ex.gamma_star) +
                           2.0 * (ex.k + 1.0) * std::log(ex.phi_star) + 2.0 * std::log(ex.phi_max) +
                           2.0 * T * (ex.delta_tilde + 2.0 * ex.delta);
  const double theta = std::exp(log_theta);
  const double spread = T * q * (ex.gamma_max - ex.gamma_min);
  const double tail = std::log(2.0) + T * q * ex.gamma_max;

  const double log_c_main = std::log(ex.gamma_max * ex.gamma_max / ex.gamma_min * q * q) + spread +
                            log_add(log_theta + T * q * theta, tail);
  const double c = std::exp(log_c_main) + 2.0 * (2.0 * ex.delta_tilde + 5.0 * ex.delta);
  const double log_c_prime = std::log(ex.gamma_max * ex.gamma_max * q * q) + spread +
                             log_add(2.0 * log_theta + T * q * theta, tail);
  const double c_prime = std::exp(log_c_prime);

  const double rd = static_cast<double>(r);
  const double rest = static_cast<double>(n - r);
  BoundReport report;
  report.kind = "theorem3-l2";
  report.theta = theta;
  report.c = c;
  report.c_prime = c_prime;
  report.log_l2_phi = std::log(l2_phi);
  report.r = r;
  report.n = n;
  report.T = T;
  report.flags = assumption_check(r, n, T);
  set_l2(report, scaled(rd * T, c) + scaled(rest * T * T, c_prime) + report.log_l2_phi);
  return report;
}

BoundReport theorem1_chi2_bound(const RateExtremes& ex, std::size_t r, std::size_t n, double T) {
  const double log_l2_phi = 2.0 * static_cast<double>(r) * std::log(ex.phi_star);
  BoundReport report = theorem3_l2_bound(ex, r, n, T, 1.0);
  const double log_l2 = report.log_value + log_l2_phi;
  report.kind = "theorem1-chi2";
  report.log_l2_phi = log_l2_phi;
  set_chi2_from_l2(report, log_l2);
  return report;
}

namespace {

double lemma7_c(const RateExtremes& ex, double T) {
  return ex.gamma_max * ex.gamma_max / ex.gamma_min * ex.q * ex.q *
         std::exp(T * ex.q * (ex.gamma_max - ex.gamma_min));
}

}  // namespace

double lemma7_log_mgf_bound(double theta, const RateExtremes& ex, std::size_t r, std::size_t n,
                            double T) {
  check_rnT(r, n, T);
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
  const double c = lemma7_c(ex, T);
  const double grow = std::exp(T * ex.q * theta);
  const double rd = static_cast<double>(r);
  const double rest = static_cast<double>(n - r);
  return rd * std::log(theta) + scaled(rd * T * theta * c, grow) +
         scaled(rest * T * T * theta * theta * c * ex.gamma_min, grow);
}

double lemma7_mgf_bound(double theta, const RateExtremes& ex, std::size_t r, std::size_t n,
                        double T) {
  return std::exp(lemma7_log_mgf_bound(theta, ex, r, n, T));
}

double lemma7_log_pr_lower(const RateExtremes& ex, std::size_t r, std::size_t n, double T) {
  check_rnT(r, n, T);
  const double c = lemma7_c(ex, T);
  const double grow = std::exp(T * ex.q * ex.gamma_max);
  const double rd = static_cast<double>(r);
  const double rest = static_cast<double>(n - r);
  return -rd * T * c * grow - rest * T * T * c * grow * ex.gamma_min;
}

double lemma7_pr_lower(const RateExtremes& ex, std::size_t r, std::size_t n, double T) {
  return std::exp(lemma7_log_pr_lower(ex, r, n, T));
}

double MgfAndPr::mgf() const { return std::exp(log_mgf); }
double MgfAndPr::p_r() const { return std::exp(log_p_r); }

double site_log_mgf(const SiteGenerator& g, Base x, Base y, double T, double theta) {
  return site_series(g, x, y, T, theta).log_mgf;
}

MgfAndPr exact_mgf_and_pr_jc69(double theta, const SequencePair& pair, double T,
                               const IsmModel& ism) {
  ism.check_length(pair.n());
  if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
  // Sites with the same generator and endpoints contribute identical factors.
  std::map<std::tuple<const SiteGenerator*, Base, Base>, std::size_t> groups;
  for (std::size_t i = 0; i < pair.n(); ++i)
    ++groups[{&ism.generator(i), pair.start()[i], pair.end()[i]}];

  MgfAndPr out;
  for (const auto& [key, count] : groups) {
    const auto& [g, x, y] = key;
    const SiteSeries s = site_series(*g, x, y, T, theta);
    const double weight = static_cast<double>(count);
    out.log_mgf += weight * s.log_mgf;
    out.log_p_r += weight * (x == y ? s.log_p0 : s.log_p1);
  }
  out.log_mgf -= static_cast<double>(pair.r()) * std::log(theta);
  return out;
}

BoundReport prop3_l2_bound(double lambda, const SequencePair& pair, double T, double l2_phi) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  check_rnT(pair.r(), pair.n(), T);
  const double spread = std::abs(1.0 - lambda);
  const double log_theta_cg = 2.0 * std::abs(std::log(lambda)) + 4.0 * T * spread;
  const MgfAndPr exact = exact_mgf_and_pr_jc69(std::exp(log_theta_cg), pair, T);

  BoundReport report;
  report.kind = "prop3-l2";
  report.theta_cg = std::exp(log_theta_cg);
  report.log_mgf = exact.log_mgf;
  report.log_p_r = exact.log_p_r;
  report.log_l2_phi = std::log(l2_phi);
  report.r = pair.r();
  report.n = pair.n();
  report.T = T;
  report.flags = assumption_check(pair.r(), pair.n(), T);
  set_l2(report, 8.0 * static_cast<double>(pair.r()) * T * spread + exact.log_mgf -
                     2.0 * exact.log_p_r + report.log_l2_phi);
  return report;
}

double prop4_island_l2(std::size_t r_islands, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  const double per_island = 2.0 * (1.0 + lambda * lambda) / ((1.0 + lambda) * (1.0 + lambda));
  return std::pow(per_island, static_cast<double>(r_islands));
}

double island_kl(std::size_t r_islands, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  const double p = lambda / (1.0 + lambda);
  return static_cast<double>(r_islands) *
         (p * std::log(2.0 * p) + (1.0 - p) * std::log(2.0 * (1.0 - p)));
}

SequencePair island_sequences(std::size_t r_islands) {
  return island_sequences(r_islands, 4 * r_islands + 2);
}

SequencePair island_sequences(std::size_t r_islands, std::size_t n) {
  if (r_islands == 0) throw std::invalid_argument("need at least one island");
  if (n < 4 * r_islands + 2)
    throw std::invalid_argument("length " + std::to_string(n) + " cannot hold " +
                                std::to_string(r_islands) + " islands");
  std::string x = "T";
  std::string y = "T";
  for (std::size_t i = 0; i < r_islands; ++i) {
    x += "TCAT";
    y += "TTGT";
  }
  x.append(n - x.size(), 'T');
  y.append(n - y.size(), 'T');
  return SequencePair(Sequence::parse(x), Sequence::parse(y));
}

}  // namespace dsmis
