#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "dsmis/bounds.hpp"
#include "dsmis/cli.hpp"
#include "dsmis/errors.hpp"
#include "dsmis/estimator.hpp"
#include "dsmis/report.hpp"

namespace dsmis::cli {

ExperimentGrid ExperimentGrid::desk() {
  ExperimentGrid grid;
  grid.replicates = 20;
  grid.r_values = {10, 20, 40, 80};
  grid.t_values = {0.25, 1.0};
  return grid;
}

void ExperimentGrid::validate() const {
  if (n == 0 || N == 0 || replicates == 0 || workers == 0)
    throw ConfigError("grid needs positive n, N, replicates and workers");
  if (!(lambda > 0.0)) throw ConfigError("grid lambda must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("grid epsilon must be in (0, 1)");
  if (r_values.empty() || t_values.empty()) throw ConfigError("grid needs r and T values");
  for (std::size_t r : r_values) {
    if (r == 0 || r % 2 != 0) throw ConfigError("grid r values must be even and positive");
    if (2 * r + 2 > n) throw ConfigError("r = " + std::to_string(r) + " islands do not fit in n");
  }
  for (double t : t_values)
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("grid T values must be > 0");
}

namespace {

std::string flag_text(const AssumptionFlags& f) {
  std::string s;
  if (f.r_exceeds_sqrt_n) s += "r>sqrt(n);";
  if (f.t_exceeds_p_distance) s += "T>r/n;";
  if (!s.empty()) s.pop_back();
  return s;
}

std::vector<double> replicate_l2(const DsmModel& dsm, const SequencePair& pair, double T,
                                 const ExperimentGrid& grid, std::uint64_t point_seed) {
  std::vector<double> out(grid.replicates);
  std::vector<std::exception_ptr> errors(grid.replicates);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < grid.replicates;) {
      try {
        RunConfig cfg;
        cfg.N = grid.N;
        cfg.seed = derive_seed(point_seed, j);
        cfg.workers = 1;
        out[j] = estimate(dsm, pair, T, cfg).l2_hat;
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t W = std::min(grid.workers, grid.replicates);
  if (W <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < W; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

FigureRun run_figure(const ExperimentGrid& grid, std::size_t resume_from,
                     std::optional<double> budget_seconds) {
  grid.validate();
  const auto started = std::chrono::steady_clock::now();
  const DsmModel dsm = make_cpg_model({grid.lambda, 1.0});
  FigureRun run;
  std::size_t index = 0;
  for (std::size_t r : grid.r_values) {
    const SequencePair pair = island_sequences(r / 2, grid.n);
    const double l2_phi = prop4_island_l2(r / 2, grid.lambda);
    for (double t : grid.t_values) {
      const std::size_t i = index++;
      if (i < resume_from) continue;
      if (budget_seconds) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (elapsed > *budget_seconds) {
          run.resume_at = i;
          return run;
        }
      }
      FigurePoint p;
      p.index = i;
      p.r = r;
      p.t_value = t;
      p.T = grid.t_absolute ? t : t * static_cast<double>(r) / static_cast<double>(grid.n);
      const BoundReport bound = prop3_l2_bound(grid.lambda, pair, p.T, l2_phi);
      p.l2_bound = bound.value;
      p.log_l2_bound = bound.log_value;
      p.n_star_bound = bound_sample_size(bound, grid.epsilon, SampleSizeConvention::figure);
      p.prop4_l2 = l2_phi;
      p.flags = flag_text(assumption_check(r, grid.n, p.T));

      const auto l2 = replicate_l2(dsm, pair, p.T, grid, derive_seed(grid.seed, i));
      const double R = static_cast<double>(l2.size());
      double mean = 0.0;
      for (double v : l2) mean += v;
      mean /= R;
      double half = 0.0;
      if (l2.size() > 1) {
        double ss = 0.0;
        for (double v : l2) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / (R - 1.0));
        const boost::math::students_t dist(R - 1.0);
        half = boost::math::quantile(dist, 0.975) * sd / std::sqrt(R);
      }
      p.l2_hat_mean = mean;
      p.l2_hat_lo = mean - half;
      p.l2_hat_hi = mean + half;
      const auto nstar = [&](double l2v) {
        return chebychev_sample_size(grid.epsilon, std::max(0.0, l2v), SampleSizeConvention::figure);
      };
      p.n_star_hat = nstar(p.l2_hat_mean);
      p.n_star_hat_lo = nstar(p.l2_hat_lo);
      p.n_star_hat_hi = nstar(p.l2_hat_hi);
      run.points.push_back(p);
    }
  }
  return run;
}

void write_figure_csv(std::ostream& out, const ExperimentGrid& grid, const FigureRun& run) {
  write_schema_line(out, "dsmis-figure/1");
  write_csv_row(out, {"n", "r", "T_value", "T", "lambda", "epsilon", "N", "replicates",
                      "l2_bound", "log_l2_bound", "n_star_bound", "prop4_l2", "l2_hat_mean",
                      "l2_hat_ci_lo", "l2_hat_ci_hi", "n_star_hat", "n_star_hat_ci_lo",
                      "n_star_hat_ci_hi", "flags"});
  for (const auto& p : run.points) {
    write_csv_row(out, {std::to_string(grid.n), std::to_string(p.r), format_number(p.t_value),
                        format_number(p.T), format_number(grid.lambda),
                        format_number(grid.epsilon), std::to_string(grid.N),
                        std::to_string(grid.replicates), format_number(p.l2_bound),
                        format_number(p.log_l2_bound), format_count(p.n_star_bound),
                        format_number(p.prop4_l2), format_number(p.l2_hat_mean),
                        format_number(p.l2_hat_lo), format_number(p.l2_hat_hi),
                        format_count(p.n_star_hat), format_count(p.n_star_hat_lo),
                        format_count(p.n_star_hat_hi), p.flags});
  }
  if (run.resume_at) out << "# resume: " << *run.resume_at << '\n';
}

}  // namespace dsmis::cli
