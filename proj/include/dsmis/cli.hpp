#pragma once

// Command-line front end. Every subcommand reads an optional JSON config
// (--config) whose keys match the long flag names; flags given on the
// command line override the file.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dsmis::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Default worker count: $DSMIS_WORKERS if set and positive, otherwise 1.
std::size_t default_workers();

struct ExperimentGrid {
  std::size_t n = 1600;
  double lambda = 0.5;
  double epsilon = 0.01;
  std::vector<std::size_t> r_values{10, 20, 30, 40, 50, 60, 70, 80};
  // T = multiple * r / n, or absolute values when t_absolute is set.
  std::vector<double> t_values{0.25, 0.5, 0.75, 1.0};
  bool t_absolute = false;
  std::size_t replicates = 100;
  std::size_t N = 10000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  // 20 replicates, r in {10, 20, 40, 80}, T in {r/(4n), r/n}.
  static ExperimentGrid desk();
  void validate() const;
};

struct FigurePoint {
  std::size_t index = 0;
  std::size_t r = 0;
  double t_value = 0.0;  // as given in the grid
  double T = 0.0;
  double l2_bound = 0.0;
  double log_l2_bound = 0.0;
  std::uint64_t n_star_bound = 0;
  double prop4_l2 = 1.0;
  double l2_hat_mean = 1.0;
  double l2_hat_lo = 1.0;
  double l2_hat_hi = 1.0;
  std::uint64_t n_star_hat = 0;
  std::uint64_t n_star_hat_lo = 0;
  std::uint64_t n_star_hat_hi = 0;
  std::string flags;
};

struct FigureRun {
  std::vector<FigurePoint> points;
  // Index of the first point not computed when the time budget ran out.
  std::optional<std::size_t> resume_at;
};

// Points are visited r-major, then T. Replicate j of point i uses seed
// derive_seed(derive_seed(seed, i), j) and runs single-threaded; replicates
// are spread over grid.workers threads. Results do not depend on timing.
FigureRun run_figure(const ExperimentGrid& grid, std::size_t resume_from = 0,
                     std::optional<double> budget_seconds = std::nullopt);

void write_figure_csv(std::ostream& out, const ExperimentGrid& grid, const FigureRun& run);
std::string render_figure_svg(const ExperimentGrid& grid, const FigureRun& run);

}  // namespace dsmis::cli
