#pragma once

// JSON and CSV output. Numbers are written with 17 significant digits so that
// runs with the same seed produce identical bytes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsmis/bounds.hpp"
#include "dsmis/estimator.hpp"
#include "dsmis/oracle.hpp"

namespace dsmis {

inline constexpr std::string_view kEstimateSchema = "dsmis-estimate/1";

// Shortest round-trip text for finite values; "inf", "-inf", "nan" otherwise.
std::string format_number(double v);
// Sample sizes; the saturated maximum prints as "inf".
std::string format_count(std::uint64_t v);

// wall_time is included only when include_timing is set.
nlohmann::json to_json(const EstimateReport& report, bool include_timing);
nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const AssumptionFlags& flags);
nlohmann::json to_json(const RateExtremes& ex);

// One line per CSV file: "# schema: <name>/<version>".
void write_schema_line(std::ostream& out, std::string_view schema);
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

// n,r,T,lambda,N,seed,log_p_hat,se_rel,cv2,ess,wall_time
std::vector<std::string> estimate_csv_header();
std::vector<std::string> estimate_csv_row(std::size_t n, std::size_t r, double T,
                                          std::optional<double> lambda,
                                          const EstimateReport& report, bool include_timing);

// One row per (r, T, lambda, bound kind).
std::vector<std::string> bound_csv_header();
std::vector<std::string> bound_csv_row(std::optional<double> lambda, const BoundReport& report,
                                       double epsilon);

std::vector<std::string> ordering_csv_header();
void write_ordering_csv(std::ostream& out, const OrderingTable& table);

}  // namespace dsmis
