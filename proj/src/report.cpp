#include "dsmis/report.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace dsmis {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_count(std::uint64_t v) {
  if (v == std::numeric_limits<std::uint64_t>::max()) return "inf";
  return std::to_string(v);
}

namespace {

// JSON has no infinities; they are written as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

}  // namespace

json to_json(const EstimateReport& r, bool include_timing) {
  json j;
  j["schema"] = std::string(kEstimateSchema);
  j["log_p_hat"] = number(r.log_p_hat);
  j["p_hat"] = number(std::exp(r.log_p_hat));
  j["log_p_ism"] = number(r.log_p_ism);
  j["mean_log_w"] = number(r.mean_log_w);
  j["log_mean_w"] = number(r.log_mean_w);
  j["cv2"] = number(r.cv2);
  j["ess"] = number(r.ess);
  j["se_rel"] = number(r.se_rel);
  j["l2_hat"] = number(r.l2_hat);
  j["l2_se"] = number(r.l2_se);
  j["mean_m"] = number(r.mean_m);
  j["N"] = r.N;
  j["seed"] = r.seed;
  j["workers"] = r.workers;
  if (include_timing) j["wall_time"] = r.wall_time;
  if (!r.batch_log_p_hat.empty()) {
    j["batches"] = json::array();
    for (std::size_t b = 0; b < r.batch_log_p_hat.size(); ++b)
      j["batches"].push_back({{"seed", r.batch_seeds[b]}, {"log_p_hat", number(r.batch_log_p_hat[b])}});
  }
  return j;
}

json to_json(const AssumptionFlags& f) {
  json j;
  j["r_exceeds_sqrt_n"] = f.r_exceeds_sqrt_n;
  j["t_exceeds_p_distance"] = f.t_exceeds_p_distance;
  j["degenerate_horizon"] = f.degenerate_horizon;
  j["t_ratio"] = number(f.t_ratio);
  return j;
}

json to_json(const RateExtremes& ex) {
  return {{"gamma_max", ex.gamma_max},   {"gamma_min", ex.gamma_min},
          {"gamma_star", ex.gamma_star}, {"phi_max", ex.phi_max},
          {"phi_min", ex.phi_min},       {"phi_star", ex.phi_star},
          {"gtilde_max", ex.gtilde_max}, {"gtilde_min", ex.gtilde_min},
          {"q", ex.q},                   {"k", ex.k},
          {"delta", ex.delta},           {"delta_tilde", ex.delta_tilde}};
}

json to_json(const BoundReport& b) {
  json j;
  j["kind"] = b.kind;
  j["measure"] = b.is_chi2 ? "chi2" : "l2";
  j["value"] = number(b.value);
  j["log_value"] = number(b.log_value);
  j["overflow"] = b.overflow;
  j["r"] = b.r;
  j["n"] = b.n;
  j["T"] = b.T;
  j["log_l2_phi"] = number(b.log_l2_phi);
  json constants = json::object();
  auto put = [&](const char* key, double v) {
    if (!std::isnan(v)) constants[key] = number(v);
  };
  put("theta", b.theta);
  put("c", b.c);
  put("c_prime", b.c_prime);
  put("theta_cg", b.theta_cg);
  put("log_mgf", b.log_mgf);
  if (!std::isnan(b.log_mgf)) put("mgf", std::exp(b.log_mgf));
  put("log_p_r", b.log_p_r);
  if (!std::isnan(b.log_p_r)) put("p_r", std::exp(b.log_p_r));
  j["constants"] = constants;
  j["assumptions"] = to_json(b.flags);
  return j;
}

void write_schema_line(std::ostream& out, std::string_view schema) {
  out << "# schema: " << schema << '\n';
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> estimate_csv_header() {
  return {"n", "r", "T", "lambda", "N", "seed", "log_p_hat", "se_rel", "cv2", "ess", "wall_time"};
}

std::vector<std::string> estimate_csv_row(std::size_t n, std::size_t r, double T,
                                          std::optional<double> lambda,
                                          const EstimateReport& report, bool include_timing) {
  return {std::to_string(n),
          std::to_string(r),
          format_number(T),
          lambda ? format_number(*lambda) : std::string(),
          std::to_string(report.N),
          std::to_string(report.seed),
          format_number(report.log_p_hat),
          format_number(report.se_rel),
          format_number(report.cv2),
          format_number(report.ess),
          include_timing ? format_number(report.wall_time) : std::string()};
}

std::vector<std::string> bound_csv_header() {
  return {"n", "r", "T", "lambda", "bound_kind", "measure", "value", "log_value", "n_star",
          "flags"};
}

std::vector<std::string> bound_csv_row(std::optional<double> lambda, const BoundReport& report,
                                       double epsilon) {
  std::string flags;
  if (report.flags.r_exceeds_sqrt_n) flags += "r>sqrt(n);";
  if (report.flags.t_exceeds_p_distance) flags += "T>r/n;";
  if (report.flags.degenerate_horizon) flags += "T<=0;";
  if (!flags.empty()) flags.pop_back();
  return {std::to_string(report.n),
          std::to_string(report.r),
          format_number(report.T),
          lambda ? format_number(*lambda) : std::string(),
          report.kind,
          report.is_chi2 ? "chi2" : "l2",
          format_number(report.value),
          format_number(report.log_value),
          format_count(bound_sample_size(report, epsilon, SampleSizeConvention::figure)),
          flags};
}

std::vector<std::string> ordering_csv_header() { return {"order", "phi", "phi_tilde"}; }

void write_ordering_csv(std::ostream& out, const OrderingTable& table) {
  write_schema_line(out, "dsmis-orderings/1");
  write_csv_row(out, ordering_csv_header());
  for (std::size_t i = 0; i < table.orders.size(); ++i) {
    std::string order;
    for (std::size_t s : table.orders[i]) {
      if (!order.empty()) order += ' ';
      order += std::to_string(s + 1);
    }
    write_csv_row(out, {order, format_number(table.phi[i]), format_number(table.phi_tilde[i])});
  }
}

}  // namespace dsmis
