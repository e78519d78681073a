#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsmis/bounds.hpp"
#include "dsmis/cli.hpp"
#include "dsmis/config.hpp"
#include "dsmis/errors.hpp"
#include "dsmis/estimator.hpp"
#include "dsmis/oracle.hpp"
#include "dsmis/report.hpp"

namespace dsmis::cli {

using nlohmann::json;

std::size_t default_workers() {
  if (const char* env = std::getenv("DSMIS_WORKERS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

namespace {

enum class Kind { number, integer, text, number_list, integer_list, text_list, flag };

// Flags are collected as text and folded into the JSON document read from
// --config, so that both sources go through the same typed accessors.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON config; flags override its keys");
  }

  void add(const std::string& flag, const std::string& key, Kind kind, const std::string& help) {
    kinds_[key] = kind;
    if (kind == Kind::flag) {
      app_->add_flag("--" + flag, flags_[key], help);
    } else if (kind == Kind::number_list || kind == Kind::integer_list || kind == Kind::text_list) {
      app_->add_option("--" + flag, lists_[key], help)->delimiter(',');
    } else {
      app_->add_option("--" + flag, scalars_[key], help);
    }
  }

  json document() const {
    json doc = config_path_.empty() ? json::object() : read_json_file(config_path_);
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, kind] : kinds_) {
      const auto* opt = app_->get_option_no_throw("--" + flag_name(key));
      if (!opt || opt->count() == 0) continue;
      switch (kind) {
        case Kind::flag: doc[key] = flags_.at(key); break;
        case Kind::number: doc[key] = to_number(key, scalars_.at(key)); break;
        case Kind::integer: doc[key] = to_integer(key, scalars_.at(key)); break;
        case Kind::text: doc[key] = scalars_.at(key); break;
        case Kind::number_list:
        case Kind::integer_list:
        case Kind::text_list: {
          json arr = json::array();
          for (const auto& s : lists_.at(key)) {
            if (kind == Kind::number_list) arr.push_back(to_number(key, s));
            else if (kind == Kind::integer_list) arr.push_back(to_integer(key, s));
            else arr.push_back(s);
          }
          doc[key] = arr;
          break;
        }
      }
    }
    return doc;
  }

  void rename(const std::string& key, const std::string& flag) { names_[key] = flag; }

 private:
  std::string flag_name(const std::string& key) const {
    const auto it = names_.find(key);
    return it == names_.end() ? key : it->second;
  }
  static double to_number(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("--" + key + ": '" + text + "' is not a number");
  }
  static std::uint64_t to_integer(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      if (!text.empty() && text[0] != '-') {
        const auto v = std::stoull(text, &used);
        if (used == text.size()) return v;
      }
    } catch (const std::exception&) {
    }
    throw ConfigError("--" + key + ": '" + text + "' is not a non-negative integer");
  }

  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, Kind> kinds_;
  std::map<std::string, std::string> names_;
  std::map<std::string, std::string> scalars_;
  std::map<std::string, std::vector<std::string>> lists_;
  std::map<std::string, bool> flags_;
};

void add(Options& o, const std::string& flag, Kind kind, const std::string& help,
         const std::string& key = "") {
  const std::string k = key.empty() ? flag : key;
  if (k != flag) o.rename(k, flag);
  o.add(flag, k, kind, help);
}

double need_number(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ConfigError("missing required option --" + key);
  if (!doc[key].is_number()) throw ConfigError("'" + key + "' must be a number");
  return doc[key].get<double>();
}

double get_number(const json& doc, const std::string& key, double fallback) {
  return doc.contains(key) ? need_number(doc, key) : fallback;
}

std::uint64_t get_integer(const json& doc, const std::string& key, std::uint64_t fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc[key].is_number_unsigned() && !(doc[key].is_number_integer() && doc[key].get<long long>() >= 0))
    throw ConfigError("'" + key + "' must be a non-negative integer");
  return doc[key].get<std::uint64_t>();
}

bool get_flag(const json& doc, const std::string& key) {
  if (!doc.contains(key)) return false;
  if (!doc[key].is_boolean()) throw ConfigError("'" + key + "' must be true or false");
  return doc[key].get<bool>();
}

std::string get_text(const json& doc, const std::string& key, const std::string& fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc[key].is_string()) throw ConfigError("'" + key + "' must be a string");
  return doc[key].get<std::string>();
}

template <class T>
std::vector<T> get_list(const json& doc, const std::string& key, std::vector<T> fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc[key];
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const json::exception&) {
    throw ConfigError("'" + key + "' has the wrong type");
  }
}

void add_model_options(Options& o) {
  add(o, "model", Kind::text, "jc69+cpg | table | independent");
  add(o, "lambda", Kind::number, "CpG multiplier");
  add(o, "base-rate", Kind::number, "JC69 exit rate of the CpG model", "base_rate");
  add(o, "alphabet", Kind::text, "alphabet symbols (default ACGT)");
}

void add_pair_options(Options& o) {
  add(o, "x", Kind::text, "start sequence");
  add(o, "y", Kind::text, "end sequence");
  add(o, "fasta", Kind::text, "two-record FASTA file with x and y");
}

SequencePair load_pair(const json& doc, const Alphabet& alphabet) {
  if (doc.contains("fasta")) {
    const std::string path = get_text(doc, "fasta", "");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse_fasta_pair(in, alphabet);
  }
  if (!doc.contains("x") || !doc.contains("y"))
    throw ConfigError("give the sequences with --x and --y or --fasta");
  return SequencePair(Sequence::parse(get_text(doc, "x", ""), alphabet),
                      Sequence::parse(get_text(doc, "y", ""), alphabet));
}

RunConfig load_run(const json& doc) {
  RunConfig cfg;
  cfg.N = get_integer(doc, "N", 10000);
  cfg.seed = get_integer(doc, "seed", 1);
  cfg.workers = get_integer(doc, "workers", default_workers());
  if (cfg.N == 0) throw ConfigError("N must be at least 1");
  if (cfg.workers == 0) throw ConfigError("workers must be at least 1");
  if (doc.contains("epsilon")) cfg.epsilon = need_number(doc, "epsilon");
  if (doc.contains("delta")) cfg.delta = need_number(doc, "delta");
  return cfg;
}

// Writes to --out when given, otherwise to `out`.
void emit(const json& doc, const std::string& text, std::ostream& out) {
  const std::string path = get_text(doc, "out", "");
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write '" + path + "'");
  file << text;
}

json number_or_text(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

json count_json(std::uint64_t v) {
  if (v == std::numeric_limits<std::uint64_t>::max()) return "inf";
  return v;
}


int do_estimate(const json& doc, std::ostream& out) {
  const LoadedModel model = model_from_json(doc);
  const SequencePair pair = load_pair(doc, model.alphabet);
  const double T = need_number(doc, "T");
  const RunConfig cfg = load_run(doc);
  const bool timing = get_flag(doc, "timing");
  const EstimateReport report = cfg.delta ? median_of_estimates(model.dsm, pair, T, cfg, *cfg.delta)
                                          : estimate(model.dsm, pair, T, cfg);
  std::ostringstream text;
  if (get_text(doc, "format", "json") == "csv") {
    write_schema_line(text, "dsmis-estimate-rows/1");
    write_csv_row(text, estimate_csv_header());
    write_csv_row(text, estimate_csv_row(pair.n(), pair.r(), T, model.lambda, report, timing));
  } else {
    json j = to_json(report, timing);
    j["n"] = pair.n();
    j["r"] = pair.r();
    j["T"] = T;
    j["model"] = model.kind;
    if (model.lambda) j["lambda"] = *model.lambda;
    if (cfg.epsilon) {
      j["n_star_figure"] = chebychev_sample_size(*cfg.epsilon, report.l2_hat);
    }
    text << j.dump(2) << '\n';
  }
  emit(doc, text.str(), out);
  return kExitOk;
}

int do_bound(const json& doc, std::ostream& out) {
  const double epsilon = get_number(doc, "epsilon", 0.01);
  std::vector<double> lambdas = get_list<double>(doc, "lambda", {});
  if (lambdas.empty()) lambdas.push_back(1.0);
  const auto islands = get_integer(doc, "r_islands", 0);
  std::vector<std::string> kinds =
      get_list<std::string>(doc, "kind", {"prop3", "theorem1", "theorem3"});
  for (const auto& k : kinds)
    if (k != "prop3" && k != "theorem1" && k != "theorem3")
      throw ConfigError("unknown bound kind '" + k + "' (expected prop3, theorem1, theorem3)");

  json rows = json::array();
  std::ostringstream csv;
  write_schema_line(csv, "dsmis-bounds/1");
  write_csv_row(csv, bound_csv_header());

  for (double lambda : lambdas) {
    json model_doc = doc;
    model_doc["lambda"] = lambda;
    const LoadedModel model = model_from_json(model_doc);
    const SequencePair pair =
        islands ? island_sequences(islands, get_integer(doc, "n", 4 * islands + 2))
                : load_pair(doc, model.alphabet);
    const std::size_t r = pair.r(), n = pair.n();
    std::vector<double> times = get_list<double>(doc, "T", {});
    for (double mult : get_list<double>(doc, "t_mult", {}))
      times.push_back(mult * static_cast<double>(r) / static_cast<double>(n));
    if (times.empty()) throw ConfigError("missing required option --T (or --t-mult)");

    const RateExtremes ex = rate_extremes(model.dsm);
    const double l2_phi = islands ? prop4_island_l2(islands, lambda)
                                  : std::pow(ex.phi_star, 2.0 * static_cast<double>(r));
    for (double T : times) {
      for (const auto& kind : kinds) {
        BoundReport b;
        if (kind == "prop3") {
          if (model.kind != "jc69+cpg") continue;
          b = prop3_l2_bound(lambda, pair, T, l2_phi);
        } else if (kind == "theorem1") {
          b = theorem1_chi2_bound(ex, r, n, T);
        } else {
          b = theorem3_l2_bound(ex, r, n, T, l2_phi);
        }
        write_csv_row(csv, bound_csv_row(model.lambda, b, epsilon));
        json j = to_json(b);
        if (model.lambda) j["lambda"] = *model.lambda;
        j["n_star_figure"] = count_json(bound_sample_size(b, epsilon, SampleSizeConvention::figure));
        j["n_star_chi2_delta"] =
            count_json(bound_sample_size(b, epsilon, SampleSizeConvention::chi2_delta));
        j["rate_extremes"] = to_json(ex);
        rows.push_back(j);
      }
    }
  }
  emit(doc, get_flag(doc, "json") ? rows.dump(2) + "\n" : csv.str(), out);
  return kExitOk;
}

int do_island(const json& doc, std::ostream& out) {
  const auto islands = get_integer(doc, "r_islands", 1);
  if (islands == 0) throw ConfigError("r-islands must be at least 1");
  const double lambda = get_number(doc, "lambda", 0.5);
  const std::size_t n = get_integer(doc, "n", 4 * islands + 2);
  const SequencePair pair = island_sequences(islands, n);
  const std::size_t r = pair.r();
  double T = 0.0;
  if (doc.contains("T")) T = need_number(doc, "T");
  else if (doc.contains("t_mult")) T = need_number(doc, "t_mult") * r / static_cast<double>(n);
  else throw ConfigError("missing required option --T (or --t-mult)");
  const RunConfig cfg = load_run(doc);
  const std::size_t limit = get_integer(doc, "state_limit", kDefaultStateLimit);

  const DsmModel dsm = make_cpg_model({lambda, 1.0});
  const EstimateReport est = estimate(dsm, pair, T, cfg);
  const double prop4 = prop4_island_l2(islands, lambda);
  const BoundReport prop3 = prop3_l2_bound(lambda, pair, T, prop4);
  const BoundReport thm1 = theorem1_chi2_bound(rate_extremes(dsm), r, n, T);

  double states = 1.0;
  for (std::size_t i = 0; i < n; ++i) states *= 4.0;
  std::optional<double> p_oracle;
  std::string oracle_status = "skipped: state space 4^" + std::to_string(n) + " exceeds limit";
  if (states <= static_cast<double>(limit)) {
    p_oracle = exact_transition_prob(dsm, pair, T, limit);
    oracle_status = "exact";
  }

  const double p_hat = std::exp(est.log_p_hat);
  if (get_text(doc, "format", "json") == "csv") {
    std::ostringstream text;
    write_schema_line(text, "dsmis-island/1");
    write_csv_row(text, {"r_islands", "n", "r", "T", "lambda", "N", "seed", "p_hat", "se_rel",
                         "l2_hat", "p_oracle", "oracle_status", "prop4_l2", "prop3_l2",
                         "theorem1_chi2", "island_kl"});
    write_csv_row(text, {std::to_string(islands), std::to_string(n), std::to_string(r),
                         format_number(T), format_number(lambda), std::to_string(est.N),
                         std::to_string(est.seed), format_number(p_hat), format_number(est.se_rel),
                         format_number(est.l2_hat), p_oracle ? format_number(*p_oracle) : "",
                         oracle_status, format_number(prop4), format_number(prop3.value),
                         format_number(thm1.value), format_number(island_kl(islands, lambda))});
    emit(doc, text.str(), out);
    return kExitOk;
  }
  json j;
  j["r_islands"] = islands;
  j["n"] = n;
  j["r"] = r;
  j["T"] = T;
  j["lambda"] = lambda;
  j["estimate"] = to_json(est, get_flag(doc, "timing"));
  j["p_hat"] = p_hat;
  j["p_oracle"] = p_oracle ? json(*p_oracle) : json(nullptr);
  j["oracle_status"] = oracle_status;
  if (p_oracle) j["relative_error"] = std::abs(p_hat - *p_oracle) / *p_oracle;
  j["prop4_l2"] = prop4;
  j["prop3"] = to_json(prop3);
  j["theorem1"] = to_json(thm1);
  j["island_kl"] = island_kl(islands, lambda);
  emit(doc, j.dump(2) + "\n", out);
  return kExitOk;
}

int do_oracle(const json& doc, std::ostream& out) {
  const LoadedModel model = model_from_json(doc);
  const SequencePair pair = load_pair(doc, model.alphabet);
  const double T = need_number(doc, "T");
  const std::size_t limit = get_integer(doc, "state_limit", kDefaultStateLimit);
  const double p = exact_transition_prob(model.dsm, pair, T, limit);

  json j;
  j["n"] = pair.n();
  j["r"] = pair.r();
  j["T"] = T;
  j["model"] = model.kind;
  if (model.lambda) j["lambda"] = *model.lambda;
  j["p"] = p;
  j["log_p"] = number_or_text(std::log(p));
  if (pair.r() <= 8) {
    const OrderingTable table = enumerate_orderings(model.dsm, pair);
    j["orderings"] = {{"count", table.orders.size()},
                      {"Z", table.Z},
                      {"l2", table.l2},
                      {"kl", table.kl}};
    const std::string path = get_text(doc, "orderings", "");
    if (!path.empty()) {
      std::ofstream file(path, std::ios::binary);
      if (!file) throw ConfigError("cannot write '" + path + "'");
      write_ordering_csv(file, table);
    }
  }
  emit(doc, j.dump(2) + "\n", out);
  return kExitOk;
}

int do_figure(const json& doc, std::ostream& out) {
  ExperimentGrid grid = get_flag(doc, "desk") ? ExperimentGrid::desk() : ExperimentGrid{};
  grid.n = get_integer(doc, "n", grid.n);
  grid.lambda = get_number(doc, "lambda", grid.lambda);
  grid.epsilon = get_number(doc, "epsilon", grid.epsilon);
  grid.r_values = get_list<std::size_t>(doc, "r", grid.r_values);
  if (doc.contains("T")) {
    grid.t_values = get_list<double>(doc, "T", {});
    grid.t_absolute = true;
  } else {
    grid.t_values = get_list<double>(doc, "t_mult", grid.t_values);
  }
  grid.replicates = get_integer(doc, "replicates", grid.replicates);
  grid.N = get_integer(doc, "N", grid.N);
  grid.seed = get_integer(doc, "seed", grid.seed);
  grid.workers = get_integer(doc, "workers", default_workers());
  std::optional<double> budget;
  if (doc.contains("budget_seconds")) budget = need_number(doc, "budget_seconds");
  const std::size_t resume = get_integer(doc, "resume", 0);

  const FigureRun run = run_figure(grid, resume, budget);
  std::ostringstream csv;
  write_figure_csv(csv, grid, run);
  emit(doc, csv.str(), out);
  const std::string svg = get_text(doc, "svg", "");
  if (!svg.empty()) {
    std::ofstream file(svg, std::ios::binary);
    if (!file) throw ConfigError("cannot write '" + svg + "'");
    file << render_figure_svg(grid, run);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Importance sampling of dependent-site transition probabilities"};
  app.name("dsmis");
  app.require_subcommand(1);

  auto* est = app.add_subcommand("estimate", "importance-sampling estimate of p(y | x)");
  Options est_opts(est);
  add_model_options(est_opts);
  add_pair_options(est_opts);
  add(est_opts, "T", Kind::number, "time horizon (required)");
  add(est_opts, "N", Kind::integer, "number of sampled paths");
  add(est_opts, "seed", Kind::integer, "random seed");
  add(est_opts, "workers", Kind::integer, "worker threads (default $DSMIS_WORKERS or 1)");
  add(est_opts, "epsilon", Kind::number, "report the sample size for this relative error");
  add(est_opts, "delta", Kind::number, "median of estimates at failure probability delta");
  add(est_opts, "format", Kind::text, "json (default) or csv");
  add(est_opts, "out", Kind::text, "output file");
  add(est_opts, "timing", Kind::flag, "include wall-clock time");

  auto* bnd = app.add_subcommand("bound", "sample-size bounds");
  Options bnd_opts(bnd);
  add(bnd_opts, "model", Kind::text, "jc69+cpg | table | independent");
  add(bnd_opts, "lambda", Kind::number_list, "CpG multiplier(s)");
  add(bnd_opts, "base-rate", Kind::number, "JC69 exit rate", "base_rate");
  add(bnd_opts, "alphabet", Kind::text, "alphabet symbols");
  add_pair_options(bnd_opts);
  add(bnd_opts, "r-islands", Kind::integer, "use the island pair with this many islands", "r_islands");
  add(bnd_opts, "n", Kind::integer, "pad the island pair to length n");
  add(bnd_opts, "T", Kind::number_list, "time horizon(s)");
  add(bnd_opts, "t-mult", Kind::number_list, "time horizon(s) as multiples of r/n", "t_mult");
  add(bnd_opts, "kind", Kind::text_list, "prop3, theorem1, theorem3");
  add(bnd_opts, "epsilon", Kind::number, "relative error for n_star (default 0.01)");
  add(bnd_opts, "json", Kind::flag, "JSON with all intermediate constants");
  add(bnd_opts, "out", Kind::text, "output file");

  auto* isl = app.add_subcommand("island", "estimate, bounds and oracle for the island pair");
  Options isl_opts(isl);
  add(isl_opts, "r-islands", Kind::integer, "number of islands", "r_islands");
  add(isl_opts, "lambda", Kind::number, "CpG multiplier");
  add(isl_opts, "n", Kind::integer, "pad the island pair to length n");
  add(isl_opts, "T", Kind::number, "time horizon");
  add(isl_opts, "t-mult", Kind::number, "time horizon as a multiple of r/n", "t_mult");
  add(isl_opts, "N", Kind::integer, "number of sampled paths");
  add(isl_opts, "seed", Kind::integer, "random seed");
  add(isl_opts, "workers", Kind::integer, "worker threads");
  add(isl_opts, "state-limit", Kind::integer, "largest state space for the oracle", "state_limit");
  add(isl_opts, "format", Kind::text, "json (default) or csv");
  add(isl_opts, "out", Kind::text, "output file");
  add(isl_opts, "timing", Kind::flag, "include wall-clock time");

  auto* orc = app.add_subcommand("oracle", "exact transition probability on the full state space");
  Options orc_opts(orc);
  add_model_options(orc_opts);
  add_pair_options(orc_opts);
  add(orc_opts, "T", Kind::number, "time horizon (required)");
  add(orc_opts, "state-limit", Kind::integer, "largest state space", "state_limit");
  add(orc_opts, "orderings", Kind::text, "write the ordering table CSV here");
  add(orc_opts, "out", Kind::text, "output file");

  auto* fig = app.add_subcommand("figure", "sample size against r for the island problem");
  Options fig_opts(fig);
  add(fig_opts, "desk", Kind::flag, "reduced grid: 20 replicates, r in {10,20,40,80}, T in {r/4n, r/n}");
  add(fig_opts, "n", Kind::integer, "sequence length");
  add(fig_opts, "lambda", Kind::number, "CpG multiplier");
  add(fig_opts, "epsilon", Kind::number, "relative error");
  add(fig_opts, "r", Kind::integer_list, "r values (even)");
  add(fig_opts, "t-mult", Kind::number_list, "T values as multiples of r/n", "t_mult");
  add(fig_opts, "T", Kind::number_list, "absolute T values");
  add(fig_opts, "replicates", Kind::integer, "replicates per point");
  add(fig_opts, "N", Kind::integer, "samples per replicate");
  add(fig_opts, "seed", Kind::integer, "random seed");
  add(fig_opts, "workers", Kind::integer, "worker threads");
  add(fig_opts, "budget-seconds", Kind::number, "stop after this long and write a resume line",
      "budget_seconds");
  add(fig_opts, "resume", Kind::integer, "skip grid points before this index");
  add(fig_opts, "out", Kind::text, "CSV output file");
  add(fig_opts, "svg", Kind::text, "SVG plot file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (est->parsed()) return do_estimate(est_opts.document(), out);
    if (bnd->parsed()) return do_bound(bnd_opts.document(), out);
    if (isl->parsed()) return do_island(isl_opts.document(), out);
    if (orc->parsed()) return do_oracle(orc_opts.document(), out);
    if (fig->parsed()) return do_figure(fig_opts.document(), out);
  } catch (const NumericError& e) {
    err << "dsmis: numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "dsmis: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "dsmis: input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "dsmis: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "dsmis: config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "dsmis: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace dsmis::cli
