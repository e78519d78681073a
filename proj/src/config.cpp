#include "dsmis/config.hpp"

#include <fstream>
#include <limits>
#include <unordered_map>

#include "dsmis/errors.hpp"

namespace dsmis {

namespace {

using nlohmann::json;

double number_field(const json& spec, const char* key, double fallback) {
  if (!spec.contains(key)) return fallback;
  if (!spec[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return spec[key].get<double>();
}

}  // namespace

SiteGenerator generator_from_json(const json& spec, std::size_t alphabet_size) {
  if (!spec.is_object()) throw ConfigError("generator must be an object");
  const std::string type = spec.value("type", "jc69");
  try {
    if (type == "jc69") return SiteGenerator::jc69(number_field(spec, "rate", 1.0), alphabet_size);
    if (type == "custom") {
      if (!spec.contains("matrix") || !spec["matrix"].is_array())
        throw ConfigError("custom generator needs a 'matrix' array");
      const auto& rows = spec["matrix"];
      const auto a = static_cast<Eigen::Index>(alphabet_size);
      if (rows.size() != alphabet_size)
        throw ConfigError("generator matrix must have " + std::to_string(alphabet_size) + " rows");
      Eigen::MatrixXd q(a, a);
      for (Eigen::Index x = 0; x < a; ++x) {
        const auto& row = rows[static_cast<std::size_t>(x)];
        if (!row.is_array() || row.size() != alphabet_size)
          throw ConfigError("generator matrix row " + std::to_string(x) + " has the wrong length");
        for (Eigen::Index y = 0; y < a; ++y) {
          if (!row[static_cast<std::size_t>(y)].is_number())
            throw ConfigError("generator matrix entries must be numbers");
          q(x, y) = row[static_cast<std::size_t>(y)].get<double>();
        }
      }
      return SiteGenerator(std::move(q));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
  throw ConfigError("unknown generator type '" + type + "' (expected jc69 or custom)");
}

ContextModel table_context_from_json(const json& spec, const Alphabet& alphabet) {
  if (!spec.contains("k") || !spec["k"].is_number_integer())
    throw ConfigError("table model needs an integer 'k'");
  const auto k = spec["k"].get<long long>();
  if (k < 0 || k % 2 != 0 || k > 4) throw ConfigError("table model needs k in {0, 2, 4}");
  if (!spec.contains("phi") || !spec["phi"].is_object())
    throw ConfigError("table model needs a 'phi' object");

  const std::size_t a = alphabet.size();
  const auto width = static_cast<std::size_t>(k) + 1;
  const std::size_t h = width / 2;
  auto code_of = [a](std::span<const int> window) {
    std::size_t code = 0;
    std::size_t scale = 1;
    for (int w : window) {
      code += scale * static_cast<std::size_t>(w + 1);
      scale *= a + 1;
    }
    return code;
  };

  std::unordered_map<std::size_t, double> entries;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::vector<int> window(width);
  for (const auto& [key, value] : spec["phi"].items()) {
    const auto colon = key.find(':');
    if (colon != width || key.size() != width + 2)
      throw ConfigError("phi key '" + key + "' must look like <" + std::to_string(width) +
                        " symbols>:<base>");
    for (std::size_t j = 0; j < width; ++j) {
      if (key[j] == '-') {
        window[j] = ContextModel::kAbsent;
        continue;
      }
      const auto b = alphabet.index_of(key[j]);
      if (!b) throw ConfigError("phi key '" + key + "' uses a symbol outside the alphabet");
      window[j] = *b;
    }
    const auto proposed = alphabet.index_of(key[width + 1]);
    if (!proposed) throw ConfigError("phi key '" + key + "' proposes a symbol outside the alphabet");
    if (window[h] == ContextModel::kAbsent || window[h] == *proposed)
      throw ConfigError("phi key '" + key + "' must propose a base different from a present centre");
    if (!value.is_number() || !(value.get<double>() > 0.0))
      throw ConfigError("phi value for '" + key + "' must be a positive number");
    const double v = value.get<double>();
    entries[code_of(window) * a + *proposed] = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  // Every interior (window, base) must be present.
  std::size_t interior = 1;
  for (std::size_t j = 0; j < width; ++j) interior *= a;
  for (std::size_t w = 0; w < interior; ++w) {
    std::size_t c = w;
    for (std::size_t j = 0; j < width; ++j, c /= a) window[j] = static_cast<int>(c % a);
    for (std::size_t b = 0; b < a; ++b) {
      if (static_cast<int>(b) == window[h]) continue;
      if (!entries.count(code_of(window) * a + b)) {
        std::string key;
        for (int s : window) key += alphabet.symbol(static_cast<Base>(s));
        key += ':';
        key += alphabet.symbol(static_cast<Base>(b));
        throw ConfigError("phi table is missing interior key '" + key + "'");
      }
    }
  }
  // Boundary windows fall back to 1.
  if (k > 0) {
    lo = std::min(lo, 1.0);
    hi = std::max(hi, 1.0);
  }

  auto lookup = [entries = std::move(entries), code_of, a](Base proposed,
                                                           std::span<const int> w) {
    const auto it = entries.find(code_of(w) * a + proposed);
    return it == entries.end() ? 1.0 : it->second;
  };
  try {
    return ContextModel(a, static_cast<std::size_t>(k), lookup, lo, hi);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("phi table: ") + e.what());
  }
}

LoadedModel model_from_json(const json& spec) {
  if (!spec.is_object()) throw ConfigError("model configuration must be a JSON object");
  const Alphabet alphabet = [&] {
    try {
      return Alphabet(spec.value("alphabet", std::string("ACGT")));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("alphabet: ") + e.what());
    }
  }();
  const std::string kind = spec.value("model", std::string("jc69+cpg"));

  if (kind == "jc69+cpg") {
    if (!(alphabet == Alphabet::dna())) throw ConfigError("jc69+cpg requires the ACGT alphabet");
    CpgParams params;
    params.lambda = number_field(spec, "lambda", 1.0);
    params.base_rate = number_field(spec, "base_rate", 1.0);
    if (!(params.lambda > 0.0)) throw ConfigError("'lambda' must be > 0");
    if (!(params.base_rate > 0.0)) throw ConfigError("'base_rate' must be > 0");
    return {make_cpg_model(params), alphabet, kind, params.lambda};
  }

  auto load_ism = [&]() -> IsmModel {
    if (spec.contains("generators")) {
      if (!spec["generators"].is_array() || spec["generators"].empty())
        throw ConfigError("'generators' must be a non-empty array");
      std::vector<SiteGenerator> per_site;
      for (const auto& g : spec["generators"]) per_site.push_back(generator_from_json(g, alphabet.size()));
      return IsmModel(std::move(per_site));
    }
    return IsmModel(generator_from_json(spec.value("generator", json::object()), alphabet.size()));
  };

  if (kind == "table") return {DsmModel(load_ism(), table_context_from_json(spec, alphabet)), alphabet, kind, {}};
  if (kind == "independent")
    return {DsmModel(load_ism(), ContextModel::independent(alphabet.size())), alphabet, kind, {}};
  throw ConfigError("unknown model '" + kind + "' (expected jc69+cpg, table or independent)");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

}  // namespace dsmis
