#pragma once

// Model configuration documents.
//
//   {"model": "jc69+cpg", "lambda": 0.5, "base_rate": 1.0}
//   {"model": "table", "k": 2, "phi": {"TCA:G": 0.5, ...}, "generator": {...}}
//   {"model": "independent", "generator": {...}}
//
// Generators: {"type": "jc69", "rate": 1.0} or {"type": "custom", "matrix": [[...]]};
// "generators": [...] gives one per site. "alphabet" defaults to "ACGT".
//
// Table keys are "<window>:<base>" with the window written left to right and
// '-' for a neighbour beyond the sequence end. Every window without '-' must
// be listed for every base other than the centre; boundary windows default
// to a multiplier of 1.

#include <optional>
#include <string>

#include <json.hpp>

#include "dsmis/dsm.hpp"
#include "dsmis/ism.hpp"
#include "dsmis/seqcore.hpp"

namespace dsmis {

struct LoadedModel {
  DsmModel dsm;
  Alphabet alphabet;
  std::string kind;                // "jc69+cpg", "table" or "independent"
  std::optional<double> lambda;    // CpG models only
};

// All loaders throw ConfigError with a message naming the offending field.
SiteGenerator generator_from_json(const nlohmann::json& spec, std::size_t alphabet_size);
ContextModel table_context_from_json(const nlohmann::json& spec, const Alphabet& alphabet);
LoadedModel model_from_json(const nlohmann::json& spec);

nlohmann::json read_json_file(const std::string& path);

}  // namespace dsmis
