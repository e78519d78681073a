#include "dsmis/seqcore.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dsmis/errors.hpp"

namespace dsmis {

// ---------------------------------------------------------------------------
// Alphabet

Alphabet::Alphabet(std::string_view symbols) {
  index_.fill(-1);
  if (symbols.size() < 2) throw std::invalid_argument("alphabet needs at least two symbols");
  if (symbols.size() > 255) throw std::invalid_argument("alphabet too large");
  for (char c : symbols) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (!std::isgraph(static_cast<unsigned char>(u)) || u == '>' || u == '-')
      throw std::invalid_argument(std::string("invalid alphabet symbol '") + c + "'");
    auto& slot = index_[static_cast<unsigned char>(u)];
    if (slot >= 0) throw std::invalid_argument(std::string("duplicate alphabet symbol '") + c + "'");
    slot = static_cast<std::int16_t>(symbols_.size());
    const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(u)));
    index_[static_cast<unsigned char>(l)] = slot;
    symbols_.push_back(u);
  }
}

const Alphabet& Alphabet::dna() {
  static const Alphabet kDna("ACGT");
  return kDna;
}

std::optional<Base> Alphabet::index_of(char c) const {
  const auto i = index_[static_cast<unsigned char>(c)];
  if (i < 0) return std::nullopt;
  return static_cast<Base>(i);
}

// ---------------------------------------------------------------------------
// Sequence

Sequence::Sequence(std::vector<Base> bases, std::size_t alphabet_size) : bases_(std::move(bases)) {
  if (bases_.empty()) throw std::invalid_argument("sequence must be non-empty");
  for (std::size_t i = 0; i < bases_.size(); ++i) {
    if (bases_[i] >= alphabet_size)
      throw std::invalid_argument("base index out of range at position " + std::to_string(i + 1));
  }
}

Sequence Sequence::parse(std::string_view text, const Alphabet& alphabet) {
  std::vector<Base> bases;
  bases.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto b = alphabet.index_of(text[i]);
    if (!b) {
      throw std::invalid_argument(std::string("symbol '") + text[i] + "' at position " +
                                  std::to_string(i + 1) + " is not in alphabet " +
                                  alphabet.symbols());
    }
    bases.push_back(*b);
  }
  return Sequence(std::move(bases), alphabet.size());
}

std::string Sequence::str(const Alphabet& alphabet) const {
  std::string s;
  s.reserve(bases_.size());
  for (Base b : bases_) s.push_back(alphabet.symbol(b));
  return s;
}

std::size_t hamming(const Sequence& a, const Sequence& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming: unequal lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

SequencePair::SequencePair(Sequence start, Sequence end)
    : start_(std::move(start)), end_(std::move(end)) {
  if (start_.size() != end_.size()) {
    throw std::invalid_argument("sequences have unequal lengths (" +
                                std::to_string(start_.size()) + " vs " +
                                std::to_string(end_.size()) + ")");
  }
  for (std::size_t i = 0; i < start_.size(); ++i)
    if (start_[i] != end_[i]) mutated_.push_back(i);
}

// ---------------------------------------------------------------------------
// Path

Path::Path(double horizon) : horizon_(horizon) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("path horizon must be finite and non-negative");
}

Path::Path(std::vector<Jump> jumps, double horizon) : Path(horizon) {
  double prev = 0.0;
  for (std::size_t j = 0; j < jumps.size(); ++j) {
    const double t = jumps[j].time;
    if (!(t > prev) || !(t < horizon)) {
      throw std::invalid_argument("jump " + std::to_string(j) +
                                  " violates 0 < t_1 < ... < t_m < T");
    }
    prev = t;
  }
  jumps_ = std::move(jumps);
}

void Path::assign_ordered(std::span<const Jump> jumps, double horizon) {
  jumps_.assign(jumps.begin(), jumps.end());
  horizon_ = horizon;
}

const char* to_string(PathFault fault) {
  switch (fault) {
    case PathFault::none: return "none";
    case PathFault::bad_times: return "bad_times";
    case PathFault::site_out_of_range: return "site_out_of_range";
    case PathFault::non_mutating_jump: return "non_mutating_jump";
    case PathFault::wrong_endpoint: return "wrong_endpoint";
  }
  return "unknown";
}

PathCheck validate_path(const Path& path, const SequencePair& pair) {
  PathCheck check;
  std::vector<Base> state(pair.start().bases().begin(), pair.start().bases().end());
  const std::size_t a = 256;  // bases are already range-checked by Sequence
  auto finish = [&](PathFault fault, std::size_t j) {
    check.valid = fault == PathFault::none;
    check.fault = fault;
    check.jump_index = j;
    check.terminal = Sequence(state, a);
    return check;
  };

  double prev = 0.0;
  for (std::size_t j = 0; j < path.m(); ++j) {
    const Jump& jump = path[j];
    if (!(jump.time > prev) || !(jump.time < path.horizon())) return finish(PathFault::bad_times, j);
    prev = jump.time;
    if (jump.site >= state.size()) return finish(PathFault::site_out_of_range, j);
    if (state[jump.site] == jump.base) return finish(PathFault::non_mutating_jump, j);
    state[jump.site] = jump.base;
  }
  const auto& end = pair.end().bases();
  if (!std::equal(state.begin(), state.end(), end.begin(), end.end()))
    return finish(PathFault::wrong_endpoint, path.m());
  return finish(PathFault::none, path.m());
}

Path merge_site_paths(std::span<const SitePath> per_site) {
  if (per_site.empty()) return Path(0.0);
  const double horizon = per_site.front().path.horizon();
  std::vector<Jump> jumps;
  for (const auto& sp : per_site) {
    if (sp.path.horizon() != horizon)
      throw std::invalid_argument("merge_site_paths: per-site horizons differ");
    for (std::size_t j = 0; j < sp.path.m(); ++j) {
      Jump jump = sp.path[j];
      jump.site = sp.site;
      jumps.push_back(jump);
    }
  }
  std::sort(jumps.begin(), jumps.end(), [](const Jump& lhs, const Jump& rhs) {
    return lhs.time != rhs.time ? lhs.time < rhs.time : lhs.site < rhs.site;
  });
  for (std::size_t j = 1; j < jumps.size(); ++j) {
    if (jumps[j].time > jumps[j - 1].time) continue;
    if (jumps[j].site == jumps[j - 1].site)
      throw std::invalid_argument("merge_site_paths: colliding times within site " +
                                  std::to_string(jumps[j].site));
    jumps[j].time = std::nextafter(jumps[j - 1].time, std::numeric_limits<double>::infinity());
  }
  return Path(std::move(jumps), horizon);
}

std::vector<SitePath> split_by_site(const Path& path) {
  std::map<std::size_t, std::vector<Jump>> by_site;
  for (const Jump& jump : path.jumps()) by_site[jump.site].push_back(jump);
  std::vector<SitePath> out;
  out.reserve(by_site.size());
  for (auto& [site, jumps] : by_site) out.push_back({site, Path(std::move(jumps), path.horizon())});
  return out;
}

// ---------------------------------------------------------------------------
// FASTA

std::vector<FastaRecord> parse_fasta(std::istream& in, const Alphabet& alphabet) {
  struct Pending {
    std::string name;
    std::vector<Base> bases;
    std::size_t line;
  };
  std::vector<Pending> pending;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '>') {
      std::string name = line.substr(first + 1);
      const auto end = name.find_last_not_of(" \t");
      name = end == std::string::npos ? std::string() : name.substr(0, end + 1);
      pending.push_back({std::move(name), {}, lineno});
      continue;
    }
    if (pending.empty()) throw ParseError("sequence data before the first '>' header", lineno);
    for (char c : line) {
      if (c == ' ' || c == '\t') continue;
      const auto b = alphabet.index_of(c);
      if (!b) {
        throw ParseError(std::string("symbol '") + c + "' is not in alphabet " + alphabet.symbols(),
                         lineno);
      }
      pending.back().bases.push_back(*b);
    }
  }
  std::vector<FastaRecord> records;
  for (auto& p : pending) {
    if (p.bases.empty()) throw ParseError("record '" + p.name + "' has no sequence", p.line);
    records.push_back({std::move(p.name), Sequence(std::move(p.bases), alphabet.size())});
  }
  return records;
}

SequencePair parse_fasta_pair(std::istream& in, const Alphabet& alphabet) {
  auto records = parse_fasta(in, alphabet);
  if (records.size() != 2) {
    throw ParseError("expected exactly two FASTA records, found " + std::to_string(records.size()),
                     0);
  }
  if (records[0].sequence.size() != records[1].sequence.size()) {
    throw ParseError("records have unequal lengths (" + std::to_string(records[0].sequence.size()) +
                         " vs " + std::to_string(records[1].sequence.size()) + ")",
                     0);
  }
  return SequencePair(std::move(records[0].sequence), std::move(records[1].sequence));
}

SequencePair parse_fasta_pair(std::string_view text, const Alphabet& alphabet) {
  std::istringstream in{std::string(text)};
  return parse_fasta_pair(in, alphabet);
}

std::string to_fasta(const SequencePair& pair, const Alphabet& alphabet, std::string_view start_name,
                     std::string_view end_name, std::size_t width) {
  std::string out;
  auto emit = [&](std::string_view name, const Sequence& seq) {
    out += '>';
    out += name;
    out += '\n';
    const std::string s = seq.str(alphabet);
    for (std::size_t i = 0; i < s.size(); i += width) {
      out += s.substr(i, width);
      out += '\n';
    }
  };
  emit(start_name, pair.start());
  emit(end_name, pair.end());
  return out;
}

// ---------------------------------------------------------------------------
// Path dumps

void write_path_jsonl(std::ostream& out, const Path& path, const Alphabet& alphabet) {
  for (const Jump& jump : path.jumps()) {
    nlohmann::json row;
    row["t"] = jump.time;
    row["site"] = jump.site + 1;
    row["base"] = std::string(1, alphabet.symbol(jump.base));
    out << row.dump() << '\n';
  }
}

Path read_path_jsonl(std::istream& in, double horizon, const Alphabet& alphabet) {
  std::vector<Jump> jumps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      const auto site = row.at("site").get<std::size_t>();
      const auto base = row.at("base").get<std::string>();
      if (site == 0) throw ParseError("site is 1-based", lineno);
      if (base.size() != 1 || !alphabet.index_of(base[0]))
        throw ParseError("bad base '" + base + "'", lineno);
      jumps.push_back({row.at("t").get<double>(), site - 1, *alphabet.index_of(base[0])});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return Path(std::move(jumps), horizon);
}

}  // namespace dsmis
