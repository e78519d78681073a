#pragma once

// Sequences over a finite alphabet, sequence pairs, and substitution paths.
//
// Positions are 0-based everywhere in the library. Anything written for a
// human (CLI reports, path dumps) converts to 1-based.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsmis {

using Base = std::uint8_t;

class Alphabet {
 public:
  // Symbols are stored upper-case; lookup is case-insensitive.
  explicit Alphabet(std::string_view symbols);

  // {A, C, G, T} in that order.
  static const Alphabet& dna();

  std::size_t size() const { return symbols_.size(); }
  char symbol(Base b) const { return symbols_[b]; }
  std::optional<Base> index_of(char c) const;
  const std::string& symbols() const { return symbols_; }

  bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

 private:
  std::string symbols_;
  std::array<std::int16_t, 256> index_{};
};

class Sequence {
 public:
  Sequence() = default;
  // Throws std::invalid_argument if empty or if any index is >= alphabet_size.
  Sequence(std::vector<Base> bases, std::size_t alphabet_size);

  // Throws std::invalid_argument on symbols outside the alphabet.
  static Sequence parse(std::string_view text, const Alphabet& alphabet = Alphabet::dna());

  std::size_t size() const { return bases_.size(); }
  Base operator[](std::size_t i) const { return bases_[i]; }
  std::span<const Base> bases() const { return bases_; }
  std::string str(const Alphabet& alphabet = Alphabet::dna()) const;

  bool operator==(const Sequence& other) const = default;

 private:
  std::vector<Base> bases_;
};

std::size_t hamming(const Sequence& a, const Sequence& b);

// Two aligned sequences and the sites where they differ.
class SequencePair {
 public:
  // Throws std::invalid_argument on unequal lengths.
  SequencePair(Sequence start, Sequence end);

  const Sequence& start() const { return start_; }
  const Sequence& end() const { return end_; }
  std::size_t n() const { return start_.size(); }
  std::size_t r() const { return mutated_.size(); }
  // Ascending.
  const std::vector<std::size_t>& mutated_sites() const { return mutated_; }

  bool operator==(const SequencePair& other) const {
    return start_ == other.start_ && end_ == other.end_;
  }

 private:
  Sequence start_;
  Sequence end_;
  std::vector<std::size_t> mutated_;
};

struct Jump {
  double time = 0.0;
  std::size_t site = 0;
  Base base = 0;

  bool operator==(const Jump&) const = default;
};

// Time-ordered substitution record on [0, horizon].
class Path {
 public:
  Path() = default;
  explicit Path(double horizon);
  // Throws std::invalid_argument unless 0 < t_1 < ... < t_m < horizon.
  Path(std::vector<Jump> jumps, double horizon);

  std::size_t m() const { return jumps_.size(); }
  double horizon() const { return horizon_; }
  const std::vector<Jump>& jumps() const { return jumps_; }
  const Jump& operator[](std::size_t j) const { return jumps_[j]; }
  bool empty() const { return jumps_.empty(); }

  // Reuses storage. The caller guarantees the ordering invariant; samplers use
  // this on their hot path.
  void assign_ordered(std::span<const Jump> jumps, double horizon);

  bool operator==(const Path&) const = default;

 private:
  std::vector<Jump> jumps_;
  double horizon_ = 0.0;
};

enum class PathFault {
  none,
  bad_times,
  site_out_of_range,
  non_mutating_jump,
  wrong_endpoint,
};

const char* to_string(PathFault fault);

struct PathCheck {
  bool valid = false;
  PathFault fault = PathFault::none;
  // Index of the offending jump for jump-level faults.
  std::size_t jump_index = 0;
  // State after applying every jump that could be applied.
  Sequence terminal;
};

// True iff replaying the jumps from pair.start() reaches pair.end() and every
// jump changes the state of its site.
PathCheck validate_path(const Path& path, const SequencePair& pair);

struct SitePath {
  std::size_t site = 0;
  Path path;
};

// Interleaves per-site paths into one path ordered by (time, site). Equal
// timestamps on different sites are separated by nudging the later jump to
// the next representable double. Throws std::invalid_argument for mismatched
// horizons or colliding times within one site.
Path merge_site_paths(std::span<const SitePath> per_site);

// Inverse of merge_site_paths: one entry per site that has jumps, ascending.
std::vector<SitePath> split_by_site(const Path& path);

// FASTA with exactly two records of equal length. Multi-line records, blank
// lines and lower-case bases are accepted; anything outside the alphabet is a
// ParseError carrying the offending line number.
struct FastaRecord {
  std::string name;
  Sequence sequence;
};

std::vector<FastaRecord> parse_fasta(std::istream& in, const Alphabet& alphabet = Alphabet::dna());
SequencePair parse_fasta_pair(std::istream& in, const Alphabet& alphabet = Alphabet::dna());
SequencePair parse_fasta_pair(std::string_view text, const Alphabet& alphabet = Alphabet::dna());

std::string to_fasta(const SequencePair& pair, const Alphabet& alphabet = Alphabet::dna(),
                     std::string_view start_name = "x", std::string_view end_name = "y",
                     std::size_t width = 60);

// Debug dump: one JSON object per line, {"t":..,"site":..,"base":"G"} with
// 1-based sites.
void write_path_jsonl(std::ostream& out, const Path& path,
                      const Alphabet& alphabet = Alphabet::dna());
Path read_path_jsonl(std::istream& in, double horizon, const Alphabet& alphabet = Alphabet::dna());

}  // namespace dsmis
