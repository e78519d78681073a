#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "dsmis/errors.hpp"
#include "dsmis/ism.hpp"
#include "dsmis/random.hpp"
#include "dsmis/seqcore.hpp"

using namespace dsmis;

namespace {

SequencePair pair_of(const char* x, const char* y) {
  return SequencePair(Sequence::parse(x), Sequence::parse(y));
}

}  // namespace

TEST(Alphabet, DnaOrderAndLookup) {
  const Alphabet& dna = Alphabet::dna();
  EXPECT_EQ(dna.symbols(), "ACGT");
  EXPECT_EQ(*dna.index_of('g'), 2);
  EXPECT_FALSE(dna.index_of('N').has_value());
  EXPECT_THROW(Alphabet("AA"), std::invalid_argument);
  EXPECT_THROW(Alphabet("A"), std::invalid_argument);
}

TEST(Fasta, TwoRecordsWithMismatches) {
  const SequencePair p = parse_fasta_pair(std::string_view(">a\nTTCATT\n>b\nTTTGTT"));
  EXPECT_EQ(p.n(), 6u);
  EXPECT_EQ(p.r(), 2u);
  EXPECT_EQ(p.mutated_sites(), (std::vector<std::size_t>{2, 3}));
}

TEST(Fasta, IdenticalSequences) {
  const SequencePair p = parse_fasta_pair(std::string_view(">a\nACGT\n>b\nACGT"));
  EXPECT_EQ(p.r(), 0u);
  EXPECT_TRUE(p.mutated_sites().empty());
}

TEST(Fasta, UnequalLengthsRejected) {
  EXPECT_THROW(parse_fasta_pair(std::string_view(">a\nAC\n>b\nACG")), ParseError);
}

TEST(Fasta, MultiLineBlankAndLowerCase) {
  const SequencePair p = parse_fasta_pair(std::string_view(">a\nac\n\ngt\n>b\nAC\nGA\n\n"));
  EXPECT_EQ(p.start().str(), "ACGT");
  EXPECT_EQ(p.end().str(), "ACGA");
  EXPECT_EQ(p.r(), 1u);
}

TEST(Fasta, AmbiguityCodeReportsLine) {
  try {
    parse_fasta_pair(std::string_view(">a\nACGT\n>b\nACNT\n"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Fasta, WrongRecordCount) {
  EXPECT_THROW(parse_fasta_pair(std::string_view(">a\nACGT\n")), ParseError);
  EXPECT_THROW(parse_fasta_pair(std::string_view("ACGT\n>b\nACGT\n")), ParseError);
}

TEST(Fasta, RoundTripRandomPairs) {
  Rng rng = make_stream(3, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng() % 150;
    std::vector<Base> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<Base>(rng() % 4);
      y[i] = static_cast<Base>(rng() % 4);
    }
    const SequencePair p(Sequence(x, 4), Sequence(y, 4));
    EXPECT_EQ(parse_fasta_pair(std::string_view(to_fasta(p))), p);
  }
}

TEST(ValidatePath, EmptyPathSameEndpoints) {
  const auto p = pair_of("ACGT", "ACGT");
  const PathCheck c = validate_path(Path(1.0), p);
  EXPECT_TRUE(c.valid);
  EXPECT_EQ(c.terminal, p.end());
}

TEST(ValidatePath, EmptyPathWrongEndpoint) {
  const PathCheck c = validate_path(Path(1.0), pair_of("ACGT", "ACGA"));
  EXPECT_FALSE(c.valid);
  EXPECT_EQ(c.fault, PathFault::wrong_endpoint);
}

TEST(ValidatePath, OneJumpPerMutatedSite) {
  const auto p = pair_of("TTCATT", "TTTGTT");
  const Path path({{0.1, 2, 3}, {0.4, 3, 2}}, 1.0);
  const PathCheck c = validate_path(path, p);
  EXPECT_TRUE(c.valid);
  EXPECT_EQ(c.terminal.str(), "TTTGTT");
}

TEST(ValidatePath, NonMutatingJump) {
  const auto p = pair_of("AC", "AG");
  const Path path({{0.1, 0, 0}, {0.2, 1, 2}}, 1.0);
  const PathCheck c = validate_path(path, p);
  EXPECT_FALSE(c.valid);
  EXPECT_EQ(c.fault, PathFault::non_mutating_jump);
  EXPECT_EQ(c.jump_index, 0u);
}

TEST(ValidatePath, SiteOutOfRange) {
  const PathCheck c = validate_path(Path({{0.1, 7, 1}}, 1.0), pair_of("AC", "AC"));
  EXPECT_EQ(c.fault, PathFault::site_out_of_range);
}

TEST(PathType, RejectsUnorderedTimes) {
  EXPECT_THROW(Path({{0.5, 0, 1}, {0.5, 1, 1}}, 1.0), std::invalid_argument);
  EXPECT_THROW(Path({{0.0, 0, 1}}, 1.0), std::invalid_argument);
  EXPECT_THROW(Path({{1.0, 0, 1}}, 1.0), std::invalid_argument);
}

TEST(MergeSitePaths, TwoSites) {
  std::vector<SitePath> per_site{{4, Path({{0.7, 0, 1}}, 1.0)}, {1, Path({{0.3, 0, 2}}, 1.0)}};
  const Path merged = merge_site_paths(per_site);
  ASSERT_EQ(merged.m(), 2u);
  EXPECT_EQ(merged[0].time, 0.3);
  EXPECT_EQ(merged[0].site, 1u);
  EXPECT_EQ(merged[1].time, 0.7);
  EXPECT_EQ(merged[1].site, 4u);
}

TEST(MergeSitePaths, SingleSiteAnnotated) {
  std::vector<SitePath> per_site{{3, Path({{0.1, 0, 1}, {0.2, 0, 2}, {0.3, 0, 0}}, 1.0)}};
  const Path merged = merge_site_paths(per_site);
  ASSERT_EQ(merged.m(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(merged[j].site, 3u);
    EXPECT_EQ(merged[j].time, per_site[0].path[j].time);
    EXPECT_EQ(merged[j].base, per_site[0].path[j].base);
  }
}

TEST(MergeSitePaths, EqualTimestampsLowerSiteFirst) {
  std::vector<SitePath> per_site{{5, Path({{0.5, 0, 1}}, 1.0)}, {2, Path({{0.5, 0, 3}}, 1.0)}};
  const Path merged = merge_site_paths(per_site);
  ASSERT_EQ(merged.m(), 2u);
  EXPECT_EQ(merged[0].site, 2u);
  EXPECT_EQ(merged[0].time, 0.5);
  EXPECT_EQ(merged[1].site, 5u);
  EXPECT_EQ(merged[1].time, std::nextafter(0.5, 1.0));
}

TEST(MergeSitePaths, MismatchedHorizons) {
  std::vector<SitePath> per_site{{0, Path({{0.5, 0, 1}}, 1.0)}, {1, Path({{0.5, 0, 1}}, 2.0)}};
  EXPECT_THROW(merge_site_paths(per_site), std::invalid_argument);
}

TEST(MergeSitePaths, SplitRoundTripOnSampledPaths) {
  const IsmModel ism(SiteGenerator::jc69());
  const auto p = pair_of("ACGTACGTTTCA", "ACCTAGGTATCA");
  Rng rng = make_stream(11, 0);
  for (int rep = 0; rep < 500; ++rep) {
    const Path path = sample_joint_path(ism, p, 0.7, rng);
    const auto parts = split_by_site(path);
    EXPECT_EQ(merge_site_paths(parts), path);
  }
}

TEST(PathJsonl, OneBasedRoundTrip) {
  const Path path({{0.25, 0, 2}, {0.5, 3, 1}}, 1.0);
  std::ostringstream out;
  write_path_jsonl(out, path);
  EXPECT_NE(out.str().find("\"site\":1"), std::string::npos);
  EXPECT_NE(out.str().find("\"base\":\"G\""), std::string::npos);
  std::istringstream in(out.str());
  EXPECT_EQ(read_path_jsonl(in, 1.0), path);
}

TEST(Hamming, CountsMismatches) {
  EXPECT_EQ(hamming(Sequence::parse("ACGT"), Sequence::parse("AGGA")), 2u);
}
