#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "rbam/datakit.hpp"
#include "rbam/synthetic.hpp"

namespace {

rbam::Manifest manifest_of(std::size_t n) {
  rbam::Manifest m;
  for (std::size_t i = 0; i < n; ++i) m.records.push_back({"id" + std::to_string(i), "p" + std::to_string(i) + ".pgm"});
  return m;
}

}  // namespace

TEST(Manifest, RoundTrip) {
  auto m = manifest_of(3);
  m.records[1].split = rbam::Split::test;
  m.records[1].partition = rbam::Partition::rich;
  std::ostringstream os;
  rbam::write_manifest(os, m);
  EXPECT_EQ(os.str(), "id0\tp0.pgm\ttrain\tunassigned\nid1\tp1.pgm\ttest\trich\nid2\tp2.pgm\ttrain\tunassigned\n");
  std::istringstream in("# comment\n\n" + os.str());
  EXPECT_EQ(rbam::parse_manifest(in), m);
}

TEST(Manifest, ParseErrors) {
  std::istringstream three_fields("a\tb\ttrain\n");
  EXPECT_THROW(rbam::parse_manifest(three_fields), rbam::FormatError);
  std::istringstream bad_split("a\tb\tvalidation\tunassigned\n");
  EXPECT_THROW(rbam::parse_manifest(bad_split), rbam::FormatError);
  std::istringstream dup("a\tb\ttrain\tunassigned\na\tc\ttest\tpoor\n");
  EXPECT_THROW(rbam::parse_manifest(dup), rbam::ConfigError);
}

TEST(Split, EightyTwentyCounts) {
  const auto s = rbam::split(manifest_of(100), 0.8, 0);
  EXPECT_EQ(s.with_split(rbam::Split::train).size(), 80u);
  EXPECT_EQ(s.with_split(rbam::Split::test).size(), 20u);
  const auto two = rbam::split(manifest_of(2), 0.5, 3);
  EXPECT_EQ(two.with_split(rbam::Split::train).size(), 1u);
}

TEST(Split, DeterministicAndSeedDependent) {
  const auto a = rbam::split(manifest_of(50), 0.8, 1), b = rbam::split(manifest_of(50), 0.8, 1);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, rbam::split(manifest_of(50), 0.8, 2));
}

TEST(Split, EmptyManifestIsAnError) {
  EXPECT_THROW(rbam::split(rbam::Manifest{}, 0.8, 0), rbam::ContractError);
}

TEST(Partition, StrictlyBelowMeanIsRich) {
  const auto r = rbam::partition_scores({"a", "b", "c", "d"}, {30, 32, 34, 40});
  EXPECT_DOUBLE_EQ(r.threshold, 34.0);
  EXPECT_EQ(r.entries[0].label, rbam::Partition::rich);
  EXPECT_EQ(r.entries[1].label, rbam::Partition::rich);
  EXPECT_EQ(r.entries[2].label, rbam::Partition::poor);
  EXPECT_EQ(r.entries[3].label, rbam::Partition::poor);
}

TEST(Partition, EqualScoresLeaveRichEmptyWithWarning) {
  const auto r = rbam::partition_scores({"a", "b"}, {31, 31});
  EXPECT_EQ(r.count(rbam::Partition::rich), 0u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Partition, InfiniteScoresExcludedFromMean) {
  const auto r = rbam::partition_scores({"a", "b", "c"}, {30, 40, rbam::kInfinitePsnr});
  EXPECT_DOUBLE_EQ(r.threshold, 35.0);
  EXPECT_EQ(r.entries[2].label, rbam::Partition::poor);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Partition, OrderInvariant) {
  const auto a = rbam::partition_scores({"a", "b", "c", "d"}, {33, 30, 41, 35});
  const auto b = rbam::partition_scores({"d", "c", "b", "a"}, {35, 41, 30, 33});
  EXPECT_EQ(a.threshold, b.threshold);
  for (const auto& e : a.entries) {
    const auto it = std::find_if(b.entries.begin(), b.entries.end(), [&](const auto& x) { return x.image_id == e.image_id; });
    EXPECT_EQ(it->label, e.label);
  }
}

TEST(Partition, CheckerboardsRichGradientsPoor) {
  const auto corpus =
      rbam::synth::corpus({rbam::synth::Kind::gradient, rbam::synth::Kind::checkerboard}, 12, 32, 32, 4);
  rbam::Manifest m;
  for (const auto& s : corpus) m.records.push_back({s.image_id, "", rbam::Split::test});
  const auto loader = [&](const rbam::ManifestRecord& r) {
    for (const auto& s : corpus)
      if (s.image_id == r.image_id) return s.image;
    throw std::runtime_error("missing");
  };
  const auto report = rbam::partition_by_texture(m, 2, loader);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto want = corpus[i].kind == rbam::synth::Kind::checkerboard ? rbam::Partition::rich : rbam::Partition::poor;
    EXPECT_EQ(report.entries[i].label, want) << corpus[i].image_id << " " << report.entries[i].psnr_db;
  }
  const auto tagged = rbam::apply_partition(m, report);
  EXPECT_EQ(tagged.records[1].partition, rbam::Partition::rich);
}

TEST(Partition, EmptyTestSplitIsAnError) {
  EXPECT_THROW(rbam::partition_by_texture(manifest_of(2), 2), rbam::ContractError);
}
