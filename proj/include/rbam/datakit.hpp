#pragma once

// Dataset manifests, seeded train/test split and the texture-rich/poor
// partition driven by bicubic restoration PSNR.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/image.hpp"
#include "rbam/metrics.hpp"
#include "rbam/random.hpp"

namespace rbam {

enum class Split { train, test };
enum class Partition { unassigned, rich, poor };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }
inline const char* to_string(Partition p) {
  switch (p) {
    case Partition::rich: return "rich";
    case Partition::poor: return "poor";
    default: return "unassigned";
  }
}

struct ManifestRecord {
  std::string image_id;
  std::string path;
  Split split = Split::train;
  Partition partition = Partition::unassigned;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;

  bool operator==(const Manifest&) const = default;

  std::vector<ManifestRecord> with_split(Split s) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records)
      if (r.split == s) out.push_back(r);
    return out;
  }

  void check_unique_ids() const {
    std::set<std::string> seen;
    for (const auto& r : records) {
      if (!seen.insert(r.image_id).second) throw ConfigError("manifest: duplicate image_id '" + r.image_id + "'");
    }
  }
};

// One record per line: image_id<TAB>path<TAB>split<TAB>partition.
// Blank lines and lines starting with '#' are ignored.
inline Manifest parse_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 4) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 4 tab-separated fields", line_offset);
    }
    ManifestRecord r{fields[0], fields[1]};
    if (fields[2] == "train") r.split = Split::train;
    else if (fields[2] == "test") r.split = Split::test;
    else throw FormatError("manifest line " + std::to_string(line_no) + ": split must be train or test", line_offset);
    if (fields[3] == "unassigned") r.partition = Partition::unassigned;
    else if (fields[3] == "rich") r.partition = Partition::rich;
    else if (fields[3] == "poor") r.partition = Partition::poor;
    else throw FormatError("manifest line " + std::to_string(line_no) + ": unknown partition '" + fields[3] + "'", line_offset);
    m.records.push_back(std::move(r));
  }
  m.check_unique_ids();
  return m;
}

inline void write_manifest(std::ostream& os, const Manifest& m) {
  for (const auto& r : m.records) {
    os << r.image_id << '\t' << r.path << '\t' << to_string(r.split) << '\t' << to_string(r.partition) << '\n';
  }
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
  return parse_manifest(in);
}

inline void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  write_manifest(out, m);
}

// Seeded shuffle; the first floor(fraction * n) shuffled records become train.
inline Manifest split(const Manifest& manifest, double train_fraction, std::uint64_t seed) {
  if (manifest.records.empty()) throw ContractError("split: manifest is empty");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("split: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(manifest.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = make_rng(seed, 0x5711);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(order.size())));
  Manifest out = manifest;
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.records[order[k]].split = k < n_train ? Split::train : Split::test;
  }
  return out;
}

struct PartitionEntry {
  std::string image_id;
  double psnr_db = 0.0;
  Partition label = Partition::poor;
};

struct PartitionReport {
  std::vector<PartitionEntry> entries;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;

  std::size_t count(Partition p) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.label == p;
    return n;
  }
};

// PSNR of bicubic down-by-r then up-by-r against the original.
inline double bicubic_restoration_psnr(const GrayImage& img, std::size_t r) {
  return psnr(upsample(downsample(img, r), r), img);
}

// Labels each scored image: rich iff its PSNR is strictly below the mean
// of the finite scores.
inline PartitionReport partition_scores(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  PartitionReport report;
  const auto stats = mean_and_sem(scores);
  report.threshold = stats.mean;
  if (stats.excluded) {
    report.warnings.push_back(std::to_string(stats.excluded) +
                              " image(s) restored exactly by bicubic (infinite PSNR), excluded from the mean");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool rich = std::isfinite(scores[i]) && scores[i] < report.threshold;
    report.entries.push_back({ids[i], scores[i], rich ? Partition::rich : Partition::poor});
  }
  if (!ids.empty() && report.count(Partition::rich) == 0) {
    report.warnings.push_back("no image scored below the mean; the texture-rich set is empty");
  }
  return report;
}

using ImageLoader = std::function<GrayImage(const ManifestRecord&)>;

inline ImageLoader pgm_loader() {
  return [](const ManifestRecord& r) { return read_pgm(r.path); };
}

// Scores the test split; threshold is computed per (dataset, r).
inline PartitionReport partition_by_texture(const Manifest& manifest, std::size_t r,
                                            const ImageLoader& load = pgm_loader()) {
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::test) continue;
    ids.push_back(rec.image_id);
    scores.push_back(bicubic_restoration_psnr(load(rec), r));
  }
  if (ids.empty()) throw ContractError("partition_by_texture: the test split is empty");
  return partition_scores(ids, scores);
}

inline Manifest apply_partition(const Manifest& manifest, const PartitionReport& report) {
  Manifest out = manifest;
  for (auto& rec : out.records) {
    for (const auto& e : report.entries) {
      if (e.image_id == rec.image_id) rec.partition = e.label;
    }
  }
  return out;
}

inline void write_partition_report(std::ostream& os, const PartitionReport& report) {
  char buf[64];
  os << "image_id\tpsnr_db\tlabel\n";
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%.6f", e.psnr_db);
    os << e.image_id << '\t' << buf << '\t' << to_string(e.label) << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f", report.threshold);
  os << "# threshold\t" << buf << '\n';
}

}  // namespace rbam
