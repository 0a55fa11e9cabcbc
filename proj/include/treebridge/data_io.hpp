#pragma once

#include <string>
#include <vector>

#include "treebridge/mat.hpp"
#include "treebridge/oracles.hpp"
#include "treebridge/rng.hpp"

namespace treebridge {

enum class Split { train, eval };

// A seeded sample source for one marginal. Generators are analytically
// centred before scaling; CSV sources bootstrap rows with replacement.
struct MarginalSource {
  enum class Kind { moons, circle, spiral, gaussian, csv };
  Kind kind = Kind::gaussian;
  uint64_t seed = 0;
  double scale = 1.0;
  double noise = 0.05;  // generator noise std (before scaling)
  GaussianSpec gauss;   // kind == gaussian
  Mat csv_rows;         // kind == csv
  std::string csv_path;

  int dim() const;
};

MarginalSource::Kind parse_kind(const std::string& name);

// Train and eval streams are derived from disjoint tags of the source seed.
Rng marginal_stream(const MarginalSource& src, Split split);

// n x d samples advanced from `rng` (use marginal_stream to position it).
Mat sample_marginal(const MarginalSource& src, int n, Rng& rng);

// CSV: comma-separated decimal floats, one sample per row, optional single
// header row auto-detected by a non-numeric first row.
// Errors: CsvParse (with row number), EmptyFile.
Mat load_csv(const std::string& path);
MarginalSource csv_marginal(const std::string& path, uint64_t seed);

void write_csv(const std::string& path, const Mat& m,
               const std::vector<std::string>& header = {});

}  // namespace treebridge
