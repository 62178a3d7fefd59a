#pragma once

// Synthetic dataset generation, CSV ingestion, splits, and batching.
//
// All generators draw features inside [0,1]^2 (or [0,1]^1 where noted) and
// produce binary labels except gaussian_blobs, which is K-class.
//
//   identity_line       x uniform on [0,1]^2, label 1 iff x1 > x2
//   xor_quadrants       x uniform on [0,1]^2, label 1 iff exactly one
//                       coordinate exceeds 0.5
//   concentric_circles  inner disc (class 0) vs surrounding ring (class 1)
//                       around (0.5, 0.5)
//   two_spirals         two interleaved spiral arms around (0.5, 0.5)
//   gaussian_blobs      K isotropic clusters, label = cluster index
//
// The noise parameter flips each label to a uniformly random other class
// with the given probability; 0 keeps the patterns exact.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pforest/rng.hpp"

namespace pforest {

// ------- dataset container -------

struct Dataset {
  std::vector<double> features;  // rows x cols, row-major
  std::vector<double> labels;    // rows
  int rows = 0;
  int cols = 0;
  std::vector<std::string> feature_names;  // empty, or one name per column

  std::span<const double> row(int i) const {
    return {features.data() + static_cast<std::size_t>(i) * cols,
            static_cast<std::size_t>(cols)};
  }
  void push_row(std::span<const double> x, double label);
};

// Throws std::invalid_argument on shape mismatches or non-finite features.
void validate_dataset(const Dataset& data);

// ------- synthetic generation -------

enum class SyntheticKind {
  identity_line,
  xor_quadrants,
  concentric_circles,
  two_spirals,
  gaussian_blobs,
};

const char* synthetic_name(SyntheticKind kind);
SyntheticKind synthetic_from_name(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::identity_line;
  int n = 1000;
  double noise = 0.0;      // label-flip probability in [0, 1)
  std::uint64_t seed = 0;
  int num_blobs = 3;       // gaussian_blobs only
};

int num_classes(const SyntheticSpec& spec);
Dataset generate_dataset(const SyntheticSpec& spec);

// Stand-in for a pre-trained encoder: projects each example through a seeded
// random linear map centred on the feature midpoint, then squashes through a
// sigmoid, yielding an embed_dim-wide table in (0,1) with labels copied.
Dataset synthesize_embeddings(const Dataset& source, int embed_dim, double scale,
                              std::uint64_t seed);

// ------- CSV io -------

struct CsvSchema {
  int label_column = -1;  // -1 = last column
  bool header = true;
};

// Errors cite the 1-based file line and column, e.g. "row 2, column 3".
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(const std::string& text, const CsvSchema& schema = {});

// Full round-trip precision (shortest representation); label written last.
std::string to_csv(const Dataset& data);
void write_csv(const Dataset& data, const std::string& path);

// ------- splits and batches -------

struct SplitResult {
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Seeded shuffle partition; fractions must be positive and sum to 1 (within
// 1e-9), and each part receives round(n * fraction) rows, +-1 to exhaust n.
SplitResult split_dataset(const Dataset& data, double train_fraction,
                          double valid_fraction, double test_fraction,
                          std::uint64_t seed);

// Per-epoch seeded shuffle of [0, n) cut into batches; the last batch may be
// short.  The epoch index is mixed into the stream so epochs reorder.
std::vector<std::vector<int>> make_batches(int n, int batch_size, std::uint64_t seed,
                                           int epoch);

}  // namespace pforest
