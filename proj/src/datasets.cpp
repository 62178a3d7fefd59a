#include "pforest/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pforest {

// ------- dataset container -------

void Dataset::push_row(std::span<const double> x, double label) {
  if (rows == 0 && cols == 0) cols = static_cast<int>(x.size());
  if (static_cast<int>(x.size()) != cols) {
    throw std::invalid_argument("dataset: row has " + std::to_string(x.size()) +
                                " features, expected " + std::to_string(cols));
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  ++rows;
}

void validate_dataset(const Dataset& data) {
  if (data.rows < 0 || data.cols < 0) throw std::invalid_argument("dataset: negative shape");
  if (data.features.size() !=
      static_cast<std::size_t>(data.rows) * static_cast<std::size_t>(data.cols)) {
    throw std::invalid_argument("dataset: feature storage does not match rows x cols");
  }
  if (data.labels.size() != static_cast<std::size_t>(data.rows)) {
    throw std::invalid_argument("dataset: label count does not match rows");
  }
  if (!data.feature_names.empty() &&
      data.feature_names.size() != static_cast<std::size_t>(data.cols)) {
    throw std::invalid_argument("dataset: feature_names must be empty or one per column");
  }
  for (double v : data.features) {
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite feature");
  }
}

// ------- synthetic generation -------

const char* synthetic_name(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::identity_line: return "identity_line";
    case SyntheticKind::xor_quadrants: return "xor_quadrants";
    case SyntheticKind::concentric_circles: return "concentric_circles";
    case SyntheticKind::two_spirals: return "two_spirals";
    case SyntheticKind::gaussian_blobs: return "gaussian_blobs";
  }
  return "identity_line";
}

SyntheticKind synthetic_from_name(const std::string& name) {
  if (name == "identity_line") return SyntheticKind::identity_line;
  if (name == "xor_quadrants") return SyntheticKind::xor_quadrants;
  if (name == "concentric_circles") return SyntheticKind::concentric_circles;
  if (name == "two_spirals") return SyntheticKind::two_spirals;
  if (name == "gaussian_blobs") return SyntheticKind::gaussian_blobs;
  throw std::invalid_argument("unknown dataset kind: '" + name + "'");
}

int num_classes(const SyntheticSpec& spec) {
  return spec.kind == SyntheticKind::gaussian_blobs ? spec.num_blobs : 2;
}

Dataset generate_dataset(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("dataset: n must be >= 1");
  if (!(spec.noise >= 0.0 && spec.noise < 1.0)) {
    throw std::invalid_argument("dataset: noise must lie in [0, 1)");
  }
  if (spec.kind == SyntheticKind::gaussian_blobs && spec.num_blobs < 2) {
    throw std::invalid_argument("dataset: gaussian_blobs needs num_blobs >= 2");
  }

  Rng rng(spec.seed);
  // Separate stream for label flips: the point cloud for a given seed is
  // identical at every noise level, so noise only relabels.
  Rng noise_rng(mix_seed(spec.seed, 0x4015Eull));
  Dataset data;
  data.cols = 2;
  data.feature_names = {"x0", "x1"};
  data.features.reserve(static_cast<std::size_t>(spec.n) * 2);
  data.labels.reserve(static_cast<std::size_t>(spec.n));

  // Blob centres are drawn once, before any points.
  std::vector<double> centers;
  if (spec.kind == SyntheticKind::gaussian_blobs) {
    for (int k = 0; k < spec.num_blobs; ++k) {
      centers.push_back(rng.uniform(0.2, 0.8));
      centers.push_back(rng.uniform(0.2, 0.8));
    }
  }

  const auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (int i = 0; i < spec.n; ++i) {
    double x0 = 0.0;
    double x1 = 0.0;
    double label = 0.0;
    switch (spec.kind) {
      case SyntheticKind::identity_line: {
        x0 = rng.uniform();
        x1 = rng.uniform();
        label = x0 > x1 ? 1.0 : 0.0;
        break;
      }
      case SyntheticKind::xor_quadrants: {
        x0 = rng.uniform();
        x1 = rng.uniform();
        label = ((x0 > 0.5) != (x1 > 0.5)) ? 1.0 : 0.0;
        break;
      }
      case SyntheticKind::concentric_circles: {
        const int cls = i % 2;
        const double radius = cls == 0 ? rng.uniform(0.05, 0.18) : rng.uniform(0.28, 0.42);
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        x0 = 0.5 + radius * std::cos(angle);
        x1 = 0.5 + radius * std::sin(angle);
        label = static_cast<double>(cls);
        break;
      }
      case SyntheticKind::two_spirals: {
        const int cls = i % 2;
        const double t = rng.uniform();
        const double angle = 3.0 * std::numbers::pi * t + (cls == 0 ? 0.0 : std::numbers::pi);
        const double radius = 0.05 + 0.40 * t;
        x0 = clamp01(0.5 + radius * std::cos(angle));
        x1 = clamp01(0.5 + radius * std::sin(angle));
        label = static_cast<double>(cls);
        break;
      }
      case SyntheticKind::gaussian_blobs: {
        const int cls = i % spec.num_blobs;
        x0 = clamp01(centers[static_cast<std::size_t>(2 * cls)] + 0.05 * rng.normal());
        x1 = clamp01(centers[static_cast<std::size_t>(2 * cls) + 1] + 0.05 * rng.normal());
        label = static_cast<double>(cls);
        break;
      }
    }
    if (spec.noise > 0.0 && noise_rng.uniform() < spec.noise) {
      const int k = num_classes(spec);
      // Uniform over the other classes.
      const int shifted = 1 + noise_rng.uniform_int(k - 1);
      label = static_cast<double>((static_cast<int>(label) + shifted) % k);
    }
    const double row[2] = {x0, x1};
    data.push_row(row, label);
  }
  return data;
}

Dataset synthesize_embeddings(const Dataset& source, int embed_dim, double scale,
                              std::uint64_t seed) {
  validate_dataset(source);
  if (embed_dim < 1) throw std::invalid_argument("dataset: embed_dim must be >= 1");
  if (source.rows < 1) throw std::invalid_argument("dataset: empty source");

  // Random unit directions, one per embedding coordinate.
  Rng rng(seed);
  std::vector<double> directions(static_cast<std::size_t>(embed_dim) * source.cols);
  for (int e = 0; e < embed_dim; ++e) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int f = 0; f < source.cols; ++f) {
        const double g = rng.normal();
        directions[static_cast<std::size_t>(e) * source.cols + f] = g;
        norm_sq += g * g;
      }
    } while (norm_sq < 1e-12);
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (int f = 0; f < source.cols; ++f) {
      directions[static_cast<std::size_t>(e) * source.cols + f] *= inv_norm;
    }
  }
  std::vector<double> offsets(static_cast<std::size_t>(embed_dim));
  for (double& b : offsets) b = 0.2 * rng.normal();

  Dataset out;
  out.cols = embed_dim;
  out.feature_names.clear();
  for (int e = 0; e < embed_dim; ++e) out.feature_names.push_back("e" + std::to_string(e));
  std::vector<double> row(static_cast<std::size_t>(embed_dim));
  for (int i = 0; i < source.rows; ++i) {
    const auto x = source.row(i);
    for (int e = 0; e < embed_dim; ++e) {
      double dot = offsets[static_cast<std::size_t>(e)];
      for (int f = 0; f < source.cols; ++f) {
        dot += directions[static_cast<std::size_t>(e) * source.cols + f] * (x[f] - 0.5);
      }
      row[static_cast<std::size_t>(e)] = 1.0 / (1.0 + std::exp(-scale * dot));
    }
    out.push_row(row, source.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ------- CSV io -------

namespace {

std::string format_double(double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

double parse_cell(const std::string& cell, int line, int column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  // Tolerate surrounding spaces.
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end || begin == end) {
    throw std::invalid_argument("csv: non-numeric cell at row " + std::to_string(line) +
                                ", column " + std::to_string(column));
  }
  return value;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
  Dataset data;
  std::stringstream stream(text);
  std::string line;
  int line_number = 0;
  int expected_cells = -1;
  int label_index = schema.label_column;
  bool saw_header = false;

  while (std::getline(stream, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (!saw_header && schema.header) {
      saw_header = true;
      expected_cells = static_cast<int>(cells.size());
      if (label_index == -1) label_index = expected_cells - 1;
      if (label_index < 0 || label_index >= expected_cells) {
        throw std::invalid_argument("csv: label column " + std::to_string(schema.label_column) +
                                    " out of range for " + std::to_string(expected_cells) +
                                    " columns");
      }
      for (int c = 0; c < expected_cells; ++c) {
        if (c != label_index) data.feature_names.push_back(trim(cells[static_cast<std::size_t>(c)]));
      }
      continue;
    }
    if (expected_cells == -1) {
      expected_cells = static_cast<int>(cells.size());
      if (label_index == -1) label_index = expected_cells - 1;
      if (label_index < 0 || label_index >= expected_cells) {
        throw std::invalid_argument("csv: label column " + std::to_string(schema.label_column) +
                                    " out of range for " + std::to_string(expected_cells) +
                                    " columns");
      }
    }
    if (static_cast<int>(cells.size()) != expected_cells) {
      throw std::invalid_argument("csv: row " + std::to_string(line_number) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(expected_cells));
    }
    std::vector<double> row;
    double label = 0.0;
    for (int c = 0; c < expected_cells; ++c) {
      const double v = parse_cell(cells[static_cast<std::size_t>(c)], line_number, c + 1);
      if (c == label_index) {
        label = v;
      } else {
        row.push_back(v);
      }
    }
    data.push_row(row, label);
  }
  if (data.rows == 0) throw std::invalid_argument("csv: no data rows");
  validate_dataset(data);
  return data;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema);
}

std::string to_csv(const Dataset& data) {
  validate_dataset(data);
  std::string out;
  for (int c = 0; c < data.cols; ++c) {
    out += data.feature_names.empty() ? ("x" + std::to_string(c))
                                      : data.feature_names[static_cast<std::size_t>(c)];
    out += ',';
  }
  out += "label\n";
  for (int i = 0; i < data.rows; ++i) {
    const auto row = data.row(i);
    for (double v : row) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(data.labels[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_csv(data);
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ------- splits and batches -------

namespace {

Dataset take_rows(const Dataset& data, std::span<const int> indices) {
  Dataset out;
  out.cols = data.cols;
  out.feature_names = data.feature_names;
  for (int i : indices) out.push_row(data.row(i), data.labels[static_cast<std::size_t>(i)]);
  out.cols = data.cols;  // keep width even when indices is empty
  return out;
}

}  // namespace

SplitResult split_dataset(const Dataset& data, double train_fraction,
                          double valid_fraction, double test_fraction,
                          std::uint64_t seed) {
  validate_dataset(data);
  if (!(train_fraction > 0.0 && valid_fraction > 0.0 && test_fraction > 0.0)) {
    throw std::invalid_argument("split: fractions must be positive");
  }
  if (std::abs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
  if (data.rows < 3) throw std::invalid_argument("split: need at least one row per part");

  std::vector<int> indices(static_cast<std::size_t>(data.rows));
  for (int i = 0; i < data.rows; ++i) indices[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, 0x51B17ull));
  rng.shuffle(indices);

  int n_train = static_cast<int>(std::lround(train_fraction * data.rows));
  int n_valid = static_cast<int>(std::lround(valid_fraction * data.rows));
  n_train = std::clamp(n_train, 1, data.rows - 2);
  n_valid = std::clamp(n_valid, 1, data.rows - n_train - 1);

  const std::span<const int> all(indices);
  SplitResult result;
  result.train = take_rows(data, all.subspan(0, static_cast<std::size_t>(n_train)));
  result.valid = take_rows(data, all.subspan(static_cast<std::size_t>(n_train),
                                             static_cast<std::size_t>(n_valid)));
  result.test = take_rows(data, all.subspan(static_cast<std::size_t>(n_train + n_valid)));
  return result;
}

std::vector<std::vector<int>> make_batches(int n, int batch_size, std::uint64_t seed,
                                           int epoch) {
  if (n < 1) throw std::invalid_argument("batches: n must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace pforest
