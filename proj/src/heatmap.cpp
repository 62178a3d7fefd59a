#include "pforest/heatmap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "pforest/smoothing.hpp"

namespace pforest {

namespace {

void check_grid(const GridSpec& grid) {
  if (grid.resolution < 1) throw std::invalid_argument("grid: resolution must be >= 1");
  if (!(grid.lo < grid.hi)) throw std::invalid_argument("grid: need lo < hi");
}

std::string format_double(double v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

}  // namespace

std::vector<double> evaluate_grid(const Forest& forest, double sigma,
                                  const GridSpec& grid, Execution exec) {
  validate_forest(forest);
  check_grid(grid);
  if (forest.input_dim != 2) {
    throw std::invalid_argument("grid evaluation requires a 2D forest (input_dim == 2)");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("grid: sigma must be >= 0");

  const int res = grid.resolution;
  const double step = (grid.hi - grid.lo) / res;
  std::vector<double> values(static_cast<std::size_t>(res) * res, 0.0);
  const SmoothedForest cache(forest);

  const auto body = [&](int r) {
    SmoothWorkspace ws;
    std::vector<double> out(static_cast<std::size_t>(forest.output_dim));
    const double x1 = grid.hi - (r + 0.5) * step;  // top row = largest x1
    for (int j = 0; j < res; ++j) {
      const double mu[2] = {grid.lo + (j + 0.5) * step, x1};
      if (sigma > 0.0) {
        cache.evaluate(mu, sigma, out.data(), nullptr, nullptr, ws);
      } else {
        evaluate_forest_into(forest, mu, out.data());
      }
      values[static_cast<std::size_t>(r) * res + j] = out[0];
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < res; ++r) body(r);
  } else {
    for (int r = 0; r < res; ++r) body(r);
  }
  return values;
}

std::vector<double> evaluate_profile(const Forest& forest, double sigma,
                                     const GridSpec& grid) {
  validate_forest(forest);
  check_grid(grid);
  if (forest.input_dim != 1) {
    throw std::invalid_argument("profile evaluation requires a 1D forest (input_dim == 1)");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("profile: sigma must be >= 0");

  const int res = grid.resolution;
  const double step = (grid.hi - grid.lo) / res;
  std::vector<double> values(static_cast<std::size_t>(res), 0.0);
  const SmoothedForest cache(forest);
  SmoothWorkspace ws;
  std::vector<double> out(static_cast<std::size_t>(forest.output_dim));
  for (int j = 0; j < res; ++j) {
    const double mu[1] = {grid.lo + (j + 0.5) * step};
    if (sigma > 0.0) {
      cache.evaluate(mu, sigma, out.data(), nullptr, nullptr, ws);
    } else {
      evaluate_forest_into(forest, mu, out.data());
    }
    values[static_cast<std::size_t>(j)] = out[0];
  }
  return values;
}

double total_variation(const std::vector<double>& values, int resolution) {
  if (values.size() != static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution)) {
    throw std::invalid_argument("total_variation: values are not resolution^2");
  }
  double tv = 0.0;
  for (int r = 0; r < resolution; ++r) {
    for (int j = 0; j < resolution; ++j) {
      const double v = values[static_cast<std::size_t>(r) * resolution + j];
      if (j + 1 < resolution) {
        tv += std::abs(values[static_cast<std::size_t>(r) * resolution + j + 1] - v);
      }
      if (r + 1 < resolution) {
        tv += std::abs(values[(static_cast<std::size_t>(r) + 1) * resolution + j] - v);
      }
    }
  }
  return tv;
}

std::string to_pgm(const std::vector<double>& values, int resolution) {
  if (values.size() != static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution)) {
    throw std::invalid_argument("to_pgm: values are not resolution^2");
  }
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double span = *max_it - lo;

  std::string out = "P2\n" + std::to_string(resolution) + " " + std::to_string(resolution) +
                    "\n255\n";
  for (int r = 0; r < resolution; ++r) {
    for (int j = 0; j < resolution; ++j) {
      const double v = values[static_cast<std::size_t>(r) * resolution + j];
      // Darker = larger; a flat grid renders white.
      const int gray =
          span > 0.0 ? 255 - static_cast<int>(std::lround(255.0 * (v - lo) / span)) : 255;
      out += std::to_string(gray);
      out += (j + 1 < resolution) ? ' ' : '\n';
    }
  }
  return out;
}

std::string grid_to_csv(const std::vector<double>& values, int resolution) {
  if (values.size() != static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution)) {
    throw std::invalid_argument("grid_to_csv: values are not resolution^2");
  }
  std::string out;
  for (int r = 0; r < resolution; ++r) {
    for (int j = 0; j < resolution; ++j) {
      out += format_double(values[static_cast<std::size_t>(r) * resolution + j]);
      out += (j + 1 < resolution) ? ',' : '\n';
    }
  }
  return out;
}

std::string profile_to_csv(const std::vector<double>& values, const GridSpec& grid) {
  const double step = (grid.hi - grid.lo) / grid.resolution;
  std::string out = "x,value\n";
  for (std::size_t j = 0; j < values.size(); ++j) {
    out += format_double(grid.lo + (static_cast<double>(j) + 0.5) * step);
    out += ',';
    out += format_double(values[j]);
    out += '\n';
  }
  return out;
}

}  // namespace pforest
