#pragma once

// Grid evaluation of 1D/2D forests for visualization: grayscale PGM images,
// CSV dumps, and the total-variation statistic used to quantify how much a
// larger sigma smooths the landscape.

#include <string>
#include <vector>

#include "pforest/exec.hpp"
#include "pforest/forest.hpp"

namespace pforest {

struct GridSpec {
  int resolution = 200;  // cells per axis
  double lo = 0.0;
  double hi = 1.0;
};

// Output component 0 of the forest over cell centres.  sigma > 0 evaluates
// the smoothed forest; sigma == 0 the exact one.
//
// 2D: row-major resolution x resolution; row r holds x1 = hi - (r+0.5)*step
// (top row = largest x1, plot orientation), column j holds
// x0 = lo + (j+0.5)*step.
std::vector<double> evaluate_grid(const Forest& forest, double sigma,
                                  const GridSpec& grid,
                                  Execution exec = Execution::parallel);

// 1D profile at cell centres, ascending x.
std::vector<double> evaluate_profile(const Forest& forest, double sigma,
                                     const GridSpec& grid);

// Sum of absolute differences between horizontally and vertically adjacent
// cells; smaller = smoother image.
double total_variation(const std::vector<double>& values, int resolution);

// ASCII PGM (P2), 256 gray levels mapped linearly over [min, max] with
// darker shades for larger values; a constant grid renders white.
std::string to_pgm(const std::vector<double>& values, int resolution);

// One CSV line per grid row (2D) or "x,value" lines (1D profile).
std::string grid_to_csv(const std::vector<double>& values, int resolution);
std::string profile_to_csv(const std::vector<double>& values, const GridSpec& grid);

}  // namespace pforest
