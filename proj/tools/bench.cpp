// Microbenchmark: serial vs OpenMP-parallel execution of the three hot
// kernels (minibatch training gradient, Monte Carlo expectation, heatmap
// grid).  Wall-clock timing with std::chrono; prints one line per kernel
// and execution mode plus the speedup.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pforest/datasets.hpp"
#include "pforest/generate.hpp"
#include "pforest/heatmap.hpp"
#include "pforest/oracle.hpp"
#include "pforest/rng.hpp"
#include "pforest/training.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

struct Timing {
  double serial = 0.0;
  double parallel = 0.0;
};

void report(const char* name, const Timing& t) {
  std::printf("%-18s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx\n", name,
              1e3 * t.serial, 1e3 * t.parallel,
              t.parallel > 0.0 ? t.serial / t.parallel : 0.0);
}

template <typename F>
double time_best_of(int repeats, F&& body) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto start = clock_type::now();
    body();
    const double s = seconds_since(start);
    if (s < best) best = s;
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pforest;

  int repeats = 3;
  if (argc > 1) repeats = std::stoi(argv[1]);

#ifdef _OPENMP
  std::printf("OpenMP: %d thread(s)\n", omp_get_max_threads());
#else
  std::printf("OpenMP: not compiled in (both modes run serially)\n");
#endif

  // Shared fixtures: a mid-sized model over a 2D synthetic set.
  SyntheticSpec spec;
  spec.kind = SyntheticKind::xor_quadrants;
  spec.n = 2048;
  spec.seed = 7;
  const Dataset data = generate_dataset(spec);

  Rng rng(42);
  Model model;
  model.embed = make_mlp(2, {16, 8}, Activation::relu, Activation::sigmoid, rng);
  model.forest = generate_random_forest(32, 8, 4, LeafInit::binary01, 1, rng);
  model.perturb.sigma = 0.05;

  std::vector<int> batch(static_cast<std::size_t>(data.rows));
  for (int i = 0; i < data.rows; ++i) batch[static_cast<std::size_t>(i)] = i;

  // Kernel 1: one full-batch gradient step (the training hot loop).  Fresh
  // sessions per run so Adam state does not leak across timings.
  Timing grad;
  grad.serial = time_best_of(repeats, [&] {
    Model m = model;
    TrainSession session(m, AdamConfig{}, Execution::serial);
    session.step(data, batch, 0.05);
  });
  grad.parallel = time_best_of(repeats, [&] {
    Model m = model;
    TrainSession session(m, AdamConfig{}, Execution::parallel);
    session.step(data, batch, 0.05);
  });
  report("batch-gradient", grad);

  // Kernel 2: Monte Carlo expectation of the forest under input noise.
  const std::vector<double> mu(8, 0.5);
  constexpr long kSamples = 2'000'000;
  Timing mc;
  mc.serial = time_best_of(repeats, [&] {
    mc_expectation(model.forest, mu, 0.05, kSamples, 11, Execution::serial);
  });
  mc.parallel = time_best_of(repeats, [&] {
    mc_expectation(model.forest, mu, 0.05, kSamples, 11, Execution::parallel);
  });
  report("mc-expectation", mc);

  // Kernel 3: smoothed decision-surface grid for a 2D forest.
  Rng grid_rng(5);
  const Forest forest2d = generate_random_forest(16, 2, 5, LeafInit::binary01, 1, grid_rng);
  GridSpec grid;
  grid.resolution = 300;
  Timing heat;
  heat.serial = time_best_of(repeats, [&] {
    evaluate_grid(forest2d, 0.05, grid, Execution::serial);
  });
  heat.parallel = time_best_of(repeats, [&] {
    evaluate_grid(forest2d, 0.05, grid, Execution::parallel);
  });
  report("heatmap-grid", heat);

  return 0;
}
