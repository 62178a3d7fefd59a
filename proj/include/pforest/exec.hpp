#pragma once

namespace pforest {

// Execution policy for data-parallel kernels.  Every parallel kernel has a
// serial twin that runs the same arithmetic in the same order; results are
// bitwise identical because parallel variants reduce in a fixed order
// (per-example or per-shard slots merged in index order).
enum class Execution {
  serial,
  parallel,
};

}  // namespace pforest
