#pragma once

#include <filesystem>
#include <string>

#include "fedsim/config.hpp"

namespace fedsim {

/// Executes every (algorithm x seed) run of the suite and writes, under
/// out_dir:
///   <algorithm>_seed<seed>.csv           per-round log
///   <algorithm>_seed<seed>_sampler.jsonl bandit state per round
///   summary.json                         config echo, per-run metrics,
///                                        per-algorithm aggregates
///   comparison.csv                       mean +/- std accuracy and
///                                        rounds-to-baseline speedups
///   meta.json                            wall-clock timings (the only
///                                        non-reproducible output)
/// A failing run is recorded and the rest continue. Returns 0 iff every
/// run succeeded.
int run_suite(const ExperimentSuite& suite, const std::filesystem::path& out_dir,
              int threads = 1);

} // namespace fedsim
