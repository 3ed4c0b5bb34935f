#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "noisyor/em.hpp"
#include "noisyor/learner.hpp"
#include "noisyor/sampler.hpp"

namespace noisyor {

/// Parameter-recovery experiment: draw parameters for `reps` networks over a
/// fixed structure, sample, and score each method's total L1 error per sample
/// size. Repetitions run concurrently on derived seeds, so results are
/// independent of thread count.
struct RecoveryConfig {
    NetworkStructure structure;
    GeneratorConfig gen;             // seed field ignored; per-rep seeds derive from `seed`
    std::vector<std::uint64_t> n_grid{100, 10000, 1000000};
    int reps = 10;
    std::uint64_t seed = 0;
    bool use_pairs = false;
    bool with_em = false;
    bool with_uniform = false;
    int em_inits = 4;
    EmOptions em;
    bool timing = true;              // false writes wall_ms = 0 for byte-stable output
    int threads = 0;                 // 0: NOISYOR_THREADS or hardware concurrency
};

struct RecoveryRow {
    int network = 0;
    std::uint64_t n = 0;
    std::string method;  // "mom", "em" or "uniform"
    double l1 = 0.0;
    double wall_ms = 0.0;
};

std::vector<RecoveryRow> run_recovery_experiment(const RecoveryConfig& config);

void write_recovery_csv(std::ostream& out, const std::vector<RecoveryRow>& rows);

/// Remaining-parameter curve of a structure's schedules. The depth -1 row
/// holds the total (non-leak) parameter count; the value of the last row is
/// what stays unlearnable. Curves for the triplets-only and triplets+pairs
/// schedules are both emitted.
struct DepthReportRow {
    std::string method;  // "triplets" or "triplets+pairs"
    int depth = 0;
    long remaining = 0;
};

std::vector<DepthReportRow> run_depth_report(const NetworkStructure& s);

void write_depth_csv(std::ostream& out, const std::vector<DepthReportRow>& rows);

/// Thread budget: NOISYOR_THREADS when set, hardware concurrency otherwise.
int thread_budget(int requested);

}  // namespace noisyor
