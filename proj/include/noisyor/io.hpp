#pragma once

#include <optional>
#include <string>

#include "noisyor/learner.hpp"
#include "noisyor/moments.hpp"
#include "noisyor/sampler.hpp"
#include "noisyor/scheduler.hpp"

namespace noisyor {

/// Network file: JSON {"n", "m", "edges": [[i,j],...]} plus optional "priors",
/// "failures" ([[i,j,f],...]) and "leaks". Structure-only files omit all three.
struct NetworkFile {
    NetworkStructure structure;
    std::optional<NoisyOrParameters> params;
};

NetworkFile read_network(const std::string& path);
void write_network(const std::string& path, const NetworkStructure& s,
                   const NoisyOrParameters* params);

/// Samples: CSV with header "s0,s1,...". The packed variant stores 8 symptoms
/// per byte (bit 0 = first symptom of the byte) behind a 16-byte header of
/// magic "NOBS", little-endian u32 m and u64 N.
SampleBatch read_samples_csv(const std::string& path);
void write_samples_csv(const std::string& path, const SampleBatch& batch);
SampleBatch read_samples_packed(const std::string& path);
void write_samples_packed(const std::string& path, const SampleBatch& batch);

/// Picks packed or CSV format from the extension (".bin" / anything else).
SampleBatch read_samples(const std::string& path);
void write_samples(const std::string& path, const SampleBatch& batch);

/// Statistics store: JSON {"N", "sets": [{"ids", "counts"}]}; outcome index is
/// the binary number with bit 0 = first id.
StatStore read_store(const std::string& path);
void write_store(const std::string& path, const StatStore& store);

/// Schedule: JSON {"rounds": [[{kind, disease, symptoms, adjust, targets}]],
/// "unlearnable": [...]}. Depths are reconstructed against the structure.
Schedule read_schedule(const std::string& path, const NetworkStructure& s);
void write_schedule(const std::string& path, const Schedule& schedule);

/// Estimation report: parameters in the network-file layout plus "depths",
/// "failed_steps" and "unlearned".
EstimationReport read_report(const std::string& path, const NetworkStructure& s);
void write_report(const std::string& path, const NetworkStructure& s,
                  const EstimationReport& report);

/// Deterministic float formatting for CSV output.
std::string format_double(double value);

}  // namespace noisyor
