#pragma once

// Glue shared by the command-line tool and the acceptance suite: splitting
// both modalities, evaluating a trained model in either direction, the
// random-code reference, and the reconstruction comparison.

#include <vector>

#include "cyclehash/config.hpp"
#include "cyclehash/dataset.hpp"
#include "cyclehash/reconstruction.hpp"
#include "cyclehash/retrieval.hpp"

namespace cyclehash {

struct ExperimentData {
  Split u;
  Split v;
};

/// Splits both sets with the configured fraction and seed.
ExperimentData prepare_data(const RunConfig& cfg, const LabeledFeatureSet& set_u,
                            const LabeledFeatureSet& set_v);

/// Queries from the held-out split of the query modality against the
/// database split of the other modality.
RetrievalTask direction_task(const CrossModalModel& model, const ExperimentData& data,
                             Direction direction);

/// Same queries and database with uniformly random K-bit codes.
RetrievalTask random_code_task(const ExperimentData& data, Direction direction,
                               std::size_t bits, std::uint64_t seed);

/// Row indices (into a, into b) of samples that share a pairing id, in the
/// order of a.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> match_pairs(
    const LabeledFeatureSet& a, const LabeledFeatureSet& b);

/// Reconstruction trace of the held-out u features. CYC-DGH decodes each
/// sample from its own code; the ITQ variant is fit on the co-indexed
/// database pairs and rebuilds each u sample from the code of its paired v
/// sample.
std::vector<TracePoint> reconstruction_trace(ReconMethod method, const CrossModalModel* model,
                                             const ExperimentData& data, std::size_t bits,
                                             std::size_t stride, std::uint64_t seed);

}  // namespace cyclehash
