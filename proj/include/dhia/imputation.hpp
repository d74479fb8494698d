#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dhia/dataset.hpp"
#include "dhia/errors.hpp"
#include "dhia/matrix.hpp"

namespace dhia {

// Label-aware cross-view similarity scores and the per-view reference rankings.
struct SimilarityTable {
  Matrix sim;                                        // V x V, directional, diagonal unused (0)
  std::vector<std::vector<std::size_t>> rankings;    // rankings[v]: other views, most similar first
  std::vector<std::vector<std::size_t>> co_counts;   // |I_{v,w}|

  std::size_t view_count() const { return rankings.size(); }
};

// Indices observed in both views, ascending.
std::vector<std::size_t> co_observed(const AvailabilityMask& mask, std::size_t v, std::size_t w);

// Mean over i in `rows` of exp(S(i,i)/tau) / sum_{j in B_i} exp(S(i,j)/tau), where S = Q_v Q_w^T
// restricted to `rows` and B_i keeps j == i plus every j whose label in w differs from i's label in v.
// Labels are indexed by batch row. Throws ContractError for an empty row set or tau <= 0.
double pair_similarity(const Matrix& q_v, const Matrix& q_w, std::span<const std::size_t> rows,
                       const Labels& labels_v, const Labels& labels_w, double tau);

// Rankings sort by descending similarity; ties go to the lower view index.
// Pairs without co-observed samples score 0.
SimilarityTable build_similarity_table(std::span<const Matrix> q, std::span<const Labels> labels,
                                       const AvailabilityMask& mask, double tau);

struct AssignmentImputation {
  std::vector<Matrix> completed;                    // Q*_v
  std::vector<std::vector<std::size_t>> source;     // source[v][i]: view whose row i was used (v if observed)

  std::size_t imputed_count() const;
};

AssignmentImputation impute_assignments(std::span<const Matrix> q, const AvailabilityMask& mask,
                                        const SimilarityTable& table);

// Thrown when a view has no observed row to build prototypes from.
struct NoObservedRowsError : DataError {
  explicit NoObservedRowsError(const std::string& what) : DataError(what) {}
};

struct ClusterPrototypes {
  Matrix centers;                                   // K x d; invalid rows hold the fallback
  std::vector<bool> valid;
  Matrix fallback;                                  // 1 x d mean of every observed latent
  std::vector<std::vector<std::size_t>> members;    // observed rows per cluster, ascending
  std::vector<std::size_t> observed;                // all observed rows, ascending
};

ClusterPrototypes compute_prototypes(const Matrix& h, const AvailabilityMask& mask, std::size_t view,
                                     const Labels& labels, std::size_t k);

enum class RowOrigin : std::uint8_t { observed, imputed, placeholder };

struct FeatureImputation {
  std::vector<Matrix> completed;                    // H*_v
  std::vector<std::vector<RowOrigin>> origin;

  std::size_t imputed_count() const;
};

// Missing row (i, v) takes the prototype of argmax_k Q*_v(i, k). A view without
// prototypes keeps its placeholder latents and marks those rows as placeholders.
FeatureImputation impute_features(std::span<const Matrix> h, const AvailabilityMask& mask,
                                  std::span<const Matrix> completed_q,
                                  std::span<const std::optional<ClusterPrototypes>> prototypes);

}  // namespace dhia
