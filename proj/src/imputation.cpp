#include "dhia/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dhia {

std::vector<std::size_t> co_observed(const AvailabilityMask& mask, std::size_t v, std::size_t w) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < mask.rows(); ++i)
    if (mask(i, v) && mask(i, w)) rows.push_back(i);
  return rows;
}

double pair_similarity(const Matrix& q_v, const Matrix& q_w, std::span<const std::size_t> rows,
                       const Labels& labels_v, const Labels& labels_w, double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be > 0");
  if (rows.empty()) throw ContractError("pair_similarity needs at least one co-observed sample");
  if (q_v.cols() != q_w.cols()) throw DimensionError("assignment widths differ between views");

  const Matrix a = gather_rows(q_v, rows);
  const Matrix b = gather_rows(q_w, rows);
  const Matrix s = matmul_nt(a, b);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double positive = std::exp(s(i, i) / tau);
    double denom = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const bool false_negative = j != i && labels_v[rows[i]] == labels_w[rows[j]];
      if (!false_negative) denom += std::exp(s(i, j) / tau);
    }
    total += positive / denom;
  }
  return total / static_cast<double>(rows.size());
}

SimilarityTable build_similarity_table(std::span<const Matrix> q, std::span<const Labels> labels,
                                       const AvailabilityMask& mask, double tau) {
  const std::size_t views = q.size();
  if (labels.size() != views || mask.views() != views) throw DimensionError("similarity table inputs disagree on view count");
  SimilarityTable t;
  t.sim = Matrix(views, views);
  t.co_counts.assign(views, std::vector<std::size_t>(views, 0));
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t w = 0; w < views; ++w) {
      if (v == w) continue;
      const auto rows = co_observed(mask, v, w);
      t.co_counts[v][w] = rows.size();
      t.sim(v, w) = rows.empty() ? 0.0 : pair_similarity(q[v], q[w], rows, labels[v], labels[w], tau);
    }
  }
  t.rankings.resize(views);
  for (std::size_t v = 0; v < views; ++v) {
    auto& r = t.rankings[v];
    for (std::size_t w = 0; w < views; ++w)
      if (w != v) r.push_back(w);
    std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) { return t.sim(v, a) > t.sim(v, b); });
  }
  return t;
}

std::size_t AssignmentImputation::imputed_count() const {
  std::size_t n = 0;
  for (std::size_t v = 0; v < source.size(); ++v)
    for (std::size_t s : source[v]) n += s != v ? 1 : 0;
  return n;
}

AssignmentImputation impute_assignments(std::span<const Matrix> q, const AvailabilityMask& mask,
                                        const SimilarityTable& table) {
  const std::size_t views = q.size();
  if (mask.views() != views || table.view_count() != views) throw DimensionError("imputation inputs disagree on view count");
  AssignmentImputation out;
  out.completed.assign(q.begin(), q.end());
  out.source.assign(views, std::vector<std::size_t>(mask.rows()));
  for (std::size_t v = 0; v < views; ++v) {
    if (q[v].rows() != mask.rows()) throw DimensionError("assignment rows do not match the mask");
    for (std::size_t i = 0; i < mask.rows(); ++i) {
      if (mask(i, v)) {
        out.source[v][i] = v;
        continue;
      }
      const auto& ranking = table.rankings[v];
      const auto it = std::find_if(ranking.begin(), ranking.end(), [&](std::size_t w) { return mask(i, w); });
      if (it == ranking.end()) throw DataError("sample " + std::to_string(i) + " observed in no view");
      out.source[v][i] = *it;
      std::copy(q[*it].row(i).begin(), q[*it].row(i).end(), out.completed[v].row(i).begin());
    }
  }
  return out;
}

ClusterPrototypes compute_prototypes(const Matrix& h, const AvailabilityMask& mask, std::size_t view,
                                     const Labels& labels, std::size_t k) {
  if (h.rows() != mask.rows() || labels.size() != mask.rows()) throw DimensionError("prototype inputs disagree on row count");
  ClusterPrototypes p;
  p.observed = mask.observed_rows(view);
  if (p.observed.empty()) {
    throw NoObservedRowsError("view " + std::to_string(view) + " has no observed rows in this batch");
  }
  const std::size_t d = h.cols();
  p.members.assign(k, {});
  for (std::size_t j : p.observed) {
    if (labels[j] >= k) throw DimensionError("label out of range");
    p.members[labels[j]].push_back(j);
  }

  auto mean_of = [&](const std::vector<std::size_t>& rows, std::span<double> out) {
    for (std::size_t j : rows)
      for (std::size_t c = 0; c < d; ++c) out[c] += h(j, c);
    const double n = static_cast<double>(rows.size());
    for (double& x : out) x /= n;
  };

  p.fallback = Matrix(1, d);
  mean_of(p.observed, p.fallback.row(0));
  p.centers = Matrix(k, d);
  p.valid.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    if (p.members[c].empty()) {
      std::copy(p.fallback.row(0).begin(), p.fallback.row(0).end(), p.centers.row(c).begin());
    } else {
      mean_of(p.members[c], p.centers.row(c));
      p.valid[c] = true;
    }
  }
  return p;
}

std::size_t FeatureImputation::imputed_count() const {
  std::size_t n = 0;
  for (const auto& o : origin) n += static_cast<std::size_t>(std::count(o.begin(), o.end(), RowOrigin::imputed));
  return n;
}

FeatureImputation impute_features(std::span<const Matrix> h, const AvailabilityMask& mask,
                                  std::span<const Matrix> completed_q,
                                  std::span<const std::optional<ClusterPrototypes>> prototypes) {
  const std::size_t views = h.size();
  if (completed_q.size() != views || prototypes.size() != views || mask.views() != views)
    throw DimensionError("feature imputation inputs disagree on view count");
  FeatureImputation out;
  out.completed.assign(h.begin(), h.end());
  out.origin.assign(views, std::vector<RowOrigin>(mask.rows(), RowOrigin::observed));
  for (std::size_t v = 0; v < views; ++v) {
    const auto labels = row_argmax(completed_q[v]);
    for (std::size_t i = 0; i < mask.rows(); ++i) {
      if (mask(i, v)) continue;
      if (!prototypes[v]) {
        out.origin[v][i] = RowOrigin::placeholder;
        continue;
      }
      const auto src = prototypes[v]->centers.row(labels[i]);
      std::copy(src.begin(), src.end(), out.completed[v].row(i).begin());
      out.origin[v][i] = RowOrigin::imputed;
    }
  }
  return out;
}

}  // namespace dhia
