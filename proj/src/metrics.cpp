#include "dhia/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dhia/errors.hpp"

namespace dhia {

namespace {

void check_lengths(const Labels& pred, const Labels& truth) {
  if (pred.size() != truth.size()) {
    throw DataError("label length mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                    std::to_string(truth.size()) + " true");
  }
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

Contingency contingency_table(const Labels& pred, const Labels& truth) {
  check_lengths(pred, truth);
  const std::size_t kp = pred.empty() ? 0 : *std::max_element(pred.begin(), pred.end()) + 1;
  const std::size_t kt = truth.empty() ? 0 : *std::max_element(truth.begin(), truth.end()) + 1;
  Contingency c(kp, std::vector<std::size_t>(kt, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++c[pred[i]][truth[i]];
  return c;
}

// Shortest augmenting path formulation with row/column potentials, O(n^3).
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost)
    if (row.size() != n) throw DimensionError("assignment cost matrix must be square");
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

AccuracyResult accuracy(const Labels& pred, const Labels& truth) {
  check_lengths(pred, truth);
  AccuracyResult r;
  if (pred.empty()) return r;
  const Contingency c = contingency_table(pred, truth);
  const std::size_t kp = c.size();
  const std::size_t kt = c.front().size();
  const std::size_t n = std::max(kp, kt);
  // Zero padding keeps the matching one-to-one when cluster and class counts differ.
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < kp; ++p)
    for (std::size_t t = 0; t < kt; ++t) cost[p][t] = -static_cast<double>(c[p][t]);
  const auto assign = solve_assignment(cost);
  std::size_t hits = 0;
  r.mapping.assign(kp, -1);
  for (std::size_t p = 0; p < kp; ++p) {
    if (assign[p] < kt) {
      r.mapping[p] = static_cast<long>(assign[p]);
      hits += c[p][assign[p]];
    }
  }
  r.acc = static_cast<double>(hits) / static_cast<double>(pred.size());
  return r;
}

double nmi_from_contingency(const Contingency& c) {
  double n = 0.0;
  const std::size_t kt = c.empty() ? 0 : c.front().size();
  std::vector<double> rows(c.size(), 0.0), cols(kt, 0.0);
  for (std::size_t p = 0; p < c.size(); ++p) {
    for (std::size_t t = 0; t < kt; ++t) {
      rows[p] += static_cast<double>(c[p][t]);
      cols[t] += static_cast<double>(c[p][t]);
      n += static_cast<double>(c[p][t]);
    }
  }
  if (n == 0.0) return 1.0;
  const double hp = entropy(rows, n);
  const double ht = entropy(cols, n);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t p = 0; p < c.size(); ++p) {
    for (std::size_t t = 0; t < kt; ++t) {
      const double nij = static_cast<double>(c[p][t]);
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (rows[p] * cols[t]));
    }
  }
  return std::clamp(mi / (0.5 * (hp + ht)), 0.0, 1.0);
}

double purity_from_contingency(const Contingency& c) {
  double n = 0.0;
  double hits = 0.0;
  for (const auto& row : c) {
    for (std::size_t x : row) n += static_cast<double>(x);
    if (!row.empty()) hits += static_cast<double>(*std::max_element(row.begin(), row.end()));
  }
  return n == 0.0 ? 0.0 : hits / n;
}

double nmi(const Labels& pred, const Labels& truth) { return nmi_from_contingency(contingency_table(pred, truth)); }

double purity(const Labels& pred, const Labels& truth) {
  return purity_from_contingency(contingency_table(pred, truth));
}

MetricsReport evaluate(const Labels& pred, const Labels& truth) {
  MetricsReport r;
  r.contingency = contingency_table(pred, truth);
  const auto a = accuracy(pred, truth);
  r.acc = a.acc;
  r.mapping = a.mapping;
  r.nmi = nmi_from_contingency(r.contingency);
  r.pur = purity_from_contingency(r.contingency);
  return r;
}

}  // namespace dhia
