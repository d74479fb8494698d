#include "dhia/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dhia/errors.hpp"

namespace dhia {

Var loss_rec(Tape& t, std::span<const Var> x, std::span<const Var> x_hat, const AvailabilityMask& mask) {
  if (x.size() != x_hat.size() || x.size() != mask.views()) throw DimensionError("loss_rec: view count mismatch");
  if (x.empty()) throw DimensionError("loss_rec: no views");
  const std::size_t n = mask.rows();
  Var total = t.constant(Matrix(1, 1));
  for (std::size_t v = 0; v < x.size(); ++v) {
    if (t.value(x[v]).rows() != n) throw DimensionError("loss_rec: batch rows do not match the mask");
    const auto w = mask.column_weights(v);
    total = add(t, total, sum(t, row_scale(t, square(t, sub(t, x[v], x_hat[v])), w)));
  }
  const double denom = static_cast<double>(x.size() * std::max<std::size_t>(n, 1));
  return scale(t, total, 1.0 / denom);
}

EbmResult loss_ebm(Tape& t, const ModelBundle& m, std::span<const Var> h_star, std::span<const Labels> labels,
                   std::span<const std::vector<RowOrigin>> origin, const AnchorPolicy& anchors) {
  const std::size_t views = h_star.size();
  if (labels.size() != views || origin.size() != views) throw DimensionError("loss_ebm: view count mismatch");
  const std::size_t k = m.k;

  EbmResult r;
  r.bank.members.assign(k, {});
  r.bank.energies.assign(k, Matrix());
  r.bank.anchors.assign(k, 0.0);
  r.bank.anchor_rows.assign(k, 0);
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t i = 0; i < labels[v].size(); ++i) {
      if (origin[v][i] == RowOrigin::placeholder) continue;
      if (labels[v][i] >= k) throw DimensionError("loss_ebm: label out of range");
      r.bank.members[labels[v][i]].push_back(RowRef{v, i});
    }
  }

  Var total = t.constant(Matrix(1, 1));
  for (std::size_t c = 0; c < k; ++c) {
    const auto& pool = r.bank.members[c];
    if (pool.empty()) {
      r.per_cluster.push_back(t.constant(Matrix(1, 1)));
      continue;
    }
    Var feats = select_rows(t, h_star, pool);
    Var e = energy(t, m, c, feats);
    const Matrix& ev = t.value(e);
    r.bank.energies[c] = ev;

    std::size_t arg = 0;
    for (std::size_t j = 1; j < ev.rows(); ++j)
      if (ev(j, 0) < ev(arg, 0)) arg = j;
    if (anchors.frozen_rows) arg = anchors.frozen_rows->at(c);
    r.bank.anchor_rows[c] = arg;
    r.bank.anchors[c] = ev(arg, 0);

    Var anchor;
    if (anchors.detach) {
      const double value = anchors.frozen_values ? anchors.frozen_values->at(c) : ev(arg, 0);
      r.bank.anchors[c] = value;
      anchor = t.constant(Matrix(1, 1, value));
    } else {
      const Var src[] = {e};
      const RowRef pick[] = {RowRef{0, arg}};
      anchor = select_rows(t, src, pick);
    }
    Var term = mean(t, abs(t, sub_scalar(t, e, anchor)));
    r.per_cluster.push_back(term);
    total = add(t, total, term);
  }
  r.loss = scale(t, total, 1.0 / static_cast<double>(k));
  return r;
}

CaaResult loss_caa(Tape& t, std::span<const Var> q_star, const SimilarityTable& table, double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be > 0");
  const std::size_t views = q_star.size();
  if (table.view_count() != views) throw DimensionError("loss_caa: view count mismatch");
  CaaResult r;
  r.ca_terms = Matrix(views, views);
  r.reg_terms = Matrix(views, views);
  Var total = t.constant(Matrix(1, 1));
  if (views < 2) {
    r.loss = total;
    return r;
  }
  const double k = static_cast<double>(t.value(q_star[0]).cols());

  std::vector<Var> neg_entropy(views);
  for (std::size_t v = 0; v < views; ++v) neg_entropy[v] = sum(t, xlogx(t, col_mean(t, q_star[v])));

  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t w = 0; w < views; ++w) {
      if (v == w) continue;
      Var logits = scale(t, matmul_nt(t, q_star[v], q_star[w]), 1.0 / tau);
      Var ca = scale(t, mean(t, diag(t, log_softmax_rows(t, logits))), -1.0);
      Var reg = scale(t, add(t, neg_entropy[v], neg_entropy[w]), 1.0 / k);
      r.ca_terms(v, w) = t.scalar(ca);
      r.reg_terms(v, w) = t.scalar(reg);
      total = add(t, total, add(t, scale(t, ca, table.sim(v, w)), reg));
    }
  }
  r.loss = scale(t, total, 0.5);
  return r;
}

LossReport loss_total(double rec, double ebm, double caa, double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  if (!std::isfinite(rec)) throw NumericError("non-finite rec (reconstruction) loss");
  if (!std::isfinite(ebm)) throw NumericError("non-finite ebm (energy alignment) loss");
  if (!std::isfinite(caa)) throw NumericError("non-finite caa (assignment alignment) loss");
  LossReport r;
  r.rec = rec;
  r.ebm = ebm;
  r.caa = caa;
  r.total = rec + alpha * ebm + beta * caa;
  return r;
}

Var combine_losses(Tape& t, Var rec, Var ebm, Var caa, double alpha, double beta) {
  return add(t, add(t, rec, scale(t, ebm, alpha)), scale(t, caa, beta));
}

}  // namespace dhia
