#include "dhia/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dhia/errors.hpp"

namespace dhia {

void ParamStore::add(Matrix value) {
  first_moment.push_back(Matrix::zeros_like(value));
  second_moment.push_back(Matrix::zeros_like(value));
  values.push_back(std::move(value));
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

void ParamStore::reset_optimizer_state() {
  for (std::size_t i = 0; i < values.size(); ++i) {
    first_moment[i] = Matrix::zeros_like(values[i]);
    second_moment[i] = Matrix::zeros_like(values[i]);
  }
  step = 0;
}

std::vector<Matrix> Gradients::of(const ParamStore& store) const {
  if (auto it = by_store_.find(&store); it != by_store_.end()) return it->second;
  std::vector<Matrix> zeros;
  zeros.reserve(store.values.size());
  for (const auto& v : store.values) zeros.push_back(Matrix::zeros_like(v));
  return zeros;
}

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::parameter(const ParamStore& store, std::size_t index) {
  if (index >= store.values.size()) throw ContractError("parameter index out of range");
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var{it->second};
  Var v = record(store.values[index], nullptr);
  nodes_[v.id].store = &store;
  nodes_[v.id].tensor = index;
  param_nodes_.emplace(key, v.id);
  return v;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ContractError("node is not a scalar: " + shape_string(m));
  return m(0, 0);
}

Var Tape::record(Matrix value, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), Matrix{}, std::move(fn), nullptr, 0});
  return Var{nodes_.size() - 1};
}

Matrix& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix::zeros_like(n.value);
  return n.grad;
}

Gradients Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw ContractError("loss node not on tape");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw ContractError("backward requires a scalar loss, got " + shape_string(lv));
  if (loss.id + 1 != nodes_.size()) throw ContractError("loss must be the last node on the tape");
  if (!std::isfinite(lv(0, 0))) throw NumericError("backward on non-finite loss");

  for (auto& n : nodes_) n.grad = Matrix{};
  grad(loss.id)(0, 0) = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (nodes_[id].grad.empty() || !nodes_[id].backward) continue;
    nodes_[id].backward(*this, id);
  }

  Gradients out;
  for (auto& n : nodes_) {
    if (n.store == nullptr) continue;
    auto& slot = out.by_store_[n.store];
    if (slot.empty()) {
      for (const auto& v : n.store->values) slot.push_back(Matrix::zeros_like(v));
    }
    if (!n.grad.empty()) slot[n.tensor] += n.grad;
  }
  return out;
}

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw DimensionError(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
}

template <class F>
Var unary(Tape& t, Var a, Matrix out, F local_grad) {
  return t.record(std::move(out), [a, local_grad](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& x = tp.value_at(a.id);
    const Matrix& y = tp.value_at(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * local_grad(x.data()[i], y.data()[i]);
  });
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Matrix out = matmul(t.value(a), t.value(b));
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.grad(a.id) += matmul_nt(g, tp.value_at(b.id));
    tp.grad(b.id) += matmul_tn(tp.value_at(a.id), g);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Matrix out = matmul_nt(t.value(a), t.value(b));
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.grad(a.id) += matmul(g, tp.value_at(b.id));
    tp.grad(b.id) += matmul_tn(g, tp.value_at(a.id));
  });
}

Var add_row_bias(Tape& t, Var x, Var bias) {
  const Matrix& xv = t.value(x);
  const Matrix& bv = t.value(bias);
  require(bv.rows() == 1 && bv.cols() == xv.cols(), "add_row_bias", xv, bv);
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
  return t.record(std::move(out), [x, bias](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.grad(x.id) += g;
    Matrix& gb = tp.grad(bias.id);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
  });
}

Var add(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "add", t.value(a), t.value(b));
  Matrix out = t.value(a);
  out += t.value(b);
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.grad(a.id) += g;
    tp.grad(b.id) += g;
  });
}

Var sub(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "sub", t.value(a), t.value(b));
  Matrix out = t.value(a);
  const Matrix& bv = t.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv.data()[i];
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.grad(a.id) += g;
    Matrix& gb = tp.grad(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
  });
}

Var sub_scalar(Tape& t, Var a, Var s) {
  const Matrix& sv = t.value(s);
  require(sv.rows() == 1 && sv.cols() == 1, "sub_scalar", t.value(a), sv);
  Matrix out = t.value(a);
  for (double& x : out.data()) x -= sv(0, 0);
  return t.record(std::move(out), [a, s](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    tp.grad(a.id) += g;
    double total = 0.0;
    for (double x : g.data()) total += x;
    tp.grad(s.id)(0, 0) -= total;
  });
}

Var hadamard(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "hadamard", t.value(a), t.value(b));
  Matrix out = t.value(a);
  const Matrix& bv = t.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& av = tp.value_at(a.id);
    const Matrix& bv2 = tp.value_at(b.id);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv2.data()[i];
    Matrix& gb = tp.grad(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
  });
}

Var scale(Tape& t, Var a, double c) {
  Matrix out = t.value(a);
  out *= c;
  return t.record(std::move(out), [a, c](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += c * g.data()[i];
  });
}

Var relu(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return unary(t, a, std::move(out), [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data()) x = softplus_value(x);
  return unary(t, a, std::move(out), [](double x, double) { return sigmoid(x); });
}

Var softmax_rows(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& x : r) {
      x = std::exp(x - mx);
      z += x;
    }
    for (double& x : r) x /= z;
  }
  return t.record(std::move(out), [a](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& y = tp.value_at(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double x : r) z += std::exp(x - mx);
    const double lse = mx + std::log(z);
    for (double& x : r) x -= lse;
  }
  return t.record(std::move(out), [a](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& y = tp.value_at(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gs += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
    }
  });
}

Var abs(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data()) x = std::abs(x);
  // Subgradient 0 at the kink.
  return unary(t, a, std::move(out), [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data()) x *= x;
  return unary(t, a, std::move(out), [](double x, double) { return 2.0 * x; });
}

Var sum(Tape& t, Var a) {
  double s = 0.0;
  for (double x : t.value(a).data()) s += x;
  return t.record(Matrix(1, 1, s), [a](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)(0, 0);
    for (double& x : tp.grad(a.id).data()) x += g;
  });
}

Var mean(Tape& t, Var a) {
  const std::size_t n = t.value(a).size();
  if (n == 0) throw DimensionError("mean of empty matrix");
  return scale(t, sum(t, a), 1.0 / static_cast<double>(n));
}

Var col_mean(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  if (av.rows() == 0) throw DimensionError("col_mean of matrix with no rows");
  Matrix out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += av(i, j);
  const double n = static_cast<double>(av.rows());
  for (double& x : out.data()) x /= n;
  return t.record(std::move(out), [a, n](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) / n;
  });
}

Var diag(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  require(av.rows() == av.cols(), "diag", av, av);
  Matrix out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) out(i, 0) = av(i, i);
  return t.record(std::move(out), [a](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < g.rows(); ++i) ga(i, i) += g(i, 0);
  });
}

Var row_scale(Tape& t, Var a, std::span<const double> w) {
  const Matrix& av = t.value(a);
  if (w.size() != av.rows()) {
    throw DimensionError("row_scale: " + std::to_string(w.size()) + " weights for " + shape_string(av));
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& x : out.row(i)) x *= w[i];
  std::vector<double> weights(w.begin(), w.end());
  return t.record(std::move(out), [a, weights = std::move(weights)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += weights[i] * g(i, j);
  });
}

Var select_rows(Tape& t, std::span<const Var> sources, std::span<const RowRef> picks) {
  if (sources.empty()) throw DimensionError("select_rows: no sources");
  const std::size_t cols = t.value(sources[0]).cols();
  for (Var s : sources) require(t.value(s).cols() == cols, "select_rows", t.value(sources[0]), t.value(s));
  Matrix out(picks.size(), cols);
  for (std::size_t r = 0; r < picks.size(); ++r) {
    if (picks[r].source >= sources.size()) throw DimensionError("select_rows: source index out of range");
    const Matrix& src = t.value(sources[picks[r].source]);
    if (picks[r].row >= src.rows()) throw DimensionError("select_rows: row index out of range");
    std::copy(src.row(picks[r].row).begin(), src.row(picks[r].row).end(), out.row(r).begin());
  }
  std::vector<Var> srcs(sources.begin(), sources.end());
  std::vector<RowRef> refs(picks.begin(), picks.end());
  return t.record(std::move(out), [srcs = std::move(srcs), refs = std::move(refs)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    for (std::size_t r = 0; r < refs.size(); ++r) {
      Matrix& gs = tp.grad(srcs[refs[r].source].id);
      auto dst = gs.row(refs[r].row);
      const auto gr = g.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += gr[j];
    }
  });
}

Var group_mean_rows(Tape& t, Var a, const std::vector<std::vector<std::size_t>>& groups) {
  const Matrix& av = t.value(a);
  Matrix out(groups.size(), av.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw DimensionError("group_mean_rows: empty group");
    auto o = out.row(g);
    for (std::size_t r : groups[g]) {
      if (r >= av.rows()) throw DimensionError("group_mean_rows: row index out of range");
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += av(r, j);
    }
    const double n = static_cast<double>(groups[g].size());
    for (double& x : o) x /= n;
  }
  return t.record(std::move(out), [a, groups](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const double n = static_cast<double>(groups[k].size());
      for (std::size_t r : groups[k])
        for (std::size_t j = 0; j < g.cols(); ++j) ga(r, j) += g(k, j) / n;
    }
  });
}

Var xlogx(Tape& t, Var a, double floor) {
  Matrix out = t.value(a);
  for (double& x : out.data()) x = x == 0.0 ? 0.0 : x * std::log(std::max(x, floor));
  return unary(t, a, std::move(out), [floor](double x, double) {
    return x > floor ? std::log(x) + 1.0 : std::log(floor);
  });
}

}  // namespace dhia
