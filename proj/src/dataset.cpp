#include "dhia/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dhia/errors.hpp"

namespace dhia {

namespace fs = std::filesystem;

std::size_t AvailabilityMask::row_sum(std::size_t i) const {
  std::size_t s = 0;
  for (std::size_t v = 0; v < views_; ++v) s += bits_[i * views_ + v];
  return s;
}

std::size_t AvailabilityMask::observed_count(std::size_t v) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += bits_[i * views_ + v];
  return s;
}

std::vector<std::size_t> AvailabilityMask::observed_rows(std::size_t v) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n_; ++i)
    if ((*this)(i, v)) rows.push_back(i);
  return rows;
}

std::vector<double> AvailabilityMask::column_weights(std::size_t v) const {
  std::vector<double> w(n_);
  for (std::size_t i = 0; i < n_; ++i) w[i] = (*this)(i, v) ? 1.0 : 0.0;
  return w;
}

bool AvailabilityMask::complete() const {
  return std::all_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

AvailabilityMask AvailabilityMask::slice(std::span<const std::size_t> rows) const {
  AvailabilityMask out(rows.size(), views_, false);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t v = 0; v < views_; ++v) out.set(r, v, (*this)(rows[r], v));
  return out;
}

Matrix AvailabilityMask::to_matrix() const {
  Matrix m(n_, views_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t v = 0; v < views_; ++v) m(i, v) = (*this)(i, v) ? 1.0 : 0.0;
  return m;
}

AvailabilityMask AvailabilityMask::from_matrix(const Matrix& m) {
  AvailabilityMask out(m.rows(), m.cols(), false);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t v = 0; v < m.cols(); ++v) {
      const double x = m(i, v);
      if (x != 0.0 && x != 1.0) {
        throw DataError("mask entry (" + std::to_string(i) + "," + std::to_string(v) + ") is not 0 or 1");
      }
      out.set(i, v, x == 1.0);
    }
  }
  return out;
}

std::vector<std::size_t> ViewDataset::dims() const {
  std::vector<std::size_t> d;
  for (const auto& v : views) d.push_back(v.cols());
  return d;
}

void ViewDataset::validate() const {
  if (views.empty()) throw DataError("dataset has no views");
  const std::size_t rows = n();
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rows() != rows) {
      throw DataError("view " + std::to_string(v) + " has " + std::to_string(views[v].rows()) + " rows, expected " +
                      std::to_string(rows));
    }
    if (!views[v].all_finite()) throw DataError("view " + std::to_string(v) + " contains non-finite values");
  }
  if (mask.rows() != rows || mask.views() != views.size()) throw DataError("mask shape does not match the views");
  for (std::size_t i = 0; i < rows; ++i) {
    if (mask.row_sum(i) == 0) throw DataError("sample " + std::to_string(i) + " observed in no view");
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (mask(i, v)) continue;
      for (double x : views[v].row(i))
        if (x != 0.0) throw DataError("missing row " + std::to_string(i) + " of view " + std::to_string(v) + " is not zero");
    }
  }
  if (labels && labels->size() != rows) {
    throw DataError("label count " + std::to_string(labels->size()) + " does not match sample count " +
                    std::to_string(rows));
  }
}

ViewDataset ViewDataset::batch(std::span<const std::size_t> rows) const {
  ViewDataset out;
  for (const auto& v : views) out.views.push_back(gather_rows(v, rows));
  out.mask = mask.slice(rows);
  if (labels) {
    Labels l;
    l.reserve(rows.size());
    for (std::size_t r : rows) l.push_back((*labels)[r]);
    out.labels = std::move(l);
  }
  return out;
}

void apply_mask(ViewDataset& ds) {
  for (std::size_t v = 0; v < ds.views.size(); ++v)
    for (std::size_t i = 0; i < ds.n(); ++i)
      if (!ds.mask(i, v)) std::fill(ds.views[v].row(i).begin(), ds.views[v].row(i).end(), 0.0);
}

void SyntheticSpec::validate() const {
  if (n == 0) throw ConfigError("synthetic n must be >= 1");
  if (v_count == 0) throw ConfigError("synthetic view count must be >= 1");
  if (k == 0) throw ConfigError("synthetic cluster count must be >= 1");
  if (latent_dim == 0) throw ConfigError("synthetic latent_dim must be >= 1");
  if (view_dims.size() != v_count) throw ConfigError("need one output dimension per view");
  for (std::size_t d : view_dims)
    if (d == 0) throw ConfigError("view dimensions must be >= 1");
  if (!(separation > 0.0)) throw ConfigError("separation must be > 0");
  if (!(noise >= 0.0)) throw ConfigError("noise scale must be >= 0");
}

ViewDataset synthesize(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Centres: scaled basis vectors give pairwise distance exactly `separation`.
  Matrix centres(spec.k, spec.latent_dim);
  if (spec.latent_dim >= spec.k) {
    for (std::size_t c = 0; c < spec.k; ++c) centres(c, c) = spec.separation / std::sqrt(2.0);
  } else {
    for (std::size_t c = 0; c < spec.k; ++c) {
      double norm = 0.0;
      for (double& x : centres.row(c)) {
        x = gauss(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (double& x : centres.row(c)) x *= spec.separation / (std::sqrt(2.0) * norm);
    }
  }

  Labels labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) labels[i] = i % spec.k;
  std::shuffle(labels.begin(), labels.end(), rng);

  Matrix latent(spec.n, spec.latent_dim);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (std::size_t j = 0; j < spec.latent_dim; ++j) latent(i, j) = centres(labels[i], j) + gauss(rng);

  ViewDataset ds;
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  for (std::size_t v = 0; v < spec.v_count; ++v) {
    Matrix map(spec.latent_dim, spec.view_dims[v]);
    for (double& x : map.data()) x = gauss(rng) * map_scale;
    Matrix x = matmul(latent, map);
    if (spec.noise > 0.0)
      for (double& e : x.data()) e += spec.noise * gauss(rng);
    ds.views.push_back(std::move(x));
  }
  ds.mask = AvailabilityMask(spec.n, spec.v_count, true);
  ds.labels = std::move(labels);
  return ds;
}

AvailabilityMask generate_mask(std::size_t n, std::size_t v_count, double eta, std::uint64_t seed) {
  if (v_count == 0) throw ConfigError("view count must be >= 1");
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("missing ratio must lie in [0, 1)");
  const auto per_view = static_cast<std::size_t>(std::llround(eta * static_cast<double>(n)));
  if (per_view * v_count > n * (v_count - 1)) {
    throw ConfigError("missing ratio " + format_double(eta) + " removes " + std::to_string(per_view * v_count) +
                      " entries but at most " + std::to_string(n * (v_count - 1)) +
                      " can be removed while every sample keeps one view");
  }

  std::mt19937_64 rng(seed);
  AvailabilityMask mask(n, v_count, true);
  std::vector<std::size_t> order(n);
  for (std::size_t v = 0; v < v_count; ++v) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = 0; r < per_view; ++r) mask.set(order[r], v, false);
  }

  // Resample rows left with no view: hand one of their missing slots to a row
  // that is observed in that view and can spare it. Column counts are preserved.
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.row_sum(i) != 0) continue;
    std::vector<std::size_t> view_order(v_count);
    for (std::size_t v = 0; v < v_count; ++v) view_order[v] = v;
    std::shuffle(view_order.begin(), view_order.end(), rng);
    bool fixed = false;
    for (std::size_t v : view_order) {
      std::vector<std::size_t> donors;
      for (std::size_t j = 0; j < n; ++j)
        if (mask(j, v) && mask.row_sum(j) >= 2) donors.push_back(j);
      if (donors.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
      const std::size_t j = donors[pick(rng)];
      mask.set(j, v, false);
      mask.set(i, v, true);
      fixed = true;
      break;
    }
    if (!fixed) throw ConfigError("could not place missing entries so that every sample keeps a view");
  }
  return mask;
}

ViewDataset synthesize_incomplete(const SyntheticSpec& spec, double eta) {
  ViewDataset ds = synthesize(spec);
  ds.mask = generate_mask(spec.n, spec.v_count, eta, spec.seed);
  apply_mask(ds);
  return ds;
}

ViewDataset normalize(ViewDataset ds) {
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    Matrix& x = ds.views[v];
    const auto rows = ds.mask.observed_rows(v);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (rows.empty()) break;
      double lo = x(rows.front(), c);
      double hi = lo;
      for (std::size_t r : rows) {
        lo = std::min(lo, x(r, c));
        hi = std::max(hi, x(r, c));
      }
      const double range = hi - lo;
      for (std::size_t r : rows) x(r, c) = range > 0.0 ? (x(r, c) - lo) / range : 0.0;
    }
  }
  apply_mask(ds);
  return ds;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view field, const fs::path& path, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": cannot parse '" + std::string(field) + "' as a number");
  }
  return x;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

Matrix read_csv_matrix(const fs::path& path) {
  auto in = open_input(path);
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      data.push_back(parse_double(rest.substr(0, comma), path, line_no));
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                      " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

void write_csv_matrix(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Labels read_labels(const fs::path& path) {
  auto in = open_input(path);
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s(line);
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    if (s.empty()) continue;
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected a non-negative integer label");
    }
    labels.push_back(value);
  }
  return labels;
}

void write_labels(const fs::path& path, const Labels& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t l : labels) out << l << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

ViewDataset load_views(std::span<const fs::path> view_paths, const std::optional<fs::path>& mask_path,
                       const std::optional<fs::path>& labels_path) {
  if (view_paths.empty()) throw DataError("no view files given");
  ViewDataset ds;
  for (const auto& p : view_paths) ds.views.push_back(read_csv_matrix(p));
  const std::size_t n = ds.views.front().rows();
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    if (ds.views[v].rows() != n) {
      throw DataError("row-count mismatch: " + view_paths[v].string() + " has " + std::to_string(ds.views[v].rows()) +
                      " rows, " + view_paths[0].string() + " has " + std::to_string(n));
    }
  }
  if (mask_path) {
    const Matrix m = read_csv_matrix(*mask_path);
    if (m.rows() != n || m.cols() != ds.views.size()) {
      throw DataError("mask " + mask_path->string() + " is " + shape_string(m) + ", expected " + std::to_string(n) +
                      "x" + std::to_string(ds.views.size()));
    }
    ds.mask = AvailabilityMask::from_matrix(m);
  } else {
    ds.mask = AvailabilityMask(n, ds.views.size(), true);
  }
  if (labels_path) ds.labels = read_labels(*labels_path);
  apply_mask(ds);
  ds.validate();
  return ds;
}

void write_dataset(const fs::path& dir, const ViewDataset& ds) {
  fs::create_directories(dir);
  for (std::size_t v = 0; v < ds.views.size(); ++v)
    write_csv_matrix(dir / ("view_" + std::to_string(v) + ".csv"), ds.views[v]);
  write_csv_matrix(dir / "mask.csv", ds.mask.to_matrix());
  if (ds.labels) write_labels(dir / "labels.txt", *ds.labels);
}

DatasetPaths dataset_paths_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  DatasetPaths paths;
  for (std::size_t v = 0;; ++v) {
    auto p = dir / ("view_" + std::to_string(v) + ".csv");
    if (!fs::exists(p)) break;
    paths.views.push_back(p);
  }
  if (paths.views.empty()) throw DataError("no view_0.csv in " + dir.string());
  if (fs::exists(dir / "mask.csv")) paths.mask = dir / "mask.csv";
  if (fs::exists(dir / "labels.txt")) paths.labels = dir / "labels.txt";
  return paths;
}

}  // namespace dhia
