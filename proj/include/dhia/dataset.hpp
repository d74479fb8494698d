#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dhia/matrix.hpp"

namespace dhia {

using Labels = std::vector<std::size_t>;

// N x V availability indicator. Entry (i, v) is true when sample i is observed in view v.
class AvailabilityMask {
 public:
  AvailabilityMask() = default;
  AvailabilityMask(std::size_t n, std::size_t views, bool observed = true)
      : n_(n), views_(views), bits_(n * views, observed ? 1 : 0) {}

  std::size_t rows() const noexcept { return n_; }
  std::size_t views() const noexcept { return views_; }

  bool operator()(std::size_t i, std::size_t v) const { return bits_[i * views_ + v] != 0; }
  void set(std::size_t i, std::size_t v, bool observed) { bits_[i * views_ + v] = observed ? 1 : 0; }

  std::size_t row_sum(std::size_t i) const;
  std::size_t observed_count(std::size_t v) const;
  std::vector<std::size_t> observed_rows(std::size_t v) const;
  // 1.0 where observed, 0.0 otherwise, for view v.
  std::vector<double> column_weights(std::size_t v) const;
  bool complete() const;

  AvailabilityMask slice(std::span<const std::size_t> rows) const;
  Matrix to_matrix() const;
  static AvailabilityMask from_matrix(const Matrix& m);  // throws DataError on non-binary entries

  friend bool operator==(const AvailabilityMask&, const AvailabilityMask&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t views_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct ViewDataset {
  std::vector<Matrix> views;  // each N x d_v; missing rows are zero
  AvailabilityMask mask;
  std::optional<Labels> labels;

  std::size_t n() const { return views.empty() ? 0 : views.front().rows(); }
  std::size_t view_count() const { return views.size(); }
  std::vector<std::size_t> dims() const;

  // Throws DataError describing the first violated invariant.
  void validate() const;
  // Rows `rows` of every view, the mask and the labels, in the given order.
  ViewDataset batch(std::span<const std::size_t> rows) const;
};

// Zeroes every row whose mask entry is 0.
void apply_mask(ViewDataset& ds);

struct SyntheticSpec {
  std::size_t n = 300;
  std::size_t v_count = 2;
  std::size_t k = 3;
  std::size_t latent_dim = 8;
  std::vector<std::size_t> view_dims{20, 20};
  double separation = 6.0;  // distance between latent cluster centres, in units of the within-cluster sd
  double noise = 0.1;       // sd of per-view additive noise
  std::uint64_t seed = 0;

  void validate() const;
};

ViewDataset synthesize(const SyntheticSpec& spec);
// synthesize() followed by generate_mask(n, v_count, eta, spec.seed) and apply_mask().
ViewDataset synthesize_incomplete(const SyntheticSpec& spec, double eta);

// Exactly round(eta * n) missing rows per view; every row keeps at least one view.
AvailabilityMask generate_mask(std::size_t n, std::size_t v_count, double eta, std::uint64_t seed);

// Per-view, per-column min-max scaling over observed rows; constant columns map to 0.
ViewDataset normalize(ViewDataset ds);

Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);
Labels read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const Labels& labels);

ViewDataset load_views(std::span<const std::filesystem::path> view_paths,
                       const std::optional<std::filesystem::path>& mask_path,
                       const std::optional<std::filesystem::path>& labels_path = std::nullopt);

// Writes view_<v>.csv, mask.csv and (when present) labels.txt into `dir`.
void write_dataset(const std::filesystem::path& dir, const ViewDataset& ds);

// Paths of a dataset directory written by write_dataset.
struct DatasetPaths {
  std::vector<std::filesystem::path> views;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> labels;
};
DatasetPaths dataset_paths_in(const std::filesystem::path& dir);

std::string format_double(double x);

}  // namespace dhia
