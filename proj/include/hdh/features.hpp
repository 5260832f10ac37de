#pragma once

#include "hdh/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hdh {

enum class FeatureFormat { csv, packed_binary };

enum class NormMode { none, minmax_symmetric, zscore_clamped };

std::string to_string(NormMode mode);
NormMode parse_norm_mode(const std::string& text);

/// Per-dimension affine map x' = clamp((x - shift) / scale, -1, 1).
/// A zero scale marks a constant dimension, which maps to 0.
struct NormStats {
    NormMode mode = NormMode::none;
    Vector shift;
    Vector scale;

    /// Identity stats for `dim` dimensions.
    static NormStats identity(std::size_t dim);

    std::size_t dim() const { return static_cast<std::size_t>(shift.size()); }

    /// Applies the map to one raw row.
    Vector apply(const Eigen::Ref<const Vector>& raw) const;

    bool operator==(const NormStats& other) const;
};

/// N x d matrix of finite feature rows with optional class labels.
/// Immutable after construction.
class FeatureMatrix {
public:
    FeatureMatrix(RowMatrix values, std::optional<std::vector<std::int32_t>> labels = std::nullopt,
                  NormStats norm_stats = {});

    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }

    const RowMatrix& values() const { return values_; }
    Vector row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)).transpose(); }

    bool has_labels() const { return labels_.has_value(); }
    const std::optional<std::vector<std::int32_t>>& labels() const { return labels_; }

    /// Stats that produced these values from raw input; identity for raw data.
    const NormStats& norm_stats() const { return norm_stats_; }

    /// Rows selected by index, in the given order. Labels are carried along.
    FeatureMatrix select(const std::vector<std::size_t>& indices) const;

private:
    RowMatrix values_;
    std::optional<std::vector<std::int32_t>> labels_;
    NormStats norm_stats_;
};

struct LoadOptions {
    FeatureFormat format = FeatureFormat::csv;
    /// CSV only: the final column is an integer class label.
    bool label_last = false;
};

FeatureMatrix load_features(const std::filesystem::path& path, const LoadOptions& options = {});

/// Parses CSV text directly; used by load_features and tests.
FeatureMatrix parse_csv(const std::string& text, bool label_last);

/// Writes the packed binary layout: "HDH1", u32 N, u32 d, u8 has_labels,
/// N*d f32 row-major, then N i32 labels. All little-endian.
void save_packed(const FeatureMatrix& m, const std::filesystem::path& path);

/// Writes plain CSV, labels (if any) as the last column.
void save_csv(const FeatureMatrix& m, const std::filesystem::path& path);

FeatureMatrix normalize(const FeatureMatrix& m, NormMode mode);

/// Normalizes every row of `raw` with previously recorded stats.
FeatureMatrix apply_norm(const NormStats& stats, const FeatureMatrix& raw);

/// M batches of batch_size distinct row indices drawn from one seeded permutation.
struct EpochPlan {
    std::size_t epoch_count = 0;
    std::size_t batch_size = 0;
    std::vector<std::size_t> order;
    std::uint64_t seed = 0;

    std::vector<std::size_t> batch(std::size_t epoch) const;
};

EpochPlan plan_epochs(std::size_t rows, std::size_t epoch_count, std::size_t batch_size,
                      std::uint64_t seed);

inline EpochPlan plan_epochs(const FeatureMatrix& m, std::size_t epoch_count,
                             std::size_t batch_size, std::uint64_t seed) {
    return plan_epochs(m.rows(), epoch_count, batch_size, seed);
}

} // namespace hdh
