#pragma once

#include "hdh/features.hpp"
#include "hdh/hash_code.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace hdh {

using ItemId = std::int64_t;

std::size_t hamming_distance(const HashCode& a, const HashCode& b);

struct Neighbor {
    ItemId id = 0;
    std::size_t distance = 0;

    bool operator==(const Neighbor&) const = default;
};

/// Linear-scan index over equal-length codes.
class HammingIndex {
public:
    HammingIndex() = default;
    /// Ids default to 0..n-1.
    explicit HammingIndex(std::vector<HashCode> codes, std::vector<ItemId> ids = {},
                          std::optional<std::vector<std::int32_t>> labels = std::nullopt);

    std::size_t size() const { return codes_.size(); }
    bool empty() const { return codes_.empty(); }
    /// Code length; 0 for an empty index.
    std::size_t bits() const { return bits_; }

    const std::vector<HashCode>& codes() const { return codes_; }
    const std::vector<ItemId>& ids() const { return ids_; }
    const std::optional<std::vector<std::int32_t>>& labels() const { return labels_; }

private:
    std::vector<HashCode> codes_;
    std::vector<ItemId> ids_;
    std::optional<std::vector<std::int32_t>> labels_;
    std::size_t bits_ = 0;
};

/// The k_results nearest items sorted by (distance, id).
std::vector<Neighbor> topk(const HammingIndex& index, const HashCode& query, std::size_t k_results);

/// Every item within `radius`, sorted by (distance, id).
std::vector<Neighbor> radius_search(const HammingIndex& index, const HashCode& query, std::size_t radius);

enum class GroundTruthMode { label, euclidean };

GroundTruthMode parse_ground_truth_mode(const std::string& text);

/// Relevant item ids for one query, sorted ascending.
using RelevanceSet = std::vector<ItemId>;

/// Relevance of data rows to each query row. A query row is never relevant to itself.
///   label:     rows sharing the query's label
///   euclidean: the n_gt nearest rows in feature space, ties by row index
/// Ids are row indices of `data`.
std::vector<RelevanceSet> ground_truth(const FeatureMatrix& data, std::span<const std::size_t> query_rows,
                                       GroundTruthMode mode, std::size_t n_gt = 0);

/// Relevance of database rows to external queries (query rows are not part of `database`).
std::vector<RelevanceSet> ground_truth_external(const FeatureMatrix& database, const FeatureMatrix& queries,
                                                GroundTruthMode mode, std::size_t n_gt = 0);

struct PrRow {
    std::size_t radius = 0;
    double recall = 0.0;
    double precision = 0.0;
    double mean_retrieved = 0.0;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

/// Radius sweep 0..k. `rows` has one entry per radius; `points` keeps the first
/// radius reaching each distinct recall, so recall is strictly increasing.
struct PrCurve {
    std::vector<PrRow> rows;
    std::vector<PrPoint> points;

    /// Trapezoidal area over `points`, with the curve extended flat from the first
    /// point back to recall 0.
    double auc() const;
};

struct PrQuery {
    HashCode code;
    /// Item excluded from retrieval, used when queries are drawn from the index itself.
    std::optional<ItemId> self;
};

/// Mean precision and recall over queries at every radius. A query that retrieves
/// nothing at some radius counts precision 1 there. Throws InputError on an empty
/// relevance set.
PrCurve precision_recall(const HammingIndex& index, std::span<const PrQuery> queries,
                         std::span<const RelevanceSet> truth);

PrCurve precision_recall(const HammingIndex& index, std::span<const HashCode> queries,
                         std::span<const RelevanceSet> truth);

/// Fraction of the top `k` results (self excluded) that are relevant, averaged over queries.
double precision_at(const HammingIndex& index, std::span<const PrQuery> queries,
                    std::span<const RelevanceSet> truth, std::size_t k);

/// "radius,recall,precision,mean_retrieved" CSV.
std::string format_pr_csv(const PrCurve& curve);

/// Codes file: "HDHC", u32 count, u32 k, then count * ceil(k/64) u64 words, little-endian.
void save_codes(std::span<const HashCode> codes, const std::filesystem::path& path);
std::vector<HashCode> load_codes(const std::filesystem::path& path);
std::string serialize_codes(std::span<const HashCode> codes);
std::vector<HashCode> deserialize_codes(const std::string& bytes);

/// One decimal id per line.
std::vector<ItemId> load_ids(const std::filesystem::path& path);
void save_ids(std::span<const ItemId> ids, const std::filesystem::path& path);

} // namespace hdh
