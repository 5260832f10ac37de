#include "hdh/search.hpp"

#include "hdh/errors.hpp"
#include "io_util.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <numeric>
#include <sstream>

namespace hdh {

namespace {

constexpr char kCodesMagic[4] = {'H', 'D', 'H', 'C'};

void check_query(const HammingIndex& index, const HashCode& query) {
    if (!index.empty() && query.size() != index.bits()) {
        throw ShapeError("query has " + std::to_string(query.size()) + " bits, index codes have " +
                         std::to_string(index.bits()));
    }
}

bool by_distance_then_id(const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
}

std::vector<Neighbor> scan(const HammingIndex& index, const HashCode& query) {
    std::vector<Neighbor> all(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        all[i] = {index.ids()[i], hamming_distance(index.codes()[i], query)};
    }
    return all;
}

bool contains(const RelevanceSet& set, ItemId id) { return std::binary_search(set.begin(), set.end(), id); }

} // namespace

std::size_t hamming_distance(const HashCode& a, const HashCode& b) {
    if (a.size() != b.size()) {
        throw ShapeError("cannot compare a " + std::to_string(a.size()) + "-bit code with a " +
                         std::to_string(b.size()) + "-bit code");
    }
    std::size_t d = 0;
    const auto wa = a.words();
    const auto wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    return d;
}

HammingIndex::HammingIndex(std::vector<HashCode> codes, std::vector<ItemId> ids,
                           std::optional<std::vector<std::int32_t>> labels)
    : codes_(std::move(codes)), ids_(std::move(ids)), labels_(std::move(labels)) {
    if (ids_.empty()) {
        ids_.resize(codes_.size());
        std::iota(ids_.begin(), ids_.end(), ItemId{0});
    }
    if (ids_.size() != codes_.size()) throw ShapeError("index ids and codes differ in length");
    if (labels_ && labels_->size() != codes_.size()) throw ShapeError("index labels and codes differ in length");
    if (!codes_.empty()) bits_ = codes_.front().size();
    for (const auto& code : codes_) {
        if (code.size() != bits_) throw ShapeError("index codes must all have the same length");
    }
}

std::vector<Neighbor> topk(const HammingIndex& index, const HashCode& query, std::size_t k_results) {
    if (k_results == 0) throw ConfigError("topk needs k_results >= 1");
    check_query(index, query);
    auto all = scan(index, query);
    const std::size_t keep = std::min(k_results, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), by_distance_then_id);
    all.resize(keep);
    return all;
}

std::vector<Neighbor> radius_search(const HammingIndex& index, const HashCode& query, std::size_t radius) {
    check_query(index, query);
    auto all = scan(index, query);
    std::erase_if(all, [radius](const Neighbor& n) { return n.distance > radius; });
    std::sort(all.begin(), all.end(), by_distance_then_id);
    return all;
}

GroundTruthMode parse_ground_truth_mode(const std::string& text) {
    if (text == "label") return GroundTruthMode::label;
    if (text == "euclidean") return GroundTruthMode::euclidean;
    throw ConfigError("unknown ground-truth mode '" + text + "'");
}

namespace {

std::vector<RelevanceSet> ground_truth_impl(const FeatureMatrix& database, const FeatureMatrix& queries,
                                            std::span<const std::optional<std::size_t>> self_rows,
                                            GroundTruthMode mode, std::size_t n_gt) {
    std::vector<RelevanceSet> out(queries.rows());
    if (mode == GroundTruthMode::label) {
        if (!database.has_labels() || !queries.has_labels()) {
            throw ConfigError("label ground truth requires labels");
        }
        const auto& db_labels = *database.labels();
        const auto& q_labels = *queries.labels();
        for (std::size_t q = 0; q < queries.rows(); ++q) {
            for (std::size_t i = 0; i < database.rows(); ++i) {
                if (self_rows[q] == i) continue;
                if (db_labels[i] == q_labels[q]) out[q].push_back(static_cast<ItemId>(i));
            }
        }
        return out;
    }

    if (n_gt == 0) throw ConfigError("euclidean ground truth needs n_gt >= 1");
    if (database.dim() != queries.dim()) throw ShapeError("query and database dimensions differ");
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        const auto query = queries.values().row(static_cast<Eigen::Index>(q));
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(database.rows());
        for (std::size_t i = 0; i < database.rows(); ++i) {
            if (self_rows[q] == i) continue;
            dist.emplace_back((database.values().row(static_cast<Eigen::Index>(i)) - query).squaredNorm(), i);
        }
        const std::size_t keep = std::min(n_gt, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(keep), dist.end());
        for (std::size_t j = 0; j < keep; ++j) out[q].push_back(static_cast<ItemId>(dist[j].second));
        std::sort(out[q].begin(), out[q].end());
    }
    return out;
}

} // namespace

std::vector<RelevanceSet> ground_truth(const FeatureMatrix& data, std::span<const std::size_t> query_rows,
                                       GroundTruthMode mode, std::size_t n_gt) {
    std::vector<std::size_t> rows(query_rows.begin(), query_rows.end());
    std::vector<std::optional<std::size_t>> self(rows.begin(), rows.end());
    return ground_truth_impl(data, data.select(rows), self, mode, n_gt);
}

std::vector<RelevanceSet> ground_truth_external(const FeatureMatrix& database, const FeatureMatrix& queries,
                                                GroundTruthMode mode, std::size_t n_gt) {
    std::vector<std::optional<std::size_t>> self(queries.rows());
    return ground_truth_impl(database, queries, self, mode, n_gt);
}

double PrCurve::auc() const {
    if (points.empty()) return 0.0;
    double area = points.front().recall * points.front().precision;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].recall - points[i - 1].recall) * 0.5 * (points[i].precision + points[i - 1].precision);
    }
    return area;
}

PrCurve precision_recall(const HammingIndex& index, std::span<const PrQuery> queries,
                         std::span<const RelevanceSet> truth) {
    if (queries.size() != truth.size()) throw ShapeError("one relevance set is needed per query");
    if (queries.empty()) throw InputError("precision-recall needs at least one query");
    const std::size_t k = index.empty() ? queries.front().code.size() : index.bits();

    std::vector<double> precision_sum(k + 1, 0.0);
    std::vector<double> recall_sum(k + 1, 0.0);
    std::vector<double> retrieved_sum(k + 1, 0.0);

    for (std::size_t q = 0; q < queries.size(); ++q) {
        if (truth[q].empty()) throw InputError("query " + std::to_string(q) + " has an empty relevance set");
        check_query(index, queries[q].code);
        if (queries[q].code.size() != k) throw ShapeError("queries must all have the same length");

        // Histogram retrieved and relevant-retrieved counts by distance, then accumulate.
        std::vector<std::size_t> at(k + 1, 0);
        std::vector<std::size_t> hits_at(k + 1, 0);
        for (std::size_t i = 0; i < index.size(); ++i) {
            const ItemId id = index.ids()[i];
            if (queries[q].self == id) continue;
            const std::size_t d = hamming_distance(index.codes()[i], queries[q].code);
            ++at[d];
            if (contains(truth[q], id)) ++hits_at[d];
        }
        std::size_t retrieved = 0;
        std::size_t hits = 0;
        for (std::size_t r = 0; r <= k; ++r) {
            retrieved += at[r];
            hits += hits_at[r];
            precision_sum[r] += retrieved == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(retrieved);
            recall_sum[r] += static_cast<double>(hits) / static_cast<double>(truth[q].size());
            retrieved_sum[r] += static_cast<double>(retrieved);
        }
    }

    PrCurve curve;
    const auto n = static_cast<double>(queries.size());
    for (std::size_t r = 0; r <= k; ++r) {
        PrRow row{r, recall_sum[r] / n, precision_sum[r] / n, retrieved_sum[r] / n};
        curve.rows.push_back(row);
        if (curve.points.empty() || row.recall > curve.points.back().recall) {
            curve.points.push_back({row.recall, row.precision});
        }
    }
    return curve;
}

PrCurve precision_recall(const HammingIndex& index, std::span<const HashCode> queries,
                         std::span<const RelevanceSet> truth) {
    std::vector<PrQuery> wrapped;
    wrapped.reserve(queries.size());
    for (const auto& code : queries) wrapped.push_back({code, std::nullopt});
    return precision_recall(index, wrapped, truth);
}

double precision_at(const HammingIndex& index, std::span<const PrQuery> queries,
                    std::span<const RelevanceSet> truth, std::size_t k) {
    if (queries.size() != truth.size()) throw ShapeError("one relevance set is needed per query");
    if (queries.empty() || k == 0) throw InputError("precision@k needs queries and k >= 1");
    double total = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        // One extra result covers the excluded self match.
        auto found = topk(index, queries[q].code, k + 1);
        std::erase_if(found, [&](const Neighbor& nb) { return queries[q].self == nb.id; });
        if (found.size() > k) found.resize(k);
        if (found.empty()) continue;
        const auto hits = std::count_if(found.begin(), found.end(),
                                        [&](const Neighbor& nb) { return contains(truth[q], nb.id); });
        total += static_cast<double>(hits) / static_cast<double>(found.size());
    }
    return total / static_cast<double>(queries.size());
}

std::string format_pr_csv(const PrCurve& curve) {
    std::string out = "radius,recall,precision,mean_retrieved\n";
    for (const auto& row : curve.rows) {
        out += std::to_string(row.radius) + ',' + detail::format_double(row.recall) + ',' +
               detail::format_double(row.precision) + ',' + detail::format_double(row.mean_retrieved) + '\n';
    }
    return out;
}

std::string serialize_codes(std::span<const HashCode> codes) {
    const std::size_t k = codes.empty() ? 0 : codes.front().size();
    detail::ByteWriter out;
    out.raw(kCodesMagic, 4);
    out.u32(static_cast<std::uint32_t>(codes.size()));
    out.u32(static_cast<std::uint32_t>(k));
    for (const auto& code : codes) {
        if (code.size() != k) throw ShapeError("all codes in a codes file must have the same length");
        for (auto word : code.words()) out.u64(word);
    }
    return out.bytes();
}

std::vector<HashCode> deserialize_codes(const std::string& bytes) {
    if (bytes.size() < 4 || !std::equal(kCodesMagic, kCodesMagic + 4, bytes.begin())) {
        throw FormatError("not a codes file: missing HDHC magic");
    }
    detail::ByteReader in(bytes);
    in.skip(4);
    const auto count = in.u32();
    const auto k = in.u32();
    if (count > 0 && k == 0) throw FormatError("codes file declares zero-length codes");
    std::vector<HashCode> codes;
    codes.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<std::uint64_t> words(words_for_bits(k));
        for (auto& word : words) word = in.u64();
        try {
            codes.emplace_back(k, std::move(words));
        } catch (const Error& e) {
            throw FormatError("codes file entry " + std::to_string(i) + ": " + e.what());
        }
    }
    if (!in.at_end()) throw FormatError("codes file has trailing bytes");
    return codes;
}

void save_codes(std::span<const HashCode> codes, const std::filesystem::path& path) {
    detail::write_file(path, serialize_codes(codes));
}

std::vector<HashCode> load_codes(const std::filesystem::path& path) {
    return deserialize_codes(detail::read_file(path));
}

std::vector<ItemId> load_ids(const std::filesystem::path& path) {
    std::istringstream in(detail::read_file(path));
    std::vector<ItemId> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ItemId id = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), id);
        if (ec != std::errc() || ptr != line.data() + line.size()) throw ParseError(line_no, 1, "bad id '" + line + "'");
        ids.push_back(id);
    }
    return ids;
}

void save_ids(std::span<const ItemId> ids, const std::filesystem::path& path) {
    std::string text;
    for (auto id : ids) text += std::to_string(id) + '\n';
    detail::write_file(path, text);
}

} // namespace hdh
