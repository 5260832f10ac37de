#include "hdh/features.hpp"

#include "hdh/errors.hpp"
#include "io_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hdh {

namespace {

constexpr char kPackedMagic[4] = {'H', 'D', 'H', '1'};

// Number of standard deviations mapped onto [-1, 1] by zscore_clamped.
constexpr double kZscoreSpan = 3.0;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc() || ptr != last) {
        throw ParseError(row, col, "'" + std::string(cell) + "' is not a number");
    }
    if (!std::isfinite(value)) {
        throw ParseError(row, col, "non-finite value '" + std::string(cell) + "'");
    }
    return value;
}

std::int32_t parse_label(std::string_view cell, std::size_t row, std::size_t col) {
    std::int32_t value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(row, col, "'" + std::string(cell) + "' is not an integer label");
    }
    return value;
}

FeatureMatrix load_packed(const std::string& bytes) {
    detail::ByteReader in(bytes);
    if (bytes.size() < 4 || !std::equal(kPackedMagic, kPackedMagic + 4, bytes.begin())) {
        throw FormatError("packed features: missing HDH1 magic");
    }
    in.skip(4);
    const auto n = in.u32();
    const auto d = in.u32();
    const auto has_labels = in.u8();
    if (n == 0 || d == 0) throw FormatError("packed features: empty matrix");
    if (has_labels > 1) throw FormatError("packed features: has_labels must be 0 or 1");

    RowMatrix values(n, d);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j) {
            const float v = in.f32();
            if (!std::isfinite(v)) throw ParseError(i + 1, j + 1, "non-finite value");
            values(i, j) = v;
        }
    }
    std::optional<std::vector<std::int32_t>> labels;
    if (has_labels) {
        labels.emplace(n);
        for (auto& label : *labels) label = in.i32();
    }
    if (!in.at_end()) throw FormatError("packed features: trailing bytes after payload");
    return FeatureMatrix(std::move(values), std::move(labels));
}

} // namespace

std::string to_string(NormMode mode) {
    switch (mode) {
    case NormMode::none: return "none";
    case NormMode::minmax_symmetric: return "minmax_symmetric";
    case NormMode::zscore_clamped: return "zscore_clamped";
    }
    return "none";
}

NormMode parse_norm_mode(const std::string& text) {
    if (text == "none") return NormMode::none;
    if (text == "minmax_symmetric") return NormMode::minmax_symmetric;
    if (text == "zscore_clamped") return NormMode::zscore_clamped;
    throw ConfigError("unknown normalization mode '" + text + "'");
}

NormStats NormStats::identity(std::size_t dim) {
    NormStats s;
    s.shift = Vector::Zero(static_cast<Eigen::Index>(dim));
    s.scale = Vector::Ones(static_cast<Eigen::Index>(dim));
    return s;
}

Vector NormStats::apply(const Eigen::Ref<const Vector>& raw) const {
    if (raw.size() != shift.size()) {
        throw ShapeError("normalization expects " + std::to_string(shift.size()) +
                         " dimensions, got " + std::to_string(raw.size()));
    }
    Vector out(raw.size());
    for (Eigen::Index j = 0; j < raw.size(); ++j) {
        if (scale[j] == 0.0) {
            out[j] = 0.0;
        } else {
            out[j] = std::clamp((raw[j] - shift[j]) / scale[j], -1.0, 1.0);
        }
    }
    return out;
}

bool NormStats::operator==(const NormStats& other) const {
    return mode == other.mode && shift.size() == other.shift.size() && shift == other.shift &&
           scale == other.scale;
}

FeatureMatrix::FeatureMatrix(RowMatrix values, std::optional<std::vector<std::int32_t>> labels,
                             NormStats norm_stats)
    : values_(std::move(values)), labels_(std::move(labels)), norm_stats_(std::move(norm_stats)) {
    if (values_.rows() == 0 || values_.cols() == 0) {
        throw FormatError("feature matrix must have at least one row and one column");
    }
    if (!values_.allFinite()) throw FormatError("feature matrix contains non-finite values");
    if (labels_ && labels_->size() != rows()) {
        throw ShapeError("label count " + std::to_string(labels_->size()) +
                         " does not match row count " + std::to_string(rows()));
    }
    if (norm_stats_.shift.size() == 0) norm_stats_ = NormStats::identity(dim());
    if (norm_stats_.dim() != dim()) throw ShapeError("normalization stats dimension mismatch");
}

FeatureMatrix FeatureMatrix::select(const std::vector<std::size_t>& indices) const {
    RowMatrix out(static_cast<Eigen::Index>(indices.size()), values_.cols());
    std::optional<std::vector<std::int32_t>> out_labels;
    if (labels_) out_labels.emplace();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows()) throw CapacityError("row index out of range");
        out.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(indices[i]));
        if (labels_) out_labels->push_back((*labels_)[indices[i]]);
    }
    return FeatureMatrix(std::move(out), std::move(out_labels), norm_stats_);
}

FeatureMatrix parse_csv(const std::string& text, bool label_last) {
    std::vector<std::vector<double>> rows;
    std::vector<std::int32_t> labels;
    std::size_t width = 0;
    std::size_t line_no = 0;

    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_commas(line);
        if (width == 0) {
            width = cells.size();
            if (label_last && width < 2) {
                throw FormatError("row " + std::to_string(line_no) +
                                  ": a label column needs at least one feature column");
            }
        } else if (cells.size() != width) {
            throw FormatError("ragged rows: row " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(width));
        }
        const std::size_t feature_cols = label_last ? width - 1 : width;
        std::vector<double> row(feature_cols);
        for (std::size_t j = 0; j < feature_cols; ++j) row[j] = parse_cell(cells[j], line_no, j + 1);
        if (label_last) labels.push_back(parse_label(cells.back(), line_no, width));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("feature file contains no rows");

    RowMatrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    std::optional<std::vector<std::int32_t>> maybe_labels;
    if (label_last) maybe_labels = std::move(labels);
    return FeatureMatrix(std::move(values), std::move(maybe_labels));
}

FeatureMatrix load_features(const std::filesystem::path& path, const LoadOptions& options) {
    const std::string bytes = detail::read_file(path);
    if (options.format == FeatureFormat::packed_binary) return load_packed(bytes);
    return parse_csv(bytes, options.label_last);
}

void save_packed(const FeatureMatrix& m, const std::filesystem::path& path) {
    detail::ByteWriter out;
    out.raw(kPackedMagic, 4);
    out.u32(static_cast<std::uint32_t>(m.rows()));
    out.u32(static_cast<std::uint32_t>(m.dim()));
    out.u8(m.has_labels() ? 1 : 0);
    for (Eigen::Index i = 0; i < m.values().rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values().cols(); ++j) out.f32(static_cast<float>(m.values()(i, j)));
    }
    if (m.has_labels()) {
        for (auto label : *m.labels()) out.i32(label);
    }
    detail::write_file(path, out.bytes());
}

void save_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    std::string text;
    for (Eigen::Index i = 0; i < m.values().rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values().cols(); ++j) {
            if (j > 0) text += ',';
            text += detail::format_double(m.values()(i, j));
        }
        if (m.has_labels()) text += "," + std::to_string((*m.labels())[static_cast<std::size_t>(i)]);
        text += '\n';
    }
    detail::write_file(path, text);
}

FeatureMatrix normalize(const FeatureMatrix& m, NormMode mode) {
    const auto& x = m.values();
    NormStats stats;
    stats.mode = mode;
    switch (mode) {
    case NormMode::none:
        stats = NormStats::identity(m.dim());
        break;
    case NormMode::minmax_symmetric: {
        const Vector lo = x.colwise().minCoeff().transpose();
        const Vector hi = x.colwise().maxCoeff().transpose();
        stats.shift = (hi + lo) / 2.0;
        stats.scale = (hi - lo) / 2.0;
        break;
    }
    case NormMode::zscore_clamped: {
        const Vector mean = x.colwise().mean().transpose();
        stats.shift = mean;
        stats.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - mean[j]).square().mean();
            stats.scale[j] = kZscoreSpan * std::sqrt(var);
        }
        break;
    }
    }
    return apply_norm(stats, m);
}

FeatureMatrix apply_norm(const NormStats& stats, const FeatureMatrix& raw) {
    RowMatrix out(raw.values().rows(), raw.values().cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        out.row(i) = stats.apply(raw.values().row(i).transpose()).transpose();
    }
    return FeatureMatrix(std::move(out), raw.labels(), stats);
}

std::vector<std::size_t> EpochPlan::batch(std::size_t epoch) const {
    if (epoch >= epoch_count) throw CapacityError("epoch index out of range");
    auto first = order.begin() + static_cast<std::ptrdiff_t>(epoch * batch_size);
    return {first, first + static_cast<std::ptrdiff_t>(batch_size)};
}

EpochPlan plan_epochs(std::size_t rows, std::size_t epoch_count, std::size_t batch_size,
                      std::uint64_t seed) {
    if (epoch_count == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be >= 1");
    if (epoch_count * batch_size > rows) {
        throw CapacityError("epoch plan needs " + std::to_string(epoch_count * batch_size) +
                            " rows but only " + std::to_string(rows) + " are available");
    }
    EpochPlan plan;
    plan.epoch_count = epoch_count;
    plan.batch_size = batch_size;
    plan.seed = seed;
    plan.order.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) plan.order[i] = i;

    // Fisher-Yates with rejection sampling, so the permutation is the same on every platform.
    Engine engine(seed);
    for (std::size_t i = rows; i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw = engine();
        while (draw >= limit) draw = engine();
        std::swap(plan.order[i - 1], plan.order[static_cast<std::size_t>(draw % bound)]);
    }
    plan.order.resize(epoch_count * batch_size);
    return plan;
}

} // namespace hdh
