// Model file: "HDHM", u32 LE format version, u32 LE CRC-32 of the payload, then a
// line-oriented text payload. Every double is written with 17 significant digits so
// load(save(m)) is bitwise exact. The payload always ends with the line "end".

#include "hdh/errors.hpp"
#include "hdh/pipeline.hpp"
#include "io_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <sstream>

namespace hdh {

namespace {

constexpr char kModelMagic[4] = {'H', 'D', 'H', 'M'};
constexpr std::string_view kTrailer = "end\n";
constexpr std::size_t kHeaderBytes = 12;

std::uint32_t crc32_of(std::string_view payload) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
    return static_cast<std::uint32_t>(crc);
}

void write_vector(std::ostream& out, const char* name, const Vector& v) {
    out << name << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << detail::format_double(v[i]);
    out << '\n';
}

void write_matrix(std::ostream& out, const char* name, const Matrix& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << detail::format_double(m(i, j));
    }
    out << '\n';
}

/// Reads the payload line by line, checking each line's leading name.
class PayloadReader {
public:
    explicit PayloadReader(const std::string& text) : in_(text) {}

    std::string line() {
        std::string text;
        if (!std::getline(in_, text)) throw FormatError("model payload ends unexpectedly");
        return text;
    }

    std::istringstream expect(const std::string& name) {
        std::istringstream fields(line());
        std::string got;
        fields >> got;
        if (got != name) throw FormatError("model payload: expected '" + name + "', found '" + got + "'");
        return fields;
    }

    static double number(std::istringstream& fields) {
        std::string token;
        if (!(fields >> token)) throw FormatError("model payload: missing number");
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size()) {
            throw FormatError("model payload: bad number '" + token + "'");
        }
        return value;
    }

    static Eigen::Index count(std::istringstream& fields) {
        long long n = -1;
        if (!(fields >> n) || n < 0) throw FormatError("model payload: bad size field");
        return static_cast<Eigen::Index>(n);
    }

    Vector vector(const std::string& name) {
        auto fields = expect(name);
        Vector v(count(fields));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = number(fields);
        return v;
    }

    Matrix matrix(const std::string& name) {
        auto fields = expect(name);
        const auto rows = count(fields);
        const auto cols = count(fields);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number(fields);
        }
        return m;
    }

private:
    std::istringstream in_;
};

} // namespace

std::string serialize_model(const Model& model) {
    std::ostringstream payload;
    const std::string config_text = format_config(model.config);
    payload << "config_lines " << std::count(config_text.begin(), config_text.end(), '\n') << '\n';
    payload << config_text;
    payload << "norm_mode " << to_string(model.norm_stats.mode) << '\n';
    write_vector(payload, "norm_shift", model.norm_stats.shift);
    write_vector(payload, "norm_scale", model.norm_stats.scale);
    payload << "sae_layers " << model.sae.depth() << '\n';
    for (const auto& layer : model.sae.layers()) {
        write_matrix(payload, "enc_w", layer.enc_w);
        write_vector(payload, "enc_b", layer.enc_b);
        write_matrix(payload, "dec_w", layer.dec_w);
        write_vector(payload, "dec_b", layer.dec_b);
    }
    payload << "rbm_beta " << detail::format_double(model.rbm.beta) << '\n';
    payload << "rbm_cd_steps " << model.rbm.cd_steps << '\n';
    write_matrix(payload, "rbm_w", model.rbm.w);
    write_vector(payload, "rbm_vis_bias", model.rbm.vis_bias);
    write_vector(payload, "rbm_hid_bias", model.rbm.hid_bias);
    payload << kTrailer;

    const std::string body = payload.str();
    detail::ByteWriter out;
    out.raw(kModelMagic, 4);
    out.u32(model.format_version);
    out.u32(crc32_of(body));
    out.raw(body.data(), body.size());
    return out.bytes();
}

Model deserialize_model(const std::string& bytes) {
    if (bytes.size() < 4) throw TruncationError("model file is shorter than its header");
    if (!std::equal(kModelMagic, kModelMagic + 4, bytes.begin())) throw FormatError("not a model file: bad magic");
    if (bytes.size() < kHeaderBytes) throw TruncationError("model file is shorter than its header");

    detail::ByteReader header(bytes);
    header.skip(4);
    const auto version = header.u32();
    const auto stored_crc = header.u32();
    if (version != kModelFormatVersion) {
        throw VersionError("model format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kModelFormatVersion) + ")");
    }
    const std::string body = bytes.substr(kHeaderBytes);
    if (!body.ends_with(kTrailer)) throw TruncationError("model payload is truncated");
    if (crc32_of(body) != stored_crc) throw ChecksumError("model payload checksum mismatch");

    PayloadReader in(body);
    Model model;
    model.format_version = version;

    auto header_fields = in.expect("config_lines");
    const auto config_lines = PayloadReader::count(header_fields);
    std::string config_text;
    for (Eigen::Index i = 0; i < config_lines; ++i) config_text += in.line() + '\n';
    try {
        model.config = parse_config(config_text);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model payload: ") + e.what());
    }

    {
        auto fields = in.expect("norm_mode");
        std::string mode;
        fields >> mode;
        try {
            model.norm_stats.mode = parse_norm_mode(mode);
        } catch (const ConfigError& e) {
            throw FormatError(std::string("model payload: ") + e.what());
        }
    }
    model.norm_stats.shift = in.vector("norm_shift");
    model.norm_stats.scale = in.vector("norm_scale");

    auto layer_fields = in.expect("sae_layers");
    const auto depth = PayloadReader::count(layer_fields);
    std::vector<SaeLayer> layers;
    for (Eigen::Index l = 0; l < depth; ++l) {
        SaeLayer layer;
        layer.enc_w = in.matrix("enc_w");
        layer.enc_b = in.vector("enc_b");
        layer.dec_w = in.matrix("dec_w");
        layer.dec_b = in.vector("dec_b");
        layers.push_back(std::move(layer));
    }

    auto beta_fields = in.expect("rbm_beta");
    model.rbm.beta = PayloadReader::number(beta_fields);
    auto steps_fields = in.expect("rbm_cd_steps");
    model.rbm.cd_steps = static_cast<std::size_t>(PayloadReader::count(steps_fields));
    model.rbm.w = in.matrix("rbm_w");
    model.rbm.vis_bias = in.vector("rbm_vis_bias");
    model.rbm.hid_bias = in.vector("rbm_hid_bias");
    in.expect("end");

    try {
        model.sae = SaeStack(std::move(layers));
        model.rbm.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("model payload: ") + e.what());
    }
    if (model.sae.output_dim() != model.rbm.visible() || model.norm_stats.dim() != model.sae.input_dim()) {
        throw FormatError("model payload: component dimensions do not chain");
    }
    return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    detail::write_file(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) { return deserialize_model(detail::read_file(path)); }

} // namespace hdh
