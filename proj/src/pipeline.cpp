#include "hdh/pipeline.hpp"

#include "hdh/errors.hpp"
#include "io_util.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace hdh {

std::string to_string(InitMode mode) { return mode == InitMode::paper ? "paper" : "symmetric"; }

InitMode parse_init_mode(const std::string& text) {
    if (text == "paper") return InitMode::paper;
    if (text == "symmetric") return InitMode::symmetric;
    throw ConfigError("unknown init_mode '" + text + "'");
}

void TrainingConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("invalid config: " + what);
    };
    require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
    require(std::isfinite(mu) && mu >= 0.0, "mu must be >= 0");
    require(std::isfinite(beta) && beta >= 1.0, "beta must be >= 1");
    require(std::isfinite(alpha) && alpha > 0.0, "alpha must be > 0");
    require(layer_dims.size() >= 2, "layer_dims needs an input dimension and at least one layer");
    for (auto d : layer_dims) require(d >= 1, "layer_dims entries must be >= 1");
    require(code_bits >= 1, "code_bits must be >= 1");
    require(outer_iters >= 1, "outer_iters must be >= 1");
    require(!eps_sae || *eps_sae >= 0.0, "eps_sae must be >= 0");
    require(!eps_rbm || *eps_rbm >= 0.0, "eps_rbm must be >= 0");
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(cd_steps >= 1, "cd_steps must be >= 1");
}

namespace {

const std::vector<std::string>& required_keys() {
    static const std::vector<std::string> keys = {"lambda",      "mu",     "alpha",      "layer_dims", "code_bits",
                                                  "outer_iters", "epochs", "batch_size", "seed"};
    return keys;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "lambda",     "mu",       "beta",       "alpha", "layer_dims",         "code_bits",
        "outer_iters", "eps_sae", "eps_rbm",    "epochs", "batch_size",        "cd_steps",
        "seed",       "decorrelation_mode",     "init_mode", "max_repeats_per_iter", "norm_mode"};
    return keys;
}

std::string trimmed(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const char* first = value.data();
    if (!value.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, value.data() + value.size(), out);
    if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a non-negative integer");
    }
    return out;
}

std::optional<double> to_eps(const std::string& key, const std::string& value) {
    if (value == "auto") return std::nullopt;
    return to_double(key, value);
}

std::string eps_text(const std::optional<double>& eps) { return eps ? detail::format_double(*eps) : "auto"; }

void fill_uniform(Matrix& m, double lo, double hi, Engine& engine) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = lo + (hi - lo) * unit_uniform(engine);
    }
}

void fill_uniform(Vector& v, double lo, double hi, Engine& engine) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = lo + (hi - lo) * unit_uniform(engine);
}

std::pair<double, double> init_range(InitMode mode, std::size_t fan_in, std::size_t fan_out) {
    if (mode == InitMode::paper) return {0.0, 1.0};
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return {-s, s};
}

class Trainer {
public:
    Trainer(const TrainingConfig& config, Model& model, const TrainOptions& options)
        : config_(config), model_(model), options_(options), reg_(config.regularization()) {}

    /// One autoencoder update of every layer on `batch`; returns the summed layer objectives.
    double sae_step(const RowMatrix& batch) {
        double total = 0.0;
        RowMatrix input = batch;
        for (std::size_t l = 0; l < model_.sae.depth(); ++l) {
            SaeLayer& layer = model_.sae.layer(l);
            const auto eval = evaluate(layer, input, reg_);
            total += eval.objective.total();
            layer = sgd_step(layer, eval.grads, config_.alpha);
            if (l + 1 < model_.sae.depth()) input = forward_batch(layer, input);
        }
        return total;
    }

    /// One RBM update on the binarized stack outputs of `batch`.
    double rbm_step(const RowMatrix& batch, std::uint64_t chain_seed) {
        const RowMatrix visible = binarize_pm_batch(encode_stack_batch(model_.sae, batch));
        const RowMatrix v_end = sample_chains(model_.rbm, visible, chain_seed, options_.threads);

        double objective = reg_objective_terms(model_.rbm, visible, reg_);
        for (Eigen::Index i = 0; i < visible.rows(); ++i) {
            objective += free_energy(model_.rbm, visible.row(i).transpose()) -
                         free_energy(model_.rbm, v_end.row(i).transpose());
        }
        const auto grads = cd_gradients_from_chain(model_.rbm, visible, v_end, reg_);
        model_.rbm = update(model_.rbm, grads, config_.alpha);
        return objective;
    }

    double sae_pass(const std::vector<RowMatrix>& batches, std::size_t iteration) {
        double total = 0.0;
        for (const auto& batch : batches) total += sae_step(batch);
        check_sae(total, iteration);
        return total;
    }

    double rbm_pass(const std::vector<RowMatrix>& batches, std::size_t iteration, Engine& engine) {
        double total = 0.0;
        for (const auto& batch : batches) total += rbm_step(batch, engine());
        check_rbm(total, iteration);
        return total;
    }

    void check_sae(double objective, std::size_t iteration) const {
        bool ok = std::isfinite(objective);
        for (const auto& layer : model_.sae.layers()) ok = ok && layer.all_finite();
        if (!ok) throw DivergenceError("sae", static_cast<int>(iteration));
    }

    void check_rbm(double objective, std::size_t iteration) const {
        if (!std::isfinite(objective) || !model_.rbm.all_finite()) {
            throw DivergenceError("rbm", static_cast<int>(iteration));
        }
    }

private:
    const TrainingConfig& config_;
    Model& model_;
    const TrainOptions& options_;
    Regularization reg_;
};

} // namespace

std::string format_config(const TrainingConfig& c) {
    std::ostringstream out;
    out << "lambda=" << detail::format_double(c.lambda) << '\n';
    out << "mu=" << detail::format_double(c.mu) << '\n';
    out << "beta=" << detail::format_double(c.beta) << '\n';
    out << "alpha=" << detail::format_double(c.alpha) << '\n';
    out << "layer_dims=";
    for (std::size_t i = 0; i < c.layer_dims.size(); ++i) out << (i ? "," : "") << c.layer_dims[i];
    out << '\n';
    out << "code_bits=" << c.code_bits << '\n';
    out << "outer_iters=" << c.outer_iters << '\n';
    out << "eps_sae=" << eps_text(c.eps_sae) << '\n';
    out << "eps_rbm=" << eps_text(c.eps_rbm) << '\n';
    out << "epochs=" << c.epochs << '\n';
    out << "batch_size=" << c.batch_size << '\n';
    out << "cd_steps=" << c.cd_steps << '\n';
    out << "seed=" << c.seed << '\n';
    out << "decorrelation_mode=" << to_string(c.decorrelation_mode) << '\n';
    out << "init_mode=" << to_string(c.init_mode) << '\n';
    out << "max_repeats_per_iter=" << c.max_repeats_per_iter << '\n';
    out << "norm_mode=" << to_string(c.norm_mode) << '\n';
    return out.str();
}

TrainingConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trimmed(line.substr(0, eq));
        if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
        if (values.contains(key)) throw ConfigError("duplicate config key '" + key + "'");
        values[key] = trimmed(line.substr(eq + 1));
    }
    for (const auto& key : required_keys()) {
        if (!values.contains(key)) throw ConfigError("missing required config key '" + key + "'");
    }

    TrainingConfig c;
    for (const auto& [key, value] : values) {
        if (key == "lambda") c.lambda = to_double(key, value);
        else if (key == "mu") c.mu = to_double(key, value);
        else if (key == "beta") c.beta = to_double(key, value);
        else if (key == "alpha") c.alpha = to_double(key, value);
        else if (key == "code_bits") c.code_bits = to_u64(key, value);
        else if (key == "outer_iters") c.outer_iters = to_u64(key, value);
        else if (key == "eps_sae") c.eps_sae = to_eps(key, value);
        else if (key == "eps_rbm") c.eps_rbm = to_eps(key, value);
        else if (key == "epochs") c.epochs = to_u64(key, value);
        else if (key == "batch_size") c.batch_size = to_u64(key, value);
        else if (key == "cd_steps") c.cd_steps = to_u64(key, value);
        else if (key == "seed") c.seed = to_u64(key, value);
        else if (key == "decorrelation_mode") c.decorrelation_mode = parse_decorrelation_mode(value);
        else if (key == "init_mode") c.init_mode = parse_init_mode(value);
        else if (key == "max_repeats_per_iter") c.max_repeats_per_iter = to_u64(key, value);
        else if (key == "norm_mode") c.norm_mode = parse_norm_mode(value);
        else if (key == "layer_dims") {
            std::string token;
            std::istringstream dims(value);
            while (std::getline(dims, token, ',')) c.layer_dims.push_back(to_u64(key, trimmed(token)));
        }
    }
    c.validate();
    return c;
}

TrainingConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = detail::read_file(path);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text);
}

bool Model::operator==(const Model& o) const {
    return sae == o.sae && rbm == o.rbm && norm_stats == o.norm_stats && config == o.config &&
           format_version == o.format_version;
}

Model init_model(const TrainingConfig& config, Engine& engine) {
    config.validate();
    const auto& dims = config.layer_dims;
    std::vector<SaeLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        SaeLayer layer(dims[l], dims[l + 1]);
        const auto [lo, hi] = init_range(config.init_mode, dims[l], dims[l + 1]);
        fill_uniform(layer.enc_w, lo, hi, engine);
        fill_uniform(layer.enc_b, lo, hi, engine);
        fill_uniform(layer.dec_w, lo, hi, engine);
        fill_uniform(layer.dec_b, lo, hi, engine);
        layers.push_back(std::move(layer));
    }

    Model model;
    model.sae = SaeStack(std::move(layers));
    model.rbm = Rbm(dims.back(), config.code_bits, config.beta, config.cd_steps);
    const auto [lo, hi] = init_range(config.init_mode, dims.back(), config.code_bits);
    fill_uniform(model.rbm.w, lo, hi, engine);
    fill_uniform(model.rbm.hid_bias, lo, hi, engine);
    fill_uniform(model.rbm.vis_bias, lo, hi, engine);
    model.norm_stats = NormStats::identity(dims.front());
    model.config = config;
    return model;
}

TrainResult train(const TrainingConfig& config, const FeatureMatrix& raw, const TrainOptions& options) {
    config.validate();
    if (raw.dim() != config.layer_dims.front()) {
        throw ShapeError("features have " + std::to_string(raw.dim()) + " dimensions, layer_dims expects " +
                         std::to_string(config.layer_dims.front()));
    }
    if (config.epochs * config.batch_size > raw.rows()) {
        throw CapacityError("epochs x batch_size = " + std::to_string(config.epochs * config.batch_size) +
                            " exceeds the " + std::to_string(raw.rows()) + " training rows");
    }

    const FeatureMatrix data = normalize(raw, config.norm_mode);
    Engine engine(config.seed);

    TrainResult result;
    Model& model = result.model;
    model = init_model(config, engine);
    model.norm_stats = data.norm_stats();

    Trainer trainer(config, model, options);
    std::optional<double> eps_sae = config.eps_sae;
    std::optional<double> eps_rbm = config.eps_rbm;
    IterationRecord previous;

    for (std::size_t t = 1; t <= config.outer_iters; ++t) {
        const EpochPlan plan = plan_epochs(data, config.epochs, config.batch_size, engine());
        std::vector<RowMatrix> batches;
        batches.reserve(plan.epoch_count);
        for (std::size_t m = 0; m < plan.epoch_count; ++m) batches.push_back(data.select(plan.batch(m)).values());

        IterationRecord record;
        record.iteration = t;
        for (const auto& batch : batches) {
            record.sae_objective += trainer.sae_step(batch);
            record.rbm_objective += trainer.rbm_step(batch, engine());
        }
        trainer.check_sae(record.sae_objective, t);
        trainer.check_rbm(record.rbm_objective, t);

        if (t == 1) {
            if (!eps_sae) eps_sae = 1e-3 * std::abs(record.sae_objective);
            if (!eps_rbm) eps_rbm = 1e-3 * std::abs(record.rbm_objective);
        }
        if (t > 1 && t < config.outer_iters) {
            while (std::abs(record.sae_objective - previous.sae_objective) > *eps_sae &&
                   record.sae_repeats < config.max_repeats_per_iter) {
                record.sae_objective = trainer.sae_pass(batches, t);
                ++record.sae_repeats;
            }
            while (std::abs(record.rbm_objective - previous.rbm_objective) > *eps_rbm &&
                   record.rbm_repeats < config.max_repeats_per_iter) {
                record.rbm_objective = trainer.rbm_pass(batches, t, engine);
                ++record.rbm_repeats;
            }
        }

        result.history.iterations.push_back(record);
        if (options.on_iteration) options.on_iteration(record);
        previous = record;
    }
    return result;
}

HashCode encode(const Model& model, const Eigen::Ref<const Vector>& raw_features) {
    if (static_cast<std::size_t>(raw_features.size()) != model.input_dim()) {
        throw ShapeError("expected " + std::to_string(model.input_dim()) + " feature dimensions, got " +
                         std::to_string(raw_features.size()));
    }
    const Vector x = model.norm_stats.apply(raw_features);
    return hash(model.rbm, binarize_pm(encode_stack(model.sae, x)));
}

std::vector<HashCode> encode_all(const Model& model, const FeatureMatrix& raw) {
    if (raw.dim() != model.input_dim()) {
        throw ShapeError("expected " + std::to_string(model.input_dim()) + " feature dimensions, got " +
                         std::to_string(raw.dim()));
    }
    std::vector<HashCode> codes;
    codes.reserve(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i) codes.push_back(encode(model, raw.row(i)));
    return codes;
}

RowMatrix sae_outputs(const Model& model, const FeatureMatrix& raw) {
    if (raw.dim() != model.input_dim()) throw ShapeError("feature dimension does not match model");
    RowMatrix out(static_cast<Eigen::Index>(raw.rows()), static_cast<Eigen::Index>(model.sae.output_dim()));
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = encode_stack(model.sae, model.norm_stats.apply(raw.row(i))).transpose();
    }
    return out;
}

} // namespace hdh
