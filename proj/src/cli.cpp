#include "hdh/cli.hpp"

#include "hdh/errors.hpp"
#include "hdh/pipeline.hpp"
#include "hdh/search.hpp"
#include "io_util.hpp"

#include <cstdlib>
#include <ostream>

namespace hdh::cli {

namespace {

CommandOutcome failure(int code, const std::string& command, const std::string& message) {
    return {code, message, "status=error command=" + command + " exit_code=" + std::to_string(code)};
}

/// Maps library exceptions onto exit codes. Config and argument problems are usage
/// errors; anything about the input data is a data error.
template <typename Body>
CommandOutcome guarded(const std::string& command, Body&& body) {
    try {
        return body();
    } catch (const DivergenceError& e) {
        return failure(ExitCode::divergence, command, e.what());
    } catch (const ConfigError& e) {
        return failure(ExitCode::usage, command, e.what());
    } catch (const Error& e) {
        return failure(ExitCode::data_error, command, e.what());
    } catch (const std::exception& e) {
        return failure(ExitCode::data_error, command, e.what());
    }
}

FeatureMatrix read_features(const std::filesystem::path& path, bool label_last, bool packed) {
    LoadOptions options;
    options.format = packed ? FeatureFormat::packed_binary : FeatureFormat::csv;
    options.label_last = label_last;
    return load_features(path, options);
}

} // namespace

std::size_t threads_from_env() {
    const char* value = std::getenv("HDH_THREADS");
    if (value == nullptr) return 1;
    char* end = nullptr;
    const long n = std::strtol(value, &end, 10);
    if (end == value || *end != '\0' || n < 1) return 1;
    return static_cast<std::size_t>(n);
}

CommandOutcome cmd_train(const TrainArgs& args, std::ostream& out) {
    return guarded("train", [&]() -> CommandOutcome {
        const TrainingConfig config = load_config(args.config);
        const FeatureMatrix data = read_features(args.features, args.label_last, args.packed);

        TrainOptions options;
        options.threads = args.threads;
        options.on_iteration = [&out](const IterationRecord& r) {
            out << "iter=" << r.iteration << " R=" << detail::format_double(r.sae_objective)
                << " J=" << detail::format_double(r.rbm_objective) << " sae_repeats=" << r.sae_repeats
                << " rbm_repeats=" << r.rbm_repeats << '\n';
        };
        const TrainResult result = train(config, data, options);
        save_model(result.model, args.out);

        const auto& last = result.history.iterations.back();
        return {ExitCode::ok, "model written to " + args.out.string(),
                "status=ok command=train iterations=" + std::to_string(result.history.iterations.size()) +
                    " R_final=" + detail::format_double(last.sae_objective) +
                    " J_final=" + detail::format_double(last.rbm_objective) + " code_bits=" +
                    std::to_string(result.model.code_bits()) + " J_proxy=free_energy_gap"};
    });
}

CommandOutcome cmd_encode(const EncodeArgs& args, std::ostream&) {
    return guarded("encode", [&]() -> CommandOutcome {
        const Model model = load_model(args.model);
        const FeatureMatrix data = read_features(args.features, args.label_last, args.packed);
        if (data.dim() != model.input_dim()) {
            return failure(ExitCode::data_error, "encode",
                           "feature dimension mismatch: model expects d=" + std::to_string(model.input_dim()) +
                               ", features have d=" + std::to_string(data.dim()));
        }
        const auto codes = encode_all(model, data);
        save_codes(codes, args.out);
        return {ExitCode::ok, "codes written to " + args.out.string(),
                "status=ok command=encode count=" + std::to_string(codes.size()) +
                    " bits=" + std::to_string(model.code_bits())};
    });
}

CommandOutcome cmd_query(const QueryArgs& args, std::ostream& out) {
    return guarded("query", [&]() -> CommandOutcome {
        if (args.k_results < 1) return failure(ExitCode::usage, "query", "--k must be >= 1");
        const auto codes = load_codes(args.codes);
        std::vector<ItemId> ids;
        if (args.ids) ids = load_ids(*args.ids);
        const HammingIndex index(codes, ids);

        HashCode query;
        try {
            query = HashCode::from_hex(args.query_hex, index.empty() ? 64 : index.bits());
        } catch (const Error& e) {
            return failure(ExitCode::usage, "query", std::string("malformed query code: ") + e.what());
        }
        const auto found = topk(index, query, static_cast<std::size_t>(args.k_results));
        for (const auto& nb : found) out << nb.id << ' ' << nb.distance << '\n';
        return {ExitCode::ok, "", "status=ok command=query results=" + std::to_string(found.size())};
    });
}

CommandOutcome cmd_eval_pr(const EvalPrArgs& args, std::ostream&) {
    return guarded("eval-pr", [&]() -> CommandOutcome {
        const auto mode = parse_ground_truth_mode(args.mode);
        const auto codes = load_codes(args.codes);
        const FeatureMatrix data = read_features(args.features, args.label_last, args.packed);
        if (codes.size() != data.rows()) {
            return failure(ExitCode::data_error, "eval-pr",
                           "codes file has " + std::to_string(codes.size()) + " entries but features have " +
                               std::to_string(data.rows()) + " rows");
        }
        if (mode == GroundTruthMode::label && !data.has_labels()) {
            return failure(ExitCode::data_error, "eval-pr",
                           "mode=label needs labels; pass --label-col last with labelled features");
        }
        if (mode == GroundTruthMode::euclidean && args.gt_n == 0) {
            return failure(ExitCode::usage, "eval-pr", "mode=euclidean needs --gt-n >= 1");
        }

        // Every item queries the rest of the collection.
        std::vector<std::size_t> rows(data.rows());
        std::vector<PrQuery> queries;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i] = i;
            queries.push_back({codes[i], static_cast<ItemId>(i)});
        }
        const auto truth = ground_truth(data, rows, mode, args.gt_n);
        const HammingIndex index(codes);
        const PrCurve curve = precision_recall(index, queries, truth);
        detail::write_file(args.out, format_pr_csv(curve));

        return {ExitCode::ok, "PR curve written to " + args.out.string(),
                "status=ok command=eval-pr auc=" + detail::format_double(curve.auc()) + " mode=" + args.mode +
                    " queries=" + std::to_string(queries.size()) + " empty_retrieval_precision=1"};
    });
}

} // namespace hdh::cli
