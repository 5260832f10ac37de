#include "hdh/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int finish(const hdh::cli::CommandOutcome& outcome) {
    if (outcome.exit_code != hdh::cli::ExitCode::ok) std::cerr << "error: " << outcome.message << '\n';
    std::cout << outcome.summary << '\n';
    return outcome.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep hashing: train, encode, query and evaluate binary codes"};
    app.require_subcommand(1);

    std::string label_col;
    auto add_label_col = [&label_col](CLI::App* sub) {
        sub->add_option("--label-col", label_col, "Label column in CSV input")->check(CLI::IsMember({"last"}));
    };

    hdh::cli::TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model on a feature file");
    train->add_option("--config", train_args.config, "key=value config file")->required();
    train->add_option("--features", train_args.features, "Training features")->required();
    train->add_option("--out", train_args.out, "Model output path")->required();
    train->add_flag("--packed", train_args.packed, "Features use the packed binary format");
    add_label_col(train);

    hdh::cli::EncodeArgs encode_args;
    auto* encode = app.add_subcommand("encode", "Encode feature rows into hash codes");
    encode->add_option("--model", encode_args.model)->required();
    encode->add_option("--features", encode_args.features)->required();
    encode->add_option("--out", encode_args.out, "Codes output path")->required();
    encode->add_flag("--packed", encode_args.packed);
    add_label_col(encode);

    hdh::cli::QueryArgs query_args;
    std::string ids_path;
    auto* query = app.add_subcommand("query", "Hamming top-k lookup");
    query->add_option("--codes", query_args.codes)->required();
    query->add_option("--q", query_args.query_hex, "Query code in hex, most-significant word first")->required();
    query->add_option("--k", query_args.k_results, "Number of results")->required();
    query->add_option("--ids", ids_path, "Optional ids file, one per line");

    hdh::cli::EvalPrArgs eval_args;
    auto* eval = app.add_subcommand("eval-pr", "Precision-recall curve by Hamming radius sweep");
    eval->add_option("--codes", eval_args.codes)->required();
    eval->add_option("--features", eval_args.features)->required();
    eval->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"label", "euclidean"}));
    eval->add_option("--gt-n", eval_args.gt_n, "Neighbors per query in euclidean mode");
    eval->add_option("--out", eval_args.out, "PR CSV output path")->required();
    eval->add_flag("--packed", eval_args.packed);
    add_label_col(eval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : hdh::cli::ExitCode::usage;
    }

    const bool label_last = label_col == "last";
    if (*train) {
        train_args.label_last = label_last;
        train_args.threads = hdh::cli::threads_from_env();
        return finish(hdh::cli::cmd_train(train_args, std::cout));
    }
    if (*encode) {
        encode_args.label_last = label_last;
        return finish(hdh::cli::cmd_encode(encode_args, std::cout));
    }
    if (*query) {
        if (!ids_path.empty()) query_args.ids = ids_path;
        return finish(hdh::cli::cmd_query(query_args, std::cout));
    }
    eval_args.label_last = label_last;
    return finish(hdh::cli::cmd_eval_pr(eval_args, std::cout));
}
