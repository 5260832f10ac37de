#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace hdh::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, divergence = 3 };

struct CommandOutcome {
    int exit_code = ExitCode::ok;
    /// Human-readable status, printed to stderr on failure.
    std::string message;
    /// Single `key=value ...` line printed to stdout last.
    std::string summary;
};

struct TrainArgs {
    std::filesystem::path config;
    std::filesystem::path features;
    std::filesystem::path out;
    bool label_last = false;
    bool packed = false;
    std::size_t threads = 1;
};

struct EncodeArgs {
    std::filesystem::path model;
    std::filesystem::path features;
    std::filesystem::path out;
    bool label_last = false;
    bool packed = false;
};

struct QueryArgs {
    std::filesystem::path codes;
    std::optional<std::filesystem::path> ids;
    std::string query_hex;
    long long k_results = 10;
};

struct EvalPrArgs {
    std::filesystem::path codes;
    std::filesystem::path features;
    std::string mode = "label";
    std::size_t gt_n = 0;
    std::filesystem::path out;
    bool label_last = false;
    bool packed = false;
};

/// Each command writes progress lines to `out` and never throws.
CommandOutcome cmd_train(const TrainArgs& args, std::ostream& out);
CommandOutcome cmd_encode(const EncodeArgs& args, std::ostream& out);
CommandOutcome cmd_query(const QueryArgs& args, std::ostream& out);
CommandOutcome cmd_eval_pr(const EvalPrArgs& args, std::ostream& out);

/// Worker count from HDH_THREADS; 1 when unset or invalid.
std::size_t threads_from_env();

} // namespace hdh::cli
