#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hdh/errors.hpp"
#include "hdh/features.hpp"
#include "test_util.hpp"

#include <fstream>
#include <set>

using namespace hdh;

TEST_CASE("parse_csv reads a 3x4 matrix") {
    const auto m = parse_csv("1,2,3,4\n5,6,7,8\n-1,0.5,2e3,+4\n", false);
    CHECK(m.rows() == 3);
    CHECK(m.dim() == 4);
    CHECK(m.values()(2, 2) == 2000.0);
    CHECK_FALSE(m.has_labels());
}

TEST_CASE("parse_csv with label column") {
    const auto m = parse_csv("0.1,0.2,3\n0.3,0.4,7\n", true);
    CHECK(m.dim() == 2);
    REQUIRE(m.has_labels());
    CHECK((*m.labels())[1] == 7);
}

TEST_CASE("empty file is a format error") {
    CHECK_THROWS_AS(parse_csv("", false), FormatError);
    CHECK_THROWS_AS(parse_csv("\n\n", false), FormatError);
}

TEST_CASE("non-numeric cell reports row and column") {
    try {
        parse_csv("1,2,3\n4,abc,6\n", false);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == 2);
    }
}

TEST_CASE("ragged rows and non-finite cells are rejected") {
    CHECK_THROWS_AS(parse_csv("1,2,3\n4,5\n", false), FormatError);
    CHECK_THROWS_AS(parse_csv("1,nan\n", false), ParseError);
    CHECK_THROWS_AS(parse_csv("1,inf\n", false), ParseError);
    CHECK_THROWS_AS(parse_csv("1,2,x\n", true), ParseError);
}

TEST_CASE("packed binary round trip and layout") {
    test::TempDir dir;
    RowMatrix values(2, 3);
    values << 1.5, -2, 0.25, 4, 5, 6;
    const FeatureMatrix m(values, std::vector<std::int32_t>{3, -1});
    save_packed(m, dir / "f.bin");

    std::ifstream in(dir / "f.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(bytes.substr(0, 4) == "HDH1");
    CHECK(bytes.size() == 4 + 4 + 4 + 1 + 6 * 4 + 2 * 4);
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);  // N, little-endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 3);  // d
    CHECK(bytes[12] == 1);

    const auto back = load_features(dir / "f.bin", {FeatureFormat::packed_binary, false});
    CHECK(back.values() == values);
    CHECK(*back.labels() == std::vector<std::int32_t>{3, -1});
}

TEST_CASE("packed binary rejects bad magic and truncation") {
    test::TempDir dir;
    {
        std::ofstream out(dir / "bad.bin", std::ios::binary);
        out << "HDH2xxxxxxxxx";
    }
    CHECK_THROWS_AS(load_features(dir / "bad.bin", {FeatureFormat::packed_binary, false}), FormatError);

    RowMatrix values(1, 2);
    values << 1, 2;
    save_packed(FeatureMatrix(values), dir / "ok.bin");
    std::filesystem::resize_file(dir / "ok.bin", 15);
    CHECK_THROWS_AS(load_features(dir / "ok.bin", {FeatureFormat::packed_binary, false}), TruncationError);
}

TEST_CASE("minmax_symmetric examples") {
    RowMatrix values(3, 2);
    values << -2, 5, 0, 5, 2, 5;
    const auto n = normalize(FeatureMatrix(values), NormMode::minmax_symmetric);
    CHECK(n.values()(0, 0) == -1.0);
    CHECK(n.values()(1, 0) == 0.0);
    CHECK(n.values()(2, 0) == 1.0);
    for (int i = 0; i < 3; ++i) CHECK(n.values()(i, 1) == 0.0);

    RowMatrix two(2, 1);
    two << 1, 3;
    const auto t = normalize(FeatureMatrix(two), NormMode::minmax_symmetric);
    CHECK(t.values()(0, 0) == -1.0);
    CHECK(t.values()(1, 0) == 1.0);
}

TEST_CASE("normalization keeps values in [-1, 1] and is idempotent") {
    Engine e(11);
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureMatrix raw(test::random_batch(e, 15, 6, 50.0));
        for (auto mode : {NormMode::minmax_symmetric, NormMode::zscore_clamped}) {
            const auto once = normalize(raw, mode);
            CHECK(once.values().maxCoeff() <= 1.0);
            CHECK(once.values().minCoeff() >= -1.0);
        }
        const auto once = normalize(raw, NormMode::minmax_symmetric);
        const auto twice = normalize(once, NormMode::minmax_symmetric);
        CHECK((twice.values() - once.values()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("recorded stats reproduce training-time normalization exactly") {
    Engine e(5);
    const FeatureMatrix raw(test::random_batch(e, 10, 4, 3.0));
    for (auto mode : {NormMode::minmax_symmetric, NormMode::zscore_clamped}) {
        const auto n = normalize(raw, mode);
        const auto again = apply_norm(n.norm_stats(), raw);
        CHECK(again.values() == n.values());
        for (std::size_t i = 0; i < raw.rows(); ++i) {
            CHECK(n.norm_stats().apply(raw.row(i)) == n.row(i));
        }
    }
}

TEST_CASE("plan_epochs partitions rows") {
    const auto plan = plan_epochs(10, 2, 5, 7);
    std::set<std::size_t> seen;
    for (std::size_t m = 0; m < 2; ++m) {
        const auto b = plan.batch(m);
        CHECK(b.size() == 5);
        seen.insert(b.begin(), b.end());
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("plan_epochs capacity error") {
    CHECK_THROWS_AS(plan_epochs(10, 3, 4, 1), CapacityError);
}

TEST_CASE("plan_epochs determinism and seed sensitivity") {
    CHECK(plan_epochs(10, 2, 5, 7).order == plan_epochs(10, 2, 5, 7).order);

    const auto base = plan_epochs(2, 1, 2, 0).order;
    int differing = 0;
    for (std::uint64_t s = 1; s <= 100; ++s) {
        if (plan_epochs(2, 1, 2, s).order != base) ++differing;
    }
    // A 2-row permutation has two outcomes; over 100 seeds both must occur.
    CHECK(differing > 0);
    CHECK(differing < 100);

    const auto plan = plan_epochs(50, 4, 10, 99);
    std::set<std::size_t> distinct(plan.order.begin(), plan.order.end());
    CHECK(distinct.size() == plan.order.size());
}

TEST_CASE("FeatureMatrix invariants") {
    RowMatrix values(2, 2);
    values << 1, 2, 3, 4;
    CHECK_THROWS_AS(FeatureMatrix(values, std::vector<std::int32_t>{1}), ShapeError);
    values(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(FeatureMatrix{values}, FormatError);
}
