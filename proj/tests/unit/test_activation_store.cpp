#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "actsc/activation_store.hpp"
#include "actsc/error.hpp"
#include "support/test_support.hpp"

using namespace actsc;
using testsupport::rec;
using testsupport::TempDir;

namespace {

Dataset three_records() {
    Dataset ds;
    ds.manifest = {"toy", 4, 3, "tiny-model", "layer=last"};
    ds.records = {rec("a", 1, {0.1f, -0.2f, 3.5f, 0.0f}, "42"), rec("b", 5, {1e-7f, 2.f, -3.f, 4.f}),
                  rec("c", std::nullopt, {0.f, 0.f, 0.f, 123456.789f}, "x y")};
    return ds;
}

void write_lines(const std::filesystem::path& p, std::initializer_list<std::string> lines) {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << '\n';
}

std::string error_of(auto&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("jsonl round trip keeps records and manifest") {
    TempDir dir;
    const auto ds = three_records();
    save_dataset(ds, dir / "d.jsonl", DumpFormat::jsonl);
    const auto back = load_dataset(dir / "d.jsonl", DumpFormat::jsonl);
    CHECK(back.manifest == ds.manifest);
    REQUIRE(back.records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.records[i].problem_id == ds.records[i].problem_id);
        CHECK(back.records[i].difficulty == ds.records[i].difficulty);
        CHECK(back.records[i].gold_answer == ds.records[i].gold_answer);
        for (std::size_t j = 0; j < 4; ++j) {
            const double a = ds.records[i].activations[j], b = back.records[i].activations[j];
            CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST_CASE("packed round trip is bit identical") {
    TempDir dir;
    Dataset ds;
    ds.manifest = {"p", 3, 2, "", ""};
    ds.records = {rec("x", 2, {std::numeric_limits<float>::denorm_min(), -0.0f, 1.0f / 3.0f}),
                  rec("y", std::nullopt, {std::numeric_limits<float>::max(), 7.f, -1e-30f}, "ans")};
    save_dataset(ds, dir / "d.bin", DumpFormat::packed);
    const auto back = load_dataset(dir / "d.bin", DumpFormat::packed);
    REQUIRE(back.records.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.records[i].problem_id == ds.records[i].problem_id);
        CHECK(back.records[i].difficulty == ds.records[i].difficulty);
        CHECK(back.records[i].gold_answer == ds.records[i].gold_answer);
        CHECK(std::memcmp(back.records[i].activations.data(), ds.records[i].activations.data(), 3 * sizeof(float)) ==
              0);
    }
    CHECK(back.manifest.neuron_count == 3);
    CHECK(back.manifest.record_count == 2);
}

TEST_CASE("empty payload with a valid manifest loads as zero records") {
    TempDir dir;
    Dataset ds;
    ds.manifest = {"empty", 4, 0, "", ""};
    for (auto fmt : {DumpFormat::jsonl, DumpFormat::packed}) {
        const auto p = dir / (fmt == DumpFormat::jsonl ? "e.jsonl" : "e.bin");
        save_dataset(ds, p, fmt);
        const auto back = load_dataset(p, fmt);
        CHECK(back.manifest.record_count == 0);
        CHECK(back.manifest.neuron_count == 4);
        CHECK(back.records.empty());
    }
}

TEST_CASE("dimension mismatch names the record") {
    TempDir dir;
    write_lines(dir / "bad.jsonl",
                {R"({"manifest":{"name":"t","neuron_count":4,"record_count":2}})",
                 R"({"problem_id":"ok","difficulty":1,"activations":[1,2,3,4]})",
                 R"({"problem_id":"too-long","difficulty":2,"activations":[1,2,3,4,5]})"});
    const auto msg = error_of([&] { load_dataset(dir / "bad.jsonl", DumpFormat::jsonl); });
    CHECK(msg.find("too-long") != std::string::npos);
    CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl", DumpFormat::jsonl), ValidationError);
}

TEST_CASE("invalid records are rejected at load") {
    TempDir dir;
    const std::string head = R"({"manifest":{"name":"t","neuron_count":2,"record_count":1}})";
    SUBCASE("difficulty out of range") {
        write_lines(dir / "d.jsonl", {head, R"({"problem_id":"q7","difficulty":6,"activations":[1,2]})"});
        const auto msg = error_of([&] { load_dataset(dir / "d.jsonl", DumpFormat::jsonl); });
        CHECK(msg.find("q7") != std::string::npos);
    }
    SUBCASE("non-finite activation") {
        Dataset ds;
        ds.manifest = {"t", 2, 1, "", ""};
        ds.records = {rec("nan-rec", 1, {1.f, std::numeric_limits<float>::quiet_NaN()})};
        const auto msg = error_of([&] { validate_dataset(ds); });
        CHECK(msg.find("nan-rec") != std::string::npos);
    }
    SUBCASE("record count disagrees with manifest") {
        write_lines(dir / "d.jsonl", {R"({"manifest":{"name":"t","neuron_count":2,"record_count":3}})",
                                      R"({"problem_id":"a","activations":[1,2]})"});
        CHECK_THROWS_AS(load_dataset(dir / "d.jsonl", DumpFormat::jsonl), ValidationError);
    }
    SUBCASE("duplicate problem id") {
        write_lines(dir / "d.jsonl", {R"({"manifest":{"name":"t","neuron_count":2,"record_count":2}})",
                                      R"({"problem_id":"dup","activations":[1,2]})",
                                      R"({"problem_id":"dup","activations":[3,4]})"});
        const auto msg = error_of([&] { load_dataset(dir / "d.jsonl", DumpFormat::jsonl); });
        CHECK(msg.find("dup") != std::string::npos);
    }
    SUBCASE("malformed json reports the line") {
        write_lines(dir / "d.jsonl", {head, "{not json"});
        const auto msg = error_of([&] { load_dataset(dir / "d.jsonl", DumpFormat::jsonl); });
        CHECK(msg.find(":2") != std::string::npos);
        CHECK_THROWS_AS(load_dataset(dir / "d.jsonl", DumpFormat::jsonl), ParseError);
    }
}

TEST_CASE("packed loader rejects corrupt files") {
    TempDir dir;
    auto ds = three_records();
    save_dataset(ds, dir / "d.bin", DumpFormat::packed);
    const auto size = std::filesystem::file_size(dir / "d.bin");
    SUBCASE("truncated") {
        std::filesystem::resize_file(dir / "d.bin", size - 3);
        CHECK_THROWS_AS(load_dataset(dir / "d.bin", DumpFormat::packed), ParseError);
    }
    SUBCASE("bad magic") {
        std::fstream f(dir / "d.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(load_dataset(dir / "d.bin", DumpFormat::packed), ParseError);
    }
    SUBCASE("trailing bytes") {
        std::ofstream f(dir / "d.bin", std::ios::app | std::ios::binary);
        f.put('\0');
        f.close();
        CHECK_THROWS_AS(load_dataset(dir / "d.bin", DumpFormat::packed), ParseError);
    }
}

TEST_CASE("save to an unwritable path is an I/O error") {
    TempDir dir;
    const auto ds = three_records();
    CHECK_THROWS_AS(save_dataset(ds, dir / "missing" / "sub" / "d.jsonl", DumpFormat::jsonl), IoError);
    CHECK_THROWS_AS(save_dataset(ds, dir / "missing" / "sub" / "d.bin", DumpFormat::packed), IoError);
    CHECK_THROWS_AS(load_dataset(dir / "nope.jsonl", DumpFormat::jsonl), IoError);
}

TEST_CASE("format helpers") {
    CHECK(parse_dump_format("jsonl") == DumpFormat::jsonl);
    CHECK(parse_dump_format("packed") == DumpFormat::packed);
    CHECK_THROWS_AS(parse_dump_format("csv"), ConfigError);
    CHECK(dump_format_for("x/y.jsonl") == DumpFormat::jsonl);
    CHECK(dump_format_for("x/y.json") == DumpFormat::jsonl);
    CHECK(dump_format_for("x/y.bin") == DumpFormat::packed);
}

TEST_CASE("sample pool") {
    TempDir dir;
    SUBCASE("one problem") {
        write_lines(dir / "p.jsonl",
                    {R"({"problem_id":"q","gold_answer":"42","samples":[{"answer":"42","input_tokens":120,"output_tokens":350}]})"});
        const auto pool = load_sample_pool(dir / "p.jsonl");
        REQUIRE(pool.size() == 1);
        const auto& e = pool.at("q");
        CHECK(e.gold_answer == "42");
        REQUIRE(e.samples.size() == 1);
        CHECK(e.samples[0] == AnswerSample{"42", 120, 350});
    }
    SUBCASE("duplicate id names it") {
        write_lines(dir / "p.jsonl",
                    {R"({"problem_id":"twice","gold_answer":"1","samples":[{"answer":"1","input_tokens":1,"output_tokens":1}]})",
                     R"({"problem_id":"twice","gold_answer":"1","samples":[{"answer":"1","input_tokens":1,"output_tokens":1}]})"});
        const auto msg = error_of([&] { load_sample_pool(dir / "p.jsonl"); });
        CHECK(msg.find("twice") != std::string::npos);
    }
    SUBCASE("empty sample list") {
        write_lines(dir / "p.jsonl", {R"({"problem_id":"none","gold_answer":"1","samples":[]})"});
        CHECK_THROWS_AS(load_sample_pool(dir / "p.jsonl"), ValidationError);
    }
    SUBCASE("negative tokens") {
        write_lines(dir / "p.jsonl",
                    {R"({"problem_id":"neg","gold_answer":"1","samples":[{"answer":"1","input_tokens":-1,"output_tokens":1}]})"});
        CHECK_THROWS(load_sample_pool(dir / "p.jsonl"));
    }
    SUBCASE("round trip") {
        SamplePool pool;
        pool["b"] = {"7", {{"7", 1, 2}, {"8", 3, 4}}};
        pool["a"] = {"x", {{"<no-answer>", 0, 9}}};
        save_sample_pool(pool, dir / "p.jsonl");
        const auto back = load_sample_pool(dir / "p.jsonl");
        REQUIRE(back.size() == 2);
        CHECK(back.at("b").samples == pool["b"].samples);
        CHECK(back.at("a").samples == pool["a"].samples);
        CHECK(back.at("a").gold_answer == "x");
    }
}
