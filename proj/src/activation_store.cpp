#include "actsc/activation_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "actsc/error.hpp"

namespace actsc {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'C', 'T', 'S', 'C', 'D', 'M', 'P'};
constexpr std::uint8_t kPackedVersion = 0x01;

std::string describe(const ActivationRecord& r) {
    return "record '" + r.problem_id + "'";
}

void validate_record(const ActivationRecord& r, std::uint32_t neuron_count) {
    if (r.problem_id.empty())
        throw ValidationError("record with empty problem_id");
    if (r.activations.size() != neuron_count)
        throw ValidationError("dimension mismatch in " + describe(r) + ": " +
                              std::to_string(r.activations.size()) + " activations, expected " +
                              std::to_string(neuron_count));
    if (r.difficulty && (*r.difficulty < 1 || *r.difficulty > 5))
        throw ValidationError("difficulty " + std::to_string(*r.difficulty) + " out of range 1..5 in " +
                              describe(r));
    for (std::size_t i = 0; i < r.activations.size(); ++i) {
        if (!std::isfinite(r.activations[i]))
            throw ValidationError("non-finite activation at neuron " + std::to_string(i) + " in " +
                                  describe(r));
    }
}

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode | std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode | std::ios::in);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

// ---- JSONL ---------------------------------------------------------------

std::string format_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

void write_jsonl(const Dataset& ds, std::ostream& out) {
    json manifest = {
        {"name", ds.manifest.name},
        {"neuron_count", ds.manifest.neuron_count},
        {"record_count", ds.records.size()},
        {"source_model", ds.manifest.source_model},
        {"layer_spec", ds.manifest.layer_spec},
    };
    out << json{{"manifest", manifest}}.dump() << '\n';
    for (const auto& r : ds.records) {
        out << "{\"problem_id\":" << json(r.problem_id).dump();
        out << ",\"difficulty\":" << (r.difficulty ? std::to_string(*r.difficulty) : "null");
        out << ",\"gold_answer\":" << (r.gold_answer ? json(*r.gold_answer).dump() : "null");
        out << ",\"activations\":[";
        for (std::size_t i = 0; i < r.activations.size(); ++i) {
            if (i) out << ',';
            out << format_float(r.activations[i]);
        }
        out << "]}\n";
    }
}

ActivationRecord record_from_json(const json& j) {
    ActivationRecord r;
    r.problem_id = j.at("problem_id").get<std::string>();
    if (auto it = j.find("difficulty"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer())
            throw ValidationError("non-integer difficulty in " + describe(r));
        r.difficulty = it->get<int>();
    }
    if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null())
        r.gold_answer = it->get<std::string>();
    const auto& acts = j.at("activations");
    if (!acts.is_array()) throw ParseError("activations is not an array");
    r.activations.reserve(acts.size());
    for (const auto& v : acts) {
        if (!v.is_number()) throw ParseError("non-numeric activation in " + describe(r));
        r.activations.push_back(static_cast<float>(v.get<double>()));
    }
    return r;
}

Dataset read_jsonl(const std::filesystem::path& path) {
    auto in = open_for_read(path, {});
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool have_manifest = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": malformed JSON: " + e.what());
        }
        try {
            if (!have_manifest) {
                const auto& m = j.at("manifest");
                ds.manifest.name = m.value("name", "");
                ds.manifest.neuron_count = m.at("neuron_count").get<std::uint32_t>();
                ds.manifest.record_count = m.at("record_count").get<std::uint32_t>();
                ds.manifest.source_model = m.value("source_model", "");
                ds.manifest.layer_spec = m.value("layer_spec", "");
                have_manifest = true;
                continue;
            }
            ds.records.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError(where + ": malformed record: " + e.what());
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    if (!have_manifest) throw ParseError(path.string() + ": missing manifest line");
    return ds;
}

// ---- packed --------------------------------------------------------------

class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
    }
    void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

private:
    std::ostream& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> buf) : buf_(std::move(buf)) {}

    std::size_t offset() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == buf_.size(); }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint16_t u16() {
        std::uint16_t lo = u8();
        std::uint16_t hi = u8();
        return static_cast<std::uint16_t>(lo | (hi << 8));
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int s = 0; s < 32; s += 8) v |= static_cast<std::uint32_t>(u8()) << s;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n)
            throw ParseError("truncated packed dump at byte offset " + std::to_string(pos_));
    }

    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

void write_packed(const Dataset& ds, std::ostream& out) {
    ByteWriter w(out);
    w.bytes(std::string_view(kMagic.data(), kMagic.size()));
    w.u8(kPackedVersion);
    w.u32(ds.manifest.neuron_count);
    w.u32(static_cast<std::uint32_t>(ds.records.size()));
    for (const auto& r : ds.records) {
        if (r.problem_id.size() > 0xFFFF) throw ValidationError("problem_id too long in " + describe(r));
        w.u16(static_cast<std::uint16_t>(r.problem_id.size()));
        w.bytes(r.problem_id);
        w.u8(static_cast<std::uint8_t>(static_cast<std::int8_t>(r.difficulty ? *r.difficulty : -1)));
        const std::string gold = r.gold_answer.value_or("");
        if (gold.size() > 0xFFFF) throw ValidationError("gold_answer too long in " + describe(r));
        w.u16(static_cast<std::uint16_t>(gold.size()));
        w.bytes(gold);
        for (float v : r.activations) w.u32(std::bit_cast<std::uint32_t>(v));
    }
}

Dataset read_packed(const std::filesystem::path& path) {
    auto in = open_for_read(path, std::ios::binary);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(std::move(buf));
    const std::string where = path.string();

    try {
        if (r.bytes(kMagic.size()) != std::string_view(kMagic.data(), kMagic.size()))
            throw ParseError("bad magic (not an ACTSCDMP file)");
        if (auto v = r.u8(); v != kPackedVersion)
            throw ParseError("unsupported packed version " + std::to_string(v));
        Dataset ds;
        ds.manifest.neuron_count = r.u32();
        ds.manifest.record_count = r.u32();
        ds.records.reserve(ds.manifest.record_count);
        for (std::uint32_t i = 0; i < ds.manifest.record_count; ++i) {
            ActivationRecord rec;
            rec.problem_id = r.bytes(r.u16());
            const auto d = static_cast<std::int8_t>(r.u8());
            if (d != -1) rec.difficulty = d;
            if (auto len = r.u16(); len > 0) rec.gold_answer = r.bytes(len);
            rec.activations.resize(ds.manifest.neuron_count);
            for (auto& a : rec.activations) a = std::bit_cast<float>(r.u32());
            ds.records.push_back(std::move(rec));
        }
        if (!r.at_end())
            throw ParseError("trailing bytes after record " + std::to_string(ds.manifest.record_count) +
                             " at byte offset " + std::to_string(r.offset()));
        return ds;
    } catch (const ParseError& e) {
        throw ParseError(where + ": " + e.what());
    }
}

} // namespace

DumpFormat parse_dump_format(std::string_view name) {
    if (name == "jsonl") return DumpFormat::jsonl;
    if (name == "packed") return DumpFormat::packed;
    throw ConfigError("unknown dump format '" + std::string(name) + "' (expected jsonl or packed)");
}

DumpFormat dump_format_for(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".jsonl" || ext == ".json") ? DumpFormat::jsonl : DumpFormat::packed;
}

void validate_dataset(const Dataset& ds) {
    if (ds.manifest.neuron_count == 0) throw ValidationError("manifest neuron_count must be positive");
    if (ds.manifest.record_count != ds.records.size())
        throw ValidationError("manifest record_count " + std::to_string(ds.manifest.record_count) +
                              " does not match " + std::to_string(ds.records.size()) + " records");
    std::set<std::string_view> seen;
    for (const auto& r : ds.records) {
        validate_record(r, ds.manifest.neuron_count);
        if (!seen.insert(r.problem_id).second)
            throw ValidationError("duplicate problem_id '" + r.problem_id + "'");
    }
}

Dataset load_dataset(const std::filesystem::path& path, DumpFormat format) {
    Dataset ds = format == DumpFormat::jsonl ? read_jsonl(path) : read_packed(path);
    try {
        validate_dataset(ds);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DumpFormat format) {
    if (dataset.manifest.neuron_count == 0) throw ValidationError("manifest neuron_count must be positive");
    for (const auto& r : dataset.records) validate_record(r, dataset.manifest.neuron_count);

    auto out = open_for_write(path, format == DumpFormat::packed ? std::ios::binary : std::ios::openmode{});
    if (format == DumpFormat::jsonl)
        write_jsonl(dataset, out);
    else
        write_packed(dataset, out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---- sample pool ---------------------------------------------------------

SamplePool load_sample_pool(const std::filesystem::path& path) {
    auto in = open_for_read(path, {});
    SamplePool pool;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        std::string id;
        PoolEntry entry;
        try {
            const json j = json::parse(line);
            id = j.at("problem_id").get<std::string>();
            entry.gold_answer = j.at("gold_answer").get<std::string>();
            for (const auto& s : j.at("samples")) {
                const auto in_tok = s.at("input_tokens").get<std::int64_t>();
                const auto out_tok = s.at("output_tokens").get<std::int64_t>();
                if (in_tok < 0 || out_tok < 0)
                    throw ValidationError(where + ": negative token count for problem '" + id + "'");
                AnswerSample a{s.at("answer").get<std::string>(), static_cast<std::uint64_t>(in_tok),
                               static_cast<std::uint64_t>(out_tok)};
                if (a.answer.empty()) a.answer = std::string(kNoAnswer);
                entry.samples.push_back(std::move(a));
            }
        } catch (const json::exception& e) {
            throw ParseError(where + ": malformed pool line: " + e.what());
        }
        if (entry.samples.empty())
            throw ValidationError(where + ": problem '" + id + "' has no samples");
        if (!pool.emplace(id, std::move(entry)).second)
            throw ValidationError(where + ": duplicate problem_id '" + id + "'");
    }
    return pool;
}

void save_sample_pool(const SamplePool& pool, const std::filesystem::path& path) {
    auto out = open_for_write(path, {});
    for (const auto& [id, entry] : pool) {
        json samples = json::array();
        for (const auto& s : entry.samples)
            samples.push_back({{"answer", s.answer}, {"input_tokens", s.input_tokens}, {"output_tokens", s.output_tokens}});
        out << json{{"problem_id", id}, {"gold_answer", entry.gold_answer}, {"samples", samples}}.dump() << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace actsc
