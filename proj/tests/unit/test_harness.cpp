#include <doctest.h>

#include <fstream>
#include <sstream>

#include "actsc/error.hpp"
#include "actsc/harness.hpp"
#include "actsc/io.hpp"
#include "actsc/numeric.hpp"
#include "actsc/synthetic.hpp"
#include "support/test_support.hpp"

using namespace actsc;
using testsupport::rec;
using testsupport::TempDir;

namespace {

SamplingTrace trace(std::string id, std::size_t n, std::string answer = "A") {
    SamplingTrace t;
    t.problem_id = std::move(id);
    t.samples.assign(n, AnswerSample{answer, 100, 400});
    t.final_answer = answer;
    return t;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SyntheticProblems small_synthetic(std::size_t n = 100) {
    SyntheticConfig cfg;
    cfg.problems = n;
    return make_synthetic(cfg);
}

} // namespace

TEST_CASE("reduction arithmetic") {
    CHECK(round_half_away(pct_reduction(9.71, 40), 1) == -75.7);
    CHECK(round_half_away(pct_reduction(28.17, 40), 1) == -29.6);
    CHECK(round_half_away(pct_reduction(8.7, 40), 1) == -78.3);
    CHECK(round_half_away(pct_reduction(40, 40), 1) == 0.0);
    CHECK_THROWS_AS(pct_reduction(1, 0), ValidationError);
}

TEST_CASE("aggregate metrics") {
    const std::vector<SamplingTrace> ts = {trace("a", 1), trace("b", 5, "B"), trace("c", 9)};
    const GoldAnswers gold = {{"a", "A"}, {"b", "A"}};
    const auto r = aggregate_metrics(Policy::esc, "toy", ts, gold, 40.0);
    CHECK(r.avg_samples == 5.0);
    CHECK(r.n_problems == 3);
    CHECK(r.total_samples == 15);
    CHECK(r.accuracy_pct == doctest::Approx(100.0 / 3.0));  // c has no gold
    CHECK(r.inference_tokens_total == 15 * 500);
    CHECK(r.inference_tokens_k == doctest::Approx(2.5));
    REQUIRE(r.pct_reduction_vs_sc);
    CHECK(*r.pct_reduction_vs_sc == doctest::Approx(-87.5));
    CHECK(r.per_problem[1].correct == false);
    CHECK_THROWS_AS(aggregate_metrics(Policy::sc, "x", {}, gold), ValidationError);
}

TEST_CASE("report rendering") {
    RunReport sc;
    sc.policy = Policy::sc;
    sc.dataset = "MATH";
    sc.avg_samples = 40;
    sc.inference_tokens_k = 22.3;
    sc.accuracy_pct = 61.8;
    RunReport dsc = sc;
    dsc.policy = Policy::dsc;
    dsc.avg_samples = 12.5;
    dsc.prepare_tokens_k = 2.8;
    dsc.inference_tokens_k = 12.4;
    dsc.pct_reduction_vs_sc = pct_reduction(12.5, 40);
    RunReport act = sc;
    act.policy = Policy::actsc;
    act.avg_samples = 9.71;
    act.pct_reduction_vs_sc = pct_reduction(9.71, 40);
    const std::vector<RunReport> reports = {sc, dsc, act};

    const auto text = render_report(reports, ReportFormat::text_table);
    CHECK(text.find("-- / 22.3") != std::string::npos);
    CHECK(text.find("2.8 / 12.4") != std::string::npos);
    CHECK(text.find("9.71 (-75.7%)") != std::string::npos);
    CHECK(text.find("61.80") != std::string::npos);

    const auto csv = render_report(reports, ReportFormat::csv);
    CHECK(csv.find("dsc,MATH,0,12.50,-68.8,2.8,12.4,61.80,true") != std::string::npos);

    const auto json = render_report(reports, ReportFormat::json);
    CHECK(parse_report_json(json) == reports);
    CHECK_THROWS_AS(parse_report_json("[{]"), ParseError);
    CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
}

TEST_CASE("csv fields are quoted when needed") {
    RunReport r;
    r.dataset = "a,b \"c\"";
    const std::vector<RunReport> one = {r};
    CHECK(render_report(one, ReportFormat::csv).find("sc,\"a,b \"\"c\"\"\",") != std::string::npos);
}

TEST_CASE("printed reductions agree with the report's own averages") {
    const auto probs = small_synthetic(60);
    SimSource src(probs.sims, 5);
    auto model = ProbeModel::zero({0});
    BenchmarkInputs in;
    in.records = probs.dataset.records;
    in.probe = &model;
    in.policies = {{Policy::sc, {}}, {Policy::ac, {}}, {Policy::esc, {}}, {Policy::dsc, {}}, {Policy::actsc, {}}};
    const auto res = run_benchmark(in, src);
    const double sc_avg = res.reports[0].avg_samples;
    for (std::size_t i = 1; i < res.reports.size(); ++i)
        CHECK(round_half_away(*res.reports[i].pct_reduction_vs_sc, 1) ==
              round_half_away((res.reports[i].avg_samples - sc_avg) / sc_avg * 100, 1));
}

TEST_CASE("run_benchmark basics") {
    const auto probs = small_synthetic(100);
    SimSource src(probs.sims, 1);
    auto model = ProbeModel::zero({0});
    BenchmarkInputs in;
    in.dataset_name = "syn";
    in.records = probs.dataset.records;
    in.probe = &model;
    in.policies = {{Policy::sc, {}}, {Policy::actsc, {}}};
    const auto res = run_benchmark(in, src);
    REQUIRE(res.reports.size() == 2);
    CHECK(res.reports[0].avg_samples == 40.0);
    CHECK_FALSE(res.reports[0].pct_reduction_vs_sc);
    CHECK(res.reports[1].pct_reduction_vs_sc);
    // zero probe: every P is 0.5, tau is 0.5, all hard
    REQUIRE(res.tau);
    CHECK(*res.tau == 0.5);
    for (const auto& t : res.traces[1]) CHECK(t.route == Route::hard);

    SUBCASE("actsc without a probe") {
        in.probe = nullptr;
        CHECK_THROWS_AS(run_benchmark(in, src), ConfigError);
    }
    SUBCASE("tau override") {
        in.tau = 0.6;
        const auto r = run_benchmark(in, src);
        CHECK(*r.tau == 0.6);
        for (const auto& t : r.traces[1]) CHECK(t.route == Route::easy);
    }
    SUBCASE("no policies") {
        in.policies.clear();
        CHECK_THROWS_AS(run_benchmark(in, src), ConfigError);
    }
}

TEST_CASE("replay pool of exactly k_max samples is enough for every policy") {
    const auto probs = small_synthetic(50);
    SimSource sim(probs.sims, 3);
    SamplePool pool;
    for (const auto& s : probs.sims) pool[s.problem_id] = {s.gold_answer, sim.open(s.problem_id)->draw(40)};
    ReplaySource replay(pool);
    auto model = ProbeModel::zero({0});
    BenchmarkInputs in;
    in.records = probs.dataset.records;
    in.probe = &model;
    for (auto p : {Policy::sc, Policy::ac, Policy::esc, Policy::dsc, Policy::actsc}) in.policies.push_back({p, {}});
    const auto res = run_benchmark(in, replay);
    CHECK(res.reports.size() == 5);

    // a pool one short fails SC with the problem named
    auto short_pool = pool;
    short_pool.begin()->second.samples.pop_back();
    ReplaySource short_src(short_pool);
    in.policies = {{Policy::sc, {}}};
    try {
        run_benchmark(in, short_src);
        FAIL("expected exhaustion");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find(short_pool.begin()->first) != std::string::npos);
    }
}

TEST_CASE("paired determinism and scheduling independence") {
    const auto probs = small_synthetic(200);
    SimSource src(probs.sims, 11);
    auto model = ProbeModel::zero({0});
    BenchmarkInputs in;
    in.records = probs.dataset.records;
    in.probe = &model;
    for (auto p : {Policy::sc, Policy::ac, Policy::esc, Policy::dsc, Policy::actsc}) in.policies.push_back({p, {}});
    in.exec = Exec::parallel;
    const auto a = run_benchmark(in, src);
    in.exec = Exec::serial;
    const auto b = run_benchmark(in, src);
    CHECK(a.reports == b.reports);
    for (std::size_t p = 0; p < a.traces.size(); ++p) {
        std::ostringstream sa, sb;
        write_traces(a.traces[p], sa);
        write_traces(b.traces[p], sb);
        CHECK(sa.str() == sb.str());
    }
    // every policy sees the same stream prefix for a problem
    for (std::size_t i = 0; i < a.traces[0].size(); ++i) {
        const auto& sc = a.traces[0][i].samples;
        for (std::size_t p = 1; p < a.traces.size(); ++p) {
            const auto& t = a.traces[p][i];
            std::vector<AnswerSample> all = t.prepare_samples;
            all.insert(all.end(), t.samples.begin(), t.samples.end());
            for (std::size_t k = 0; k < all.size(); ++k) CHECK(all[k] == sc[k]);
        }
    }
}

TEST_CASE("token accounting closes") {
    const auto probs = small_synthetic(80);
    SimSource src(probs.sims, 2);
    BenchmarkInputs in;
    in.records = probs.dataset.records;
    in.policies = {{Policy::dsc, {}}, {Policy::esc, {}}};
    const auto res = run_benchmark(in, src);
    for (std::size_t p = 0; p < 2; ++p) {
        std::uint64_t inf = 0, prep = 0, samples = 0;
        for (const auto& t : res.traces[p]) {
            for (const auto& s : t.samples) inf += s.input_tokens + s.output_tokens;
            for (const auto& s : t.prepare_samples) prep += s.input_tokens + s.output_tokens;
            samples += t.samples.size();
        }
        const auto& r = res.reports[p];
        CHECK(r.inference_tokens_total == inf);
        CHECK(r.prepare_tokens_total == prep);
        CHECK(r.total_samples == samples);
        CHECK(r.inference_tokens_k == doctest::Approx(inf / 1000.0 / 80).epsilon(1e-12));
        CHECK(r.prepare_tokens_k == doctest::Approx(prep / 1000.0 / 80).epsilon(1e-12));
    }
}

TEST_CASE("ACTSC never uses more samples than SC on average") {
    SyntheticConfig cfg;
    cfg.problems = 10000;
    cfg.neurons = 16;
    cfg.planted = {1, 5, 9};
    const auto probs = make_synthetic(cfg);
    SimSource src(probs.sims, 42);
    ProbeModel m = ProbeModel::zero({1});
    m.weights = {-3.0};
    m.normalizer.mean = {0.5};
    BenchmarkInputs in;
    in.records = probs.dataset.records;
    in.probe = &m;
    in.policies = {{Policy::sc, {}}, {Policy::actsc, {}}};
    const auto res = run_benchmark(in, src);
    CHECK(res.reports[1].avg_samples <= res.reports[0].avg_samples);
}

TEST_CASE("logit export") {
    TempDir dir;
    std::vector<ActivationRecord> rs = {rec("a", 1, {1, 0}), rec("b", std::nullopt, {0, 1})};
    export_probe_logits(ProbeModel::zero({0, 1}), rs, dir / "z.csv");
    CHECK(slurp(dir / "z.csv") == "problem_id,difficulty,logit,p_hard\na,1,0,0.5\nb,,0,0.5\n");

    std::vector<ActivationRecord> train;
    for (int i = 0; i < 20; ++i)
        train.push_back(rec("t" + std::to_string(i), i % 2 ? 5 : 1, {i % 2 ? -1.f + 0.01f * i : 1.f + 0.01f * i}));
    DsnSelection d;
    d.union_set = d.easy_set = {0};
    const auto model = train_probe(build_training_set(train, d, 1, 5), {});
    export_probe_logits(model, train, dir / "t.csv");
    std::ifstream in(dir / "t.csv");
    std::string line;
    std::getline(in, line);
    double sum[2] = {0, 0};
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string id, diff, logit;
        std::getline(ss, id, ',');
        std::getline(ss, diff, ',');
        std::getline(ss, logit, ',');
        sum[diff == "5"] += std::stod(logit);
    }
    CHECK(sum[1] / 10 > sum[0] / 10);

    CHECK_THROWS_AS(export_probe_logits(model, train, dir / "no" / "dir.csv"), IoError);
    std::vector<ActivationRecord> odd = {rec("x,y", 1, {0})};
    export_probe_logits(model, odd, dir / "q.csv");
    CHECK(slurp(dir / "q.csv").find("\"x,y\",1,") != std::string::npos);
}

TEST_CASE("persistence round trips") {
    TempDir dir;
    std::vector<ActivationRecord> rs = {rec("a", 1, {1, 0, 2}), rec("b", 5, {0, 1, 2}), rec("c", 1, {1, 0.1f, 2})};
    GapConfig gc;
    const auto dsn = identify_dsn(rs, gc);
    save_dsn(dsn, gc, dir / "d.json");
    CHECK(load_dsn(dir / "d.json") == dsn);

    const auto model = train_probe(build_training_set(rs, dsn, 1, 5), {});
    save_probe(model, dir / "p.json");
    const auto back = load_probe(dir / "p.json");
    CHECK(back.weights == model.weights);
    CHECK(back.bias == model.bias);
    CHECK(back.normalizer == model.normalizer);
    CHECK(back.dsn.union_set == model.dsn.union_set);
    CHECK(back.meta.epochs_run == model.meta.epochs_run);

    save_tau({0.25, "x", 3}, dir / "t.json");
    CHECK(load_tau(dir / "t.json").tau == 0.25);
    save_tau({1.5, "x", 3}, dir / "bad.json");
    CHECK_THROWS_AS(load_tau(dir / "bad.json"), ValidationError);

    testsupport::ScriptedStream s({"A", "B", "C", "D", "E", "A", "A", "A", "A"});
    PolicyConfig pc;
    pc.tau = 0.5;
    const std::vector<SamplingTrace> ts = {run_actsc(s, "p", 0.9, pc)};
    {
        std::ofstream out(dir / "tr.jsonl");
        write_traces(ts, out);
    }
    const auto tb = read_traces(dir / "tr.jsonl");
    REQUIRE(tb.size() == 1);
    CHECK(tb[0].samples == ts[0].samples);
    CHECK(tb[0].draw_sizes == ts[0].draw_sizes);
    CHECK(tb[0].p_hard == ts[0].p_hard);
    CHECK(tb[0].stop_reason == ts[0].stop_reason);
}
