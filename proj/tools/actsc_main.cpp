// actsc command-line driver.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>

#include "actsc/activation_store.hpp"
#include "actsc/calibration.hpp"
#include "actsc/controllers.hpp"
#include "actsc/dsn.hpp"
#include "actsc/error.hpp"
#include "actsc/harness.hpp"
#include "actsc/io.hpp"
#include "actsc/live_sampler.hpp"
#include "actsc/probe.hpp"
#include "actsc/samplers.hpp"
#include "actsc/synthetic.hpp"

namespace {

using namespace actsc;

Dataset read_dataset(const std::string& path, const std::string& format) {
    return load_dataset(path, format.empty() ? dump_format_for(path) : parse_dump_format(format));
}

struct RunOptions {
    std::string sampler = "sim";
    std::string sim_spec;
    std::string pool;
    std::string prompts;
    std::string dataset;
    std::string format;
    std::string probe;
    std::string tau_file;
    std::optional<double> tau;
    std::uint64_t seed = 0;
    std::string trace_out;
    std::string report_out;
    std::string report_format = "text";
    int threads = 0;
    bool serial = false;
    PolicyConfig policy;
    std::string conf_scope = "global";
    LiveSamplerConfig live;
    std::string answer_pattern = "boxed";
    std::string batch_mode = "n";
    int timeout_s = 120;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--sampler", o.sampler, "Answer source")->check(CLI::IsMember({"sim", "replay", "live"}));
    cmd->add_option("--sim-spec", o.sim_spec, "Sim spec JSONL (sim sampler)");
    cmd->add_option("--pool", o.pool, "Sample pool JSONL (replay sampler)");
    cmd->add_option("--prompts", o.prompts, "Prompt JSONL (live sampler)");
    cmd->add_option("--dataset", o.dataset, "Activation dump; defines the problem list");
    cmd->add_option("--format", o.format, "Dump format (jsonl|packed); default from extension");
    cmd->add_option("--probe", o.probe, "Trained probe JSON (actsc)");
    cmd->add_option("--tau-file", o.tau_file, "Calibrated tau JSON");
    cmd->add_option("--tau", o.tau, "Fixed routing threshold, overrides --tau-file");
    cmd->add_option("--seed", o.seed, "Global seed for the sim sampler");
    cmd->add_option("--k-max", o.policy.k_max, "Sample budget")->capture_default_str();
    cmd->add_option("--window", o.policy.actsc_window, "ACTSC window w")->capture_default_str();
    cmd->add_option("--gamma", o.policy.actsc_gamma, "ACTSC confidence threshold")->capture_default_str();
    cmd->add_option("--conf-scope", o.conf_scope, "ACTSC confidence scope")
        ->check(CLI::IsMember({"global", "window"}));
    cmd->add_option("--ac-threshold", o.policy.ac_threshold)->capture_default_str();
    cmd->add_option("--ac-min-samples", o.policy.ac_min_samples)->capture_default_str();
    cmd->add_option("--esc-window", o.policy.esc_window)->capture_default_str();
    cmd->add_option("--dsc-presamples", o.policy.dsc_presamples)->capture_default_str();
    cmd->add_option("--dsc-threshold", o.policy.dsc_threshold)->capture_default_str();
    cmd->add_option("--trace-out", o.trace_out, "Write traces as JSONL");
    cmd->add_option("--report-out", o.report_out, "Write the report here instead of stdout");
    cmd->add_option("--report-format", o.report_format)->check(CLI::IsMember({"text", "json", "csv"}));
    cmd->add_option("--threads", o.threads, "Worker threads (0 = OpenMP default)");
    cmd->add_flag("--serial", o.serial, "Run problems sequentially");
    cmd->add_option("--endpoint", o.live.endpoint_url, "Chat-completions endpoint (live)");
    cmd->add_option("--model", o.live.model_name, "Model name (live)");
    cmd->add_option("--temperature", o.live.temperature)->capture_default_str();
    cmd->add_option("--top-p", o.live.top_p)->capture_default_str();
    cmd->add_option("--max-tokens", o.live.max_output_tokens)->capture_default_str();
    cmd->add_option("--max-retries", o.live.max_retries)->capture_default_str();
    cmd->add_option("--timeout", o.timeout_s, "Request timeout in seconds")->capture_default_str();
    cmd->add_option("--prompt-template", o.live.prompt_template)->capture_default_str();
    cmd->add_option("--answer-pattern", o.answer_pattern)->check(CLI::IsMember({"boxed", "final-answer-line"}));
    cmd->add_option("--batch-mode", o.batch_mode, "n: one request with n choices; parallel: single requests")
        ->check(CLI::IsMember({"n", "parallel"}));
}

std::unique_ptr<AnswerSource> make_source(RunOptions& o) {
    if (o.sampler == "sim") {
        if (o.sim_spec.empty()) throw ConfigError("--sampler sim needs --sim-spec");
        return std::make_unique<SimSource>(load_sim_specs(o.sim_spec), o.seed);
    }
    if (o.sampler == "replay") {
        if (o.pool.empty()) throw ConfigError("--sampler replay needs --pool");
        return std::make_unique<ReplaySource>(load_sample_pool(o.pool));
    }
    if (o.prompts.empty()) throw ConfigError("--sampler live needs --prompts");
    o.live.answer_pattern = parse_answer_pattern(o.answer_pattern);
    o.live.batch_mode = o.batch_mode == "n" ? BatchMode::n_param : BatchMode::parallel;
    o.live.request_timeout = std::chrono::seconds(o.timeout_s);
    if (const char* key = std::getenv(kApiKeyEnv)) o.live.api_key = key;
    return std::make_unique<LiveSource>(o.live, load_live_prompts(o.prompts));
}

int run_policies(RunOptions& o, const std::vector<Policy>& policies) {
    if (o.threads > 0) omp_set_num_threads(o.threads);
    o.policy.conf_scope = parse_conf_scope(o.conf_scope);
    auto source = make_source(o);

    Dataset ds;
    if (!o.dataset.empty()) ds = read_dataset(o.dataset, o.format);
    std::optional<ProbeModel> probe;
    if (!o.probe.empty()) probe = load_probe(o.probe);

    BenchmarkInputs in;
    in.dataset_name = ds.manifest.name.empty() ? std::string("dataset") : ds.manifest.name;
    in.records = ds.records;
    in.probe = probe ? &*probe : nullptr;
    if (o.tau)
        in.tau = o.tau;
    else if (!o.tau_file.empty())
        in.tau = load_tau(o.tau_file).tau;
    in.exec = o.serial ? Exec::serial : Exec::parallel;
    for (auto p : policies) in.policies.push_back({p, o.policy});

    const auto result = run_benchmark(in, *source);

    if (!o.trace_out.empty()) {
        std::ofstream out(o.trace_out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + o.trace_out + "' for writing");
        for (const auto& traces : result.traces) write_traces(traces, out);
        if (!out) throw IoError("write failed for '" + o.trace_out + "'");
    }
    const auto text = render_report(result.reports, parse_report_format(o.report_format));
    if (o.report_out.empty())
        std::cout << text;
    else
        write_text_file(o.report_out, text);
    if (result.tau) std::cerr << "tau = " << *result.tau << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Activation-informed difficulty-aware self-consistency"};
    app.require_subcommand(1);

    // validate
    std::string v_dataset, v_format;
    auto* validate = app.add_subcommand("validate", "Check an activation dump");
    validate->add_option("--dataset", v_dataset)->required();
    validate->add_option("--format", v_format)->check(CLI::IsMember({"jsonl", "packed"}));

    // synth
    SyntheticConfig s_cfg;
    std::string s_dataset, s_sim, s_pool, s_format;
    std::size_t s_pool_k = 40;
    auto* synth = app.add_subcommand("synth", "Generate a planted-signal dataset and matching sim specs");
    synth->add_option("--problems", s_cfg.problems)->capture_default_str();
    synth->add_option("--neurons", s_cfg.neurons)->capture_default_str();
    synth->add_option("--shift", s_cfg.shift)->capture_default_str();
    synth->add_option("--noise", s_cfg.noise)->capture_default_str();
    synth->add_option("--seed", s_cfg.seed)->capture_default_str();
    synth->add_option("--population-seed", s_cfg.population_seed, "Seeds per-neuron baselines")->capture_default_str();
    synth->add_option("--name", s_cfg.name)->capture_default_str();
    synth->add_option("--out-dataset", s_dataset)->required();
    synth->add_option("--out-sim", s_sim, "Sim spec JSONL");
    synth->add_option("--out-pool", s_pool, "Replay pool JSONL drawn from the sim specs");
    synth->add_option("--pool-samples", s_pool_k)->capture_default_str();
    synth->add_option("--format", s_format)->check(CLI::IsMember({"jsonl", "packed"}));

    // dsn-identify
    std::string d_dataset, d_format, d_out, d_mode = "sign";
    GapConfig d_cfg;
    auto* dsn_cmd = app.add_subcommand("dsn-identify", "Select difficulty-sensitive neurons");
    dsn_cmd->add_option("--dataset", d_dataset)->required();
    dsn_cmd->add_option("--format", d_format)->check(CLI::IsMember({"jsonl", "packed"}));
    dsn_cmd->add_option("--theta-easy", d_cfg.theta_easy)->capture_default_str();
    dsn_cmd->add_option("--theta-hard", d_cfg.theta_hard)->capture_default_str();
    dsn_cmd->add_option("--margin", d_cfg.margin)->capture_default_str();
    dsn_cmd->add_option("--mode", d_mode)->check(CLI::IsMember({"sign", "abs", "top_k"}))->capture_default_str();
    dsn_cmd->add_option("--top-k", d_cfg.top_k)->capture_default_str();
    dsn_cmd->add_option("--out", d_out)->required();

    // probe-train
    std::string t_dataset, t_format, t_dsn, t_out;
    TrainConfig t_cfg;
    int t_theta_easy = 1, t_theta_hard = 5;
    auto* train = app.add_subcommand("probe-train", "Train the difficulty probe");
    train->add_option("--dataset", t_dataset)->required();
    train->add_option("--format", t_format)->check(CLI::IsMember({"jsonl", "packed"}));
    train->add_option("--dsn", t_dsn)->required();
    train->add_option("--lr", t_cfg.learning_rate)->capture_default_str();
    train->add_option("--epochs", t_cfg.epochs)->capture_default_str();
    train->add_option("--l2", t_cfg.l2)->capture_default_str();
    train->add_option("--tol", t_cfg.convergence_tol)->capture_default_str();
    train->add_option("--theta-easy", t_theta_easy)->capture_default_str();
    train->add_option("--theta-hard", t_theta_hard)->capture_default_str();
    train->add_option("--out", t_out)->required();

    // probe-eval
    std::string e_probe, e_dataset, e_format, e_logits;
    auto* eval = app.add_subcommand("probe-eval", "Evaluate a probe and export logits");
    eval->add_option("--probe", e_probe)->required();
    eval->add_option("--dataset", e_dataset)->required();
    eval->add_option("--format", e_format)->check(CLI::IsMember({"jsonl", "packed"}));
    eval->add_option("--logits-out", e_logits, "CSV problem_id,difficulty,logit,p_hard");

    // calibrate-tau
    std::string c_probe, c_dataset, c_format, c_out;
    auto* calib = app.add_subcommand("calibrate-tau", "Routing threshold as the mean P(hard)");
    calib->add_option("--probe", c_probe)->required();
    calib->add_option("--dataset", c_dataset)->required();
    calib->add_option("--format", c_format)->check(CLI::IsMember({"jsonl", "packed"}));
    calib->add_option("--out", c_out)->required();

    // run / compare
    RunOptions r_opts;
    std::string r_policy;
    auto* run = app.add_subcommand("run", "Run one sampling policy");
    run->add_option("--policy", r_policy)->required()->check(CLI::IsMember({"sc", "ac", "esc", "dsc", "actsc"}));
    add_run_options(run, r_opts);

    RunOptions m_opts;
    std::string m_policies = "sc,ac,esc,dsc,actsc";
    auto* compare = app.add_subcommand("compare", "Run several policies on paired streams and tabulate");
    compare->add_option("--policies", m_policies)->capture_default_str();
    add_run_options(compare, m_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            const auto ds = read_dataset(v_dataset, v_format);
            std::size_t labeled = 0;
            for (const auto& r : ds.records) labeled += r.difficulty ? 1 : 0;
            std::cout << "ok: " << ds.manifest.record_count << " records, " << ds.manifest.neuron_count
                      << " neurons, " << labeled << " labeled\n";
        } else if (*synth) {
            const auto problems = make_synthetic(s_cfg);
            const auto fmt = s_format.empty() ? dump_format_for(s_dataset) : parse_dump_format(s_format);
            save_dataset(problems.dataset, s_dataset, fmt);
            if (!s_sim.empty()) save_sim_specs(problems.sims, s_sim);
            if (!s_pool.empty()) {
                SimSource src(problems.sims, s_cfg.seed);
                SamplePool pool;
                for (const auto& sim : problems.sims)
                    pool[sim.problem_id] = {sim.gold_answer, src.open(sim.problem_id)->draw(s_pool_k)};
                save_sample_pool(pool, s_pool);
            }
            std::cout << "wrote " << problems.dataset.records.size() << " problems\n";
        } else if (*dsn_cmd) {
            d_cfg.mode = parse_selection_mode(d_mode);
            const auto ds = read_dataset(d_dataset, d_format);
            const auto sel = identify_dsn(ds.records, d_cfg);
            save_dsn(sel, d_cfg, d_out);
            std::cout << "selected " << sel.union_set.size() << " of " << ds.manifest.neuron_count << " neurons ("
                      << sel.easy_set.size() << " easy, " << sel.hard_set.size() << " hard)\n";
        } else if (*train) {
            const auto ds = read_dataset(t_dataset, t_format);
            const auto sel = load_dsn(t_dsn);
            auto model = train_probe(build_training_set(ds.records, sel, t_theta_easy, t_theta_hard), t_cfg);
            model.theta_easy = t_theta_easy;
            model.theta_hard = t_theta_hard;
            save_probe(model, t_out);
            std::cout << "final loss " << model.meta.final_loss << " after " << model.meta.epochs_run << " epochs\n";
        } else if (*eval) {
            const auto model = load_probe(e_probe);
            const auto ds = read_dataset(e_dataset, e_format);
            std::vector<ActivationRecord> labeled;
            std::vector<int> labels;
            for (const auto& r : ds.records) {
                if (!r.difficulty) continue;
                if (*r.difficulty <= model.theta_easy || *r.difficulty >= model.theta_hard) {
                    labeled.push_back(r);
                    labels.push_back(*r.difficulty >= model.theta_hard ? 1 : 0);
                }
            }
            if (!labeled.empty()) {
                const auto ev = evaluate_probe(model, labeled, labels);
                std::cout << "accuracy " << ev.accuracy << " mean_bce " << ev.mean_bce << " on " << labeled.size()
                          << " labeled records\n";
            } else {
                std::cout << "no records at the probe's easy/hard levels; skipping accuracy\n";
            }
            if (!e_logits.empty()) export_probe_logits(model, ds.records, e_logits);
        } else if (*calib) {
            const auto model = load_probe(c_probe);
            const auto ds = read_dataset(c_dataset, c_format);
            const auto cal = calibrate_tau(model, ds.records, ds.manifest.name);
            save_tau(cal, c_out);
            std::cout << "tau " << cal.tau << " over " << cal.n << " records\n";
        } else if (*run) {
            return run_policies(r_opts, {parse_policy(r_policy)});
        } else if (*compare) {
            std::vector<Policy> policies;
            std::stringstream ss(m_policies);
            for (std::string item; std::getline(ss, item, ',');)
                if (!item.empty()) policies.push_back(parse_policy(item));
            return run_policies(m_opts, policies);
        }
    } catch (const std::exception& e) {
        std::cerr << "actsc: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
