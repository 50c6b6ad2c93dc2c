// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/cli.hpp"

#include "dmoe/errors.hpp"
#include "dmoe/io.hpp"
#include "dmoe/metrics.hpp"
#include "dmoe/random.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace dmoe {

namespace {

using nlohmann::json;

enum Stream : std::uint64_t { kGenStream = 1, kSplitStream = 2, kRunStream = 3 };

const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    const json* v = find(obj, key);
    if (!v) throw ParseError("missing field '" + path + key + "'");
    return *v;
}

std::size_t count_field(const json& v, const std::string& path) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) throw ParseError("field '" + path + "' must be an integer");
    if (v.is_number_integer() && v.get<long long>() < 0) throw ParseError("field '" + path + "' must be nonnegative");
    return v.get<std::size_t>();
}

double number_field(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError("field '" + path + "' must be a number");
    return v.get<double>();
}

bool bool_field(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ParseError("field '" + path + "' must be true or false");
    return v.get<bool>();
}

void parse_em(const json& e, EmConfig& em) {
    if (const json* v = find(e, "max_iter")) em.max_iter = count_field(*v, "run.em.max_iter");
    if (const json* v = find(e, "tol")) em.tol = number_field(*v, "run.em.tol");
    if (const json* v = find(e, "n_init")) em.n_init = count_field(*v, "run.em.n_init");
    if (const json* v = find(e, "ridge")) em.ridge = number_field(*v, "run.em.ridge");
}

void parse_mm(const json& e, MmConfig& mm) {
    if (const json* v = find(e, "max_iter")) mm.max_iter = count_field(*v, "run.mm.max_iter");
    if (const json* v = find(e, "tol")) mm.tol = number_field(*v, "run.mm.tol");
    if (const json* v = find(e, "ridge")) mm.ridge = number_field(*v, "run.mm.ridge");
    if (const json* v = find(e, "init")) {
        if (*v == "best_local") {
            mm.init = MmInit::BestLocal;
        } else if (*v == "random_k_of_pooled") {
            mm.init = MmInit::RandomKOfPooled;
        } else {
            throw ParseError("field 'run.mm.init' must be \"best_local\" or \"random_k_of_pooled\"");
        }
    }
}

std::string metric_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_quote(const std::string& s) {
    if (s.empty()) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else if (c == '\n' || c == '\r') out += ' ';
        else out += c;
    }
    return out + "\"";
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
    if (!doc.is_object()) throw ParseError("experiment config must be a JSON object");
    ExperimentConfig c;
    if (const json* v = find(doc, "seed")) c.seed = count_field(*v, "seed");

    const json& gen = require(doc, "gen", "");
    if (!gen.is_object()) throw ParseError("field 'gen' must be an object");
    c.gen.K = count_field(require(gen, "K", "gen."), "gen.K");
    c.gen.d = count_field(require(gen, "d", "gen."), "gen.d");
    c.gen.N = count_field(require(gen, "N", "gen."), "gen.N");
    if (const json* v = find(gen, "param_range")) {
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_integer() || !(*v)[1].is_number_integer()) {
            throw ParseError("field 'gen.param_range' must be a pair of integers");
        }
        c.gen.param_low = (*v)[0].get<int>();
        c.gen.param_high = (*v)[1].get<int>();
    }
    if (const json* v = find(gen, "test_fraction")) c.gen.test_fraction = number_field(*v, "gen.test_fraction");

    c.run.K = c.gen.K;
    if (const json* run = find(doc, "run")) {
        if (!run->is_object()) throw ParseError("field 'run' must be an object");
        if (const json* v = find(*run, "M")) c.run.M = count_field(*v, "run.M");
        if (const json* v = find(*run, "S")) c.run.S = count_field(*v, "run.S");
        if (const json* v = find(*run, "workers")) c.run.workers = count_field(*v, "run.workers");
        if (const json* v = find(*run, "align_average")) c.run.align_average = bool_field(*v, "run.align_average");
        if (const json* v = find(*run, "estimators")) {
            if (!v->is_array() || v->empty()) throw ParseError("field 'run.estimators' must be a nonempty array");
            c.run.estimators.clear();
            for (const auto& name : *v) {
                const auto kind = name.is_string() ? parse_estimator(name.get<std::string>()) : std::nullopt;
                if (!kind) throw ParseError("field 'run.estimators' has an unknown entry " + name.dump());
                c.run.estimators.push_back(*kind);
            }
        }
        if (const json* v = find(*run, "em")) parse_em(*v, c.run.em);
        if (const json* v = find(*run, "mm")) parse_mm(*v, c.run.mm);
    }
    c.replicates = count_field(require(doc, "replicates", ""), "replicates");
    const json& out = require(doc, "output_dir", "");
    if (!out.is_string()) throw ParseError("field 'output_dir' must be a string");
    c.output_dir = out.get<std::string>();

    if (c.replicates < 1) throw ParseError("field 'replicates' must be at least 1");
    try {
        c.gen.validate();
        c.run.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_experiment_config(doc);
}

void cmd_generate(const ExperimentConfig& config, std::ostream& log) {
    GenConfig gen = config.gen;
    gen.seed = config.seed;
    const GeneratedTruth truth = generate_truth(gen);
    const GeneratedData data = generate_dataset(truth, gen);
    ensure_dir(config.output_dir);
    const auto data_path = config.output_dir / "dataset.csv";
    const auto labels_path = config.output_dir / "labels.csv";
    const auto truth_path = config.output_dir / "truth.json";
    write_dataset_csv(data_path, data.data);
    write_labels_csv(labels_path, data.labels);
    write_model(truth_path, truth.params);
    log << data_path.string() << ' ' << data.data.size() << " rows\n"
        << labels_path.string() << ' ' << data.labels.size() << " rows\n"
        << truth_path.string() << '\n';
}

RunSummary cmd_run(const ExperimentConfig& config, std::ostream& log) {
    ensure_dir(config.output_dir);
    std::ofstream results = open_output(config.output_dir / "results.csv");
    std::ofstream timing = open_output(config.output_dir / "timing.csv");
    results << kResultsHeader << '\n';
    timing << "replicate,machine,cpu_s,wall_s\n";
    results.flush();

    RunSummary summary;
    for (std::size_t r = 0; r < config.replicates; ++r) {
        const std::uint64_t rep_seed = derive_seed(config.seed, r);
        auto fail_row = [&](const std::string& estimator, const std::string& error) {
            results << r << ',' << rep_seed << ',' << estimator << ",,,,,,,," << csv_quote(error) << '\n';
            ++summary.rows;
            ++summary.errors;
        };
        try {
            GenConfig gen = config.gen;
            gen.seed = derive_seed(rep_seed, kGenStream);
            const GeneratedTruth truth = generate_truth(gen);
            const GeneratedData data = generate_dataset(truth, gen);
            const SplitResult parts = split(data.data, gen.test_fraction, derive_seed(rep_seed, kSplitStream));
            std::vector<int> test_labels;
            for (std::size_t i : parts.test_rows) test_labels.push_back(data.labels[i]);

            RunConfig run = config.run;
            run.seed = derive_seed(rep_seed, kRunStream);
            const ExperimentResult res = run_experiment(parts.train, parts.test, &truth.params, &test_labels, run);

            for (const auto& o : res.outcomes) {
                const auto& m = o.metrics;
                results << r << ',' << rep_seed << ',' << to_string(o.kind) << ',' << metric_cell(m.divergence) << ','
                        << metric_cell(m.loglik) << ',' << metric_cell(m.mse) << ',' << metric_cell(m.rpe) << ','
                        << metric_cell(m.ari) << ',' << format_double(m.time_s) << ',' << m.comm_scalars << ','
                        << csv_quote(o.error) << '\n';
                ++summary.rows;
                if (!o.error.empty()) ++summary.errors;
                if (o.kind == EstimatorKind::Reduction && !o.objective_trace.empty()) {
                    std::ofstream trace = open_output(config.output_dir / ("trace_" + std::to_string(r) + ".csv"));
                    trace << "iteration,objective\n";
                    for (std::size_t i = 0; i < o.objective_trace.size(); ++i) {
                        trace << i << ',' << format_double(o.objective_trace[i]) << '\n';
                    }
                }
            }
            for (std::size_t m = 0; m < res.timing.local_seconds.size(); ++m) {
                timing << r << ',' << m << ',' << format_double(res.timing.local_seconds[m]) << ','
                       << format_double(res.timing.local_wall_seconds[m]) << '\n';
            }
        } catch (const std::exception& e) {
            fail_row("", e.what());
        }
        results.flush();
        timing.flush();
        log << "replicate " << r + 1 << '/' << config.replicates << " done\n";
    }
    return summary;
}

json cmd_eval(const EvalInputs& inputs) {
    const MoEParams model = read_model(inputs.model);
    const Dataset data = read_dataset_csv(inputs.data);
    if (data.d() != model.d()) {
        throw ParseError("model has d = " + std::to_string(model.d()) + " but the data has " +
                         std::to_string(data.d()) + " covariates");
    }
    std::optional<MoEParams> truth;
    if (inputs.truth) {
        truth = read_model(*inputs.truth);
        if (truth->K() != model.K() || truth->d() != model.d() || truth->kind() != model.kind()) {
            throw ParseError("truth and model have different shapes");
        }
    }
    std::vector<int> labels;
    if (inputs.labels) {
        labels = read_labels_csv(*inputs.labels);
        if (labels.size() != data.size()) throw ParseError("label file and data have different row counts");
    }
    const std::size_t S = inputs.support_size > 0 ? std::min(inputs.support_size, data.size()) : data.size();
    const SupportSample support = draw_support(data, S, inputs.seed);
    const MetricsReport r =
        evaluate_model(model, data, truth ? &*truth : nullptr, inputs.labels ? &labels : nullptr, &support);

    json out = json::object();
    out["n"] = data.size();
    if (r.loglik) out["loglik"] = *r.loglik;
    if (r.rpe) out["rpe"] = *r.rpe;
    if (r.ari) out["ari"] = *r.ari;
    if (r.mse) out["mse"] = *r.mse;
    if (r.divergence) out["divergence"] = *r.divergence;
    return out;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Distributed mixture-of-experts estimation by transport-based reduction"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    std::size_t workers = 0;

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset and its true model");
    gen->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--seed", seed, "Override the config seed");
    gen->add_option("--out", out_dir, "Override the output directory");

    auto* run = app.add_subcommand("run", "Run all replicates of an experiment");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out_dir, "Override the output directory");
    run->add_option("--workers", workers, "Concurrent local fits (0: hardware concurrency)");

    EvalInputs eval_in;
    std::string truth_path, labels_path;
    auto* eval = app.add_subcommand("eval", "Evaluate a stored model on a dataset");
    eval->add_option("--model", eval_in.model, "Model JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eval_in.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--truth", truth_path, "True model JSON")->check(CLI::ExistingFile);
    eval->add_option("--labels", labels_path, "Latent label CSV")->check(CLI::ExistingFile);
    eval->add_option("--support-size", eval_in.support_size, "Rows used for the divergence (0: all)");
    eval->add_option("--seed", eval_in.seed, "Seed for the support subsample");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed() || run->parsed()) {
            ExperimentConfig config = load_experiment_config(config_path);
            if (gen->count("--seed") || run->count("--seed")) config.seed = seed;
            if (!out_dir.empty()) config.output_dir = out_dir;
            if (gen->parsed()) {
                cmd_generate(config, std::cout);
                return 0;
            }
            if (run->count("--workers")) config.run.workers = workers;
            const RunSummary s = cmd_run(config, std::cerr);
            std::cout << (config.output_dir / "results.csv").string() << ' ' << s.rows << " rows\n";
            if (s.errors > 0) {
                std::cerr << "error: " << s.errors << " result rows carry errors\n";
                return 1;
            }
            return 0;
        }
        if (!truth_path.empty()) eval_in.truth = truth_path;
        if (!labels_path.empty()) eval_in.labels = labels_path;
        std::cout << cmd_eval(eval_in).dump(2) << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace dmoe
