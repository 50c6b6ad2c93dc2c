// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/cli.hpp"
#include "dmoe/errors.hpp"
#include "dmoe/io.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace dmoe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dmoe_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string line; std::getline(ss, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Results CSV with the timing column blanked.
std::string without_timing(const std::string& csv) {
    std::string out;
    const auto header = split_csv(lines(csv).front());
    std::size_t col = 0;
    while (header[col] != "time_s") ++col;
    for (const auto& line : lines(csv)) {
        auto cells = split_csv(line);
        cells[col].clear();
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
        out += '\n';
    }
    return out;
}

json smoke_config(const fs::path& out, std::size_t replicates) {
    return json{{"seed", 11},
                {"gen", {{"K", 2}, {"d", 3}, {"N", 3000}}},
                {"run", {{"M", 3}, {"em", {{"n_init", 2}}}}},
                {"replicates", replicates},
                {"output_dir", out.string()}};
}

/// Checks the subset of JSON Schema used by the documented schemas.
bool conforms(const json& value, const json& schema, std::string& why) {
    if (schema.contains("type")) {
        const std::string t = schema["type"];
        const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                        (t == "number" && value.is_number()) || (t == "integer" && value.is_number_integer()) ||
                        (t == "string" && value.is_string());
        if (!ok) {
            why = "expected " + t + ", got " + value.dump();
            return false;
        }
    }
    if (schema.contains("minimum") && value.is_number() && value.get<double>() < schema["minimum"].get<double>()) {
        why = value.dump() + " below minimum";
        return false;
    }
    if (schema.contains("maximum") && value.is_number() && value.get<double>() > schema["maximum"].get<double>()) {
        why = value.dump() + " above maximum";
        return false;
    }
    if (value.is_object()) {
        for (const auto& key : schema.value("required", json::array())) {
            if (!value.contains(key.get<std::string>())) {
                why = "missing " + key.get<std::string>();
                return false;
            }
        }
        const json props = schema.value("properties", json::object());
        for (const auto& [key, v] : value.items()) {
            if (!props.contains(key)) {
                if (schema.value("additionalProperties", true) == false) {
                    why = "unexpected key " + key;
                    return false;
                }
                continue;
            }
            if (!conforms(v, props[key], why)) return false;
        }
    }
    return true;
}

int run_binary(const std::string& args, const fs::path& stderr_file) {
    const std::string cmd = std::string(DMOE_CLI_PATH) + " " + args + " >/dev/null 2>" + stderr_file.string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse_experiment_config(smoke_config("/tmp/x", 2));
    CHECK(c.seed == 11);
    CHECK(c.gen.K == 2);
    CHECK(c.run.M == 3);
    CHECK(c.run.em.n_init == 2);
    CHECK(c.replicates == 2);
    CHECK(c.run.estimators.size() == 4);

    json missing = smoke_config("/tmp/x", 1);
    missing["gen"].erase("N");
    try {
        parse_experiment_config(missing);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("gen.N") != std::string::npos);
    }
    json bad = smoke_config("/tmp/x", 1);
    bad["run"]["estimators"] = json::array({"global", "median"});
    CHECK_THROWS_AS(parse_experiment_config(bad), ParseError);
    bad = smoke_config("/tmp/x", 1);
    bad["run"]["mm"] = json{{"init", "random_k_of_pooled"}, {"max_iter", 7}};
    const auto mm = parse_experiment_config(bad);
    CHECK(mm.run.mm.init == MmInit::RandomKOfPooled);
    CHECK(mm.run.mm.max_iter == 7);
}

TEST_CASE("generate") {
    const auto dir = scratch("generate");
    json cfg = {{"seed", 3}, {"gen", {{"K", 4}, {"d", 20}, {"N", 1000}}}, {"replicates", 1}, {"output_dir", dir.string()}};
    std::ostringstream log;
    cmd_generate(parse_experiment_config(cfg), log);
    const auto data = lines(slurp(dir / "dataset.csv"));
    REQUIRE(data.size() == 1001);
    CHECK(split_csv(data[0]).size() == 21);
    CHECK(split_csv(data[0]).front() == "x1");
    CHECK(split_csv(data[0]).back() == "y");
    CHECK(split_csv(data[500]).size() == 21);
    CHECK(lines(slurp(dir / "labels.csv")).size() == 1001);
    const auto truth = read_model(dir / "truth.json");
    CHECK(truth.K() == 4);
    CHECK(truth.d() == 20);

    const std::string first = slurp(dir / "dataset.csv") + slurp(dir / "truth.json") + slurp(dir / "labels.csv");
    cmd_generate(parse_experiment_config(cfg), log);
    CHECK(first == slurp(dir / "dataset.csv") + slurp(dir / "truth.json") + slurp(dir / "labels.csv"));
}

TEST_CASE("run writes one row per estimator and replicate, deterministically") {
    const auto a = scratch("run_a");
    const auto b = scratch("run_b");
    std::ostringstream log;
    const auto sa = cmd_run(parse_experiment_config(smoke_config(a, 2)), log);
    const auto sb = cmd_run(parse_experiment_config(smoke_config(b, 2)), log);
    CHECK(sa.rows == 8);
    CHECK(sa.errors == 0);
    CHECK(sb.rows == 8);

    const std::string ra = slurp(a / "results.csv");
    const auto rows = lines(ra);
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == kResultsHeader);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(split_csv(rows[i]).size() == split_csv(rows[0]).size());
    CHECK(without_timing(ra) == without_timing(slurp(b / "results.csv")));
    CHECK(slurp(a / "trace_0.csv") == slurp(b / "trace_0.csv"));
    CHECK(fs::exists(a / "trace_1.csv"));
    CHECK(lines(slurp(a / "timing.csv")).size() == 1 + 2 * 3);
}

TEST_CASE("eval") {
    const auto dir = scratch("eval");
    json cfg = {{"seed", 5}, {"gen", {{"K", 2}, {"d", 2}, {"N", 400}}}, {"replicates", 1}, {"output_dir", dir.string()}};
    std::ostringstream log;
    cmd_generate(parse_experiment_config(cfg), log);

    EvalInputs in;
    in.model = dir / "truth.json";
    in.data = dir / "dataset.csv";
    in.truth = dir / "truth.json";
    in.labels = dir / "labels.csv";
    const json full = cmd_eval(in);
    CHECK(full["mse"].get<double>() == 0.0);
    CHECK(full["divergence"].get<double>() <= 1e-10);
    CHECK(full["n"].get<int>() == 400);

    const json schema = json::parse(slurp(fs::path(DMOE_FIXTURE_DIR) / ".." / ".." / "docs" / "metrics.schema.json"));
    std::string why;
    CHECK_MESSAGE(conforms(full, schema, why), why);

    EvalInputs bare = in;
    bare.truth.reset();
    bare.labels.reset();
    const json partial = cmd_eval(bare);
    CHECK_FALSE(partial.contains("mse"));
    CHECK_FALSE(partial.contains("divergence"));
    CHECK_FALSE(partial.contains("ari"));
    CHECK(conforms(partial, schema, why));
    CHECK_FALSE(conforms(json{{"n", 3}, {"loglik", 1.0}, {"ari", 2.0}}, schema, why));
}

TEST_CASE("binary exit codes") {
    const auto dir = scratch("exit");
    const fs::path err = dir / "stderr.txt";
    {
        std::ofstream(dir / "bad.json") << R"({"gen": {"K": 2, "d": 2}, "replicates": 1, "output_dir": "x"})";
    }
    CHECK(run_binary("generate --config " + (dir / "bad.json").string(), err) != 0);
    CHECK(slurp(err).find("gen.N") != std::string::npos);

    {
        std::ofstream(dir / "good.json") << json{{"seed", 1},
                                                 {"gen", {{"K", 2}, {"d", 2}, {"N", 600}}},
                                                 {"run", {{"M", 2}, {"em", {{"n_init", 1}}}}},
                                                 {"replicates", 1},
                                                 {"output_dir", (dir / "out").string()}}
                                                .dump();
    }
    CHECK(run_binary("run --config " + (dir / "good.json").string(), err) == 0);
    CHECK(lines(slurp(dir / "out" / "results.csv")).size() == 5);
    CHECK(run_binary("frobnicate", err) != 0);
}
