// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/io.hpp"

#include "dmoe/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmoe {

using nlohmann::json;

namespace {

const char* kind_name(ExpertKind kind) {
    return kind == ExpertKind::GaussianRegression ? "gaussian_regression" : "binary_logistic";
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ParseError("missing field '" + path + key + "'");
    }
    return obj.at(key);
}

double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) {
        throw ParseError("field '" + field + "' must be a number");
    }
    return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& field) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ParseError("field '" + field + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

Vector as_vector(const json& v, std::size_t expected, const std::string& field) {
    if (!v.is_array() || v.size() != expected) {
        throw ParseError("field '" + field + "' must be an array of " + std::to_string(expected) + " numbers");
    }
    Vector out(static_cast<Eigen::Index>(expected));
    for (std::size_t j = 0; j < expected; ++j) {
        out(static_cast<Eigen::Index>(j)) = as_number(v[j], field + "[" + std::to_string(j) + "]");
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

double parse_double(std::string_view token, std::size_t line) {
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) token.remove_suffix(1);
    double v = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("line " + std::to_string(line) + ": cannot parse '" + std::string(token) + "' as a number");
    }
    return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

json model_to_json(const MoEParams& params) {
    json doc;
    doc["kind"] = kind_name(params.kind());
    doc["K"] = params.K();
    doc["d"] = params.d();
    json alpha = json::array();
    for (Eigen::Index k = 0; k < params.gating().alpha.rows(); ++k) {
        json row = json::array();
        for (Eigen::Index j = 0; j < params.gating().alpha.cols(); ++j) row.push_back(params.gating().alpha(k, j));
        alpha.push_back(std::move(row));
    }
    doc["alpha"] = std::move(alpha);
    json experts = json::array();
    for (const auto& e : params.experts()) {
        json ej;
        ej["beta"] = std::vector<double>(e.beta.data(), e.beta.data() + e.beta.size());
        if (e.kind == ExpertKind::GaussianRegression) ej["sigma2"] = e.sigma2;
        experts.push_back(std::move(ej));
    }
    doc["experts"] = std::move(experts);
    return doc;
}

MoEParams model_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("model document must be a JSON object");
    const auto& kind_v = require(doc, "kind", "");
    if (!kind_v.is_string()) throw ParseError("field 'kind' must be a string");
    ExpertKind kind;
    if (kind_v == "gaussian_regression") {
        kind = ExpertKind::GaussianRegression;
    } else if (kind_v == "binary_logistic") {
        kind = ExpertKind::BinaryLogistic;
    } else {
        throw ParseError("field 'kind' has unknown value '" + kind_v.get<std::string>() + "'");
    }
    const std::size_t K = as_count(require(doc, "K", ""), "K");
    const std::size_t d = as_count(require(doc, "d", ""), "d");
    if (K < 1) throw ParseError("field 'K' must be at least 1");

    const auto& alpha_v = require(doc, "alpha", "");
    if (!alpha_v.is_array() || alpha_v.size() != K - 1) {
        throw ParseError("field 'alpha' must hold K-1 = " + std::to_string(K - 1) + " rows");
    }
    GatingParams gating;
    gating.alpha.resize(static_cast<Eigen::Index>(K - 1), static_cast<Eigen::Index>(d + 1));
    for (std::size_t k = 0; k + 1 < K; ++k) {
        gating.alpha.row(static_cast<Eigen::Index>(k)) =
            as_vector(alpha_v[k], d + 1, "alpha[" + std::to_string(k) + "]").transpose();
    }

    const auto& experts_v = require(doc, "experts", "");
    if (!experts_v.is_array() || experts_v.size() != K) {
        throw ParseError("field 'experts' must hold K = " + std::to_string(K) + " entries");
    }
    std::vector<ExpertParams> experts;
    for (std::size_t k = 0; k < K; ++k) {
        const std::string path = "experts[" + std::to_string(k) + "].";
        const auto& ev = experts_v[k];
        Vector beta = as_vector(require(ev, "beta", path), d + 1, path + "beta");
        if (kind == ExpertKind::GaussianRegression) {
            const double s2 = as_number(require(ev, "sigma2", path), path + "sigma2");
            if (!(s2 > 0.0)) throw ParseError("field '" + path + "sigma2' must be positive");
            experts.push_back(ExpertParams::gaussian(std::move(beta), s2));
        } else {
            if (ev.contains("sigma2")) throw ParseError("field '" + path + "sigma2' is not allowed for logistic experts");
            experts.push_back(ExpertParams::logistic(std::move(beta)));
        }
    }
    try {
        return MoEParams(std::move(gating), std::move(experts));
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
}

std::string serialize(const MoEParams& params) { return model_to_json(params).dump(2); }

MoEParams deserialize(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    return model_from_json(doc);
}

void write_model(const std::filesystem::path& path, const MoEParams& params) {
    auto out = open_out(path);
    out << serialize(params) << '\n';
}

MoEParams read_model(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

std::string format_double(double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    auto out = open_out(path);
    const auto d = static_cast<Eigen::Index>(data.d());
    for (Eigen::Index j = 1; j <= d; ++j) out << 'x' << j << ',';
    out << "y\n";
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
        for (Eigen::Index j = 1; j <= d; ++j) out << format_double(data.X(i, j)) << ',';
        out << format_double(data.y(i)) << '\n';
    }
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv(line);
    if (header.size() < 2 || header.back() != "y") {
        throw ParseError("'" + path.string() + "': header must be x1,...,xd,y");
    }
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j] != "x" + std::to_string(j + 1)) {
            throw ParseError("'" + path.string() + "': header column " + std::to_string(j + 1) + " must be x" +
                             std::to_string(j + 1));
        }
    }
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != d + 1) {
            throw ParseError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected " +
                             std::to_string(d + 1) + " columns");
        }
        for (const auto& c : cells) values.push_back(parse_double(c, lineno));
        ++rows;
    }
    Dataset data;
    data.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d + 1));
    data.y.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        data.X(r, 0) = 1.0;
        for (std::size_t j = 0; j < d; ++j) data.X(r, static_cast<Eigen::Index>(j + 1)) = values[i * (d + 1) + j];
        data.y(r) = values[i * (d + 1) + d];
    }
    try {
        data.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    return data;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
    auto out = open_out(path);
    out << "label\n";
    for (int l : labels) out << l << '\n';
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || (line != "label" && line != "label\r")) {
        throw ParseError("'" + path.string() + "': header must be 'label'");
    }
    std::vector<int> out;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        int v = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc() || ptr != line.data() + line.size()) {
            throw ParseError("'" + path.string() + "': bad label '" + line + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace dmoe
