// SPDX-License-Identifier: MIT
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tenfactor/als.hpp"
#include "tenfactor/errors.hpp"
#include "tenfactor/factor_test.hpp"
#include "tenfactor/model.hpp"
#include "tenfactor/simulate.hpp"
#include "tenfactor/tensor.hpp"
#include "tenfactor/tpca.hpp"
#include "tenfactor/version.hpp"

namespace tenfactor {

static_assert(std::endian::native == std::endian::little,
              "binary tensor I/O assumes a little-endian host");

// Entry-count cap guarding against corrupt or hostile headers.
inline constexpr std::uint64_t k_max_tensor_elements = 1ull << 40;

// ---------------------------------------------------------------------------
// TNSR1 binary format: magic "TNSR", u8 version, u8 order, d little-endian
// u64 dims, then all values as little-endian f64 in mode-1-fastest order.
// ---------------------------------------------------------------------------

inline void write_tnsr(const std::string& path, const DenseTensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write("TNSR", 4);
    const std::uint8_t version = 1;
    const std::uint8_t order = static_cast<std::uint8_t>(t.order());
    out.write(reinterpret_cast<const char*>(&version), 1);
    out.write(reinterpret_cast<const char*>(&order), 1);
    for (Index dim : t.shape) {
        const std::uint64_t v = static_cast<std::uint64_t>(dim);
        out.write(reinterpret_cast<const char*>(&v), 8);
    }
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw io_error("short write: " + path);
}

inline DenseTensor read_tnsr(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    auto need = [&](char* dst, std::size_t n, std::size_t offset, const char* what) {
        in.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw parse_error(std::string("truncated TNSR file while reading ") + what,
                              offset + static_cast<std::size_t>(in.gcount()));
    };
    char magic[4];
    need(magic, 4, 0, "magic");
    if (std::memcmp(magic, "TNSR", 4) != 0)
        throw parse_error("bad magic, expected TNSR", 0);
    std::uint8_t version = 0, order = 0;
    need(reinterpret_cast<char*>(&version), 1, 4, "version");
    if (version != 1) throw parse_error("unsupported TNSR version", 4);
    need(reinterpret_cast<char*>(&order), 1, 5, "order");
    if (order == 0) throw parse_error("tensor order must be at least 1", 5);

    std::vector<Index> shape(order);
    std::uint64_t total = 1;
    for (int j = 0; j < order; ++j) {
        std::uint64_t dim = 0;
        need(reinterpret_cast<char*>(&dim), 8, 6 + 8 * static_cast<std::size_t>(j), "dims");
        if (dim == 0) throw parse_error("zero dimension in header", 6 + 8 * static_cast<std::size_t>(j));
        if (dim > k_max_tensor_elements / total)
            throw parse_error("dimension overflow in header", 6 + 8 * static_cast<std::size_t>(j));
        total *= dim;
        shape[j] = static_cast<Index>(dim);
    }
    const std::size_t header = 6 + 8 * static_cast<std::size_t>(order);
    std::vector<double> data(total);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (static_cast<std::uint64_t>(in.gcount()) != total * sizeof(double))
        throw parse_error("truncated TNSR file while reading values",
                          header + static_cast<std::size_t>(in.gcount()));
    return DenseTensor(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// CSV long format: header i1,...,id,value then one row per cell with 1-based
// indices. Reading requires dense coverage; dims are the observed maxima.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline void write_csv_long(const std::string& path, const DenseTensor& t) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    const Index d = t.order();
    for (Index j = 0; j < d; ++j) out << "i" << (j + 1) << ",";
    out << "value\n";
    std::vector<Index> idx(static_cast<std::size_t>(d), 0);
    for (Index lin = 0; lin < t.size(); ++lin) {
        for (Index j = 0; j < d; ++j) out << (idx[static_cast<std::size_t>(j)] + 1) << ",";
        out << detail::format_double(t.data[static_cast<std::size_t>(lin)]) << "\n";
        for (Index j = 0; j < d; ++j) {
            if (++idx[static_cast<std::size_t>(j)] < t.shape[static_cast<std::size_t>(j)]) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    if (!out) throw io_error("short write: " + path);
}

inline DenseTensor read_csv_long(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    std::string line;
    std::size_t offset = 0;
    if (!std::getline(in, line)) throw parse_error("empty csv-long file", 0);
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header.back() != "value")
        throw parse_error("csv-long header must be i1,...,id,value", 0);
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "i" + std::to_string(j + 1))
            throw parse_error("csv-long header must be i1,...,id,value", 0);
    offset += line.size() + 1;

    std::vector<std::vector<Index>> indices;
    std::vector<double> values;
    std::vector<Index> dims(d, 0);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            offset += line.size() + 1;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != d + 1)
            throw parse_error("csv-long row has wrong field count", offset);
        std::vector<Index> idx(d);
        for (std::size_t j = 0; j < d; ++j) {
            char* end = nullptr;
            const long long v = std::strtoll(fields[j].c_str(), &end, 10);
            if (end == fields[j].c_str() || *end != '\0' || v < 1)
                throw parse_error("csv-long index must be a positive integer", offset);
            idx[j] = static_cast<Index>(v) - 1;
            dims[j] = std::max(dims[j], static_cast<Index>(v));
        }
        char* end = nullptr;
        const double v = std::strtod(fields[d].c_str(), &end);
        if (end == fields[d].c_str() || *end != '\0')
            throw parse_error("csv-long value is not a number", offset);
        indices.push_back(std::move(idx));
        values.push_back(v);
        offset += line.size() + 1;
    }
    if (indices.empty()) throw parse_error("csv-long file has no data rows", offset);

    std::uint64_t total = 1;
    for (Index dim : dims) {
        if (static_cast<std::uint64_t>(dim) > k_max_tensor_elements / total)
            throw parse_error("dimension overflow inferred from csv-long indices", offset);
        total *= static_cast<std::uint64_t>(dim);
    }

    DenseTensor t(dims);
    std::vector<char> seen(t.data.size(), 0);
    for (std::size_t row = 0; row < indices.size(); ++row) {
        const std::size_t lin = t.linear_index(indices[row]);
        t.data[lin] = values[row];
        seen[lin] = 1;
    }
    for (std::size_t lin = 0; lin < seen.size(); ++lin) {
        if (seen[lin]) continue;
        std::vector<Index> idx(d);
        std::size_t rem = lin;
        for (std::size_t j = 0; j < d; ++j) {
            idx[j] = static_cast<Index>(rem % static_cast<std::size_t>(dims[j]));
            rem /= static_cast<std::size_t>(dims[j]);
        }
        std::ostringstream msg;
        msg << "csv-long is not dense: first missing cell (";
        for (std::size_t j = 0; j < d; ++j) msg << (j ? "," : "") << (idx[j] + 1);
        msg << ")";
        throw parse_error(msg.str(), offset);
    }
    return t;
}

inline DenseTensor read_tensor(const std::string& path, const std::string& format) {
    if (format == "tnsr") return read_tnsr(path);
    if (format == "csv-long") return read_csv_long(path);
    throw std::domain_error("unknown tensor format: " + format);
}

inline void write_tensor(const std::string& path, const DenseTensor& t,
                         const std::string& format) {
    if (format == "tnsr") return write_tnsr(path, t);
    if (format == "csv-long") return write_csv_long(path, t);
    throw std::domain_error("unknown tensor format: " + format);
}

inline std::string matrix_to_csv(const MatrixXd& m) {
    std::ostringstream out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << detail::format_double(m(i, j));
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// JSON result documents. All schemas are versioned and re-parseable.
// ---------------------------------------------------------------------------

using nlohmann::json;

namespace detail {

inline json matrix_row_major(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixXd matrix_from_row_major(const json& rows) {
    const Index r = static_cast<Index>(rows.size());
    if (r == 0) return MatrixXd(0, 0);
    const Index c = static_cast<Index>(rows.at(0).size());
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
    return m;
}

inline json vector_json(const VectorXd& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline VectorXd vector_from_json(const json& arr) {
    VectorXd v(static_cast<Index>(arr.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = arr.at(i).get<double>();
    return v;
}

inline json model_json(const CpModel& model) {
    json j;
    j["shape"] = model.shape;
    j["rank"] = model.rank();
    j["scales"] = vector_json(model.scales);
    json modes = json::array();
    for (const auto& m : model.modes) modes.push_back(matrix_row_major(m));
    j["modes"] = std::move(modes);
    return j;
}

inline void expect_schema(const json& j, const std::string& schema) {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != schema)
        throw parse_error("document is not schema " + schema, 0);
}

}  // namespace detail

inline json tpca_result_to_json(const TpcaFit& fit,
                                std::optional<std::uint64_t> seed = std::nullopt) {
    json j = detail::model_json(fit.model);
    j["schema"] = "tpca-result/1";
    j["library_version"] = k_version;
    j["estimator"] = "tpca";
    j["scale_rule"] = to_string(fit.scale_rule);
    j["projection_scales"] = detail::vector_json(fit.projection_scales);
    j["per_mode_scale_sq"] = detail::matrix_row_major(fit.per_mode_scale_sq);
    j["r_squared"] = fit.r_squared;
    j["residual_fro"] = fit.residual_fro;
    j["diagnostics"] = fit.diagnostics;
    if (seed) j["seed"] = *seed;
    return j;
}

inline json als_result_to_json(const AlsFit& fit, std::uint64_t seed) {
    json j = detail::model_json(fit.model);
    j["schema"] = "tpca-result/1";
    j["library_version"] = k_version;
    j["estimator"] = "als";
    j["seed"] = seed;
    json trace;
    trace["fits"] = fit.fit_trace;
    trace["converged"] = fit.converged;
    json events = json::array();
    for (const auto& [sweep, mode] : fit.ridge_events)
        events.push_back(json::array({sweep, mode}));
    trace["ridge_events"] = std::move(events);
    j["trace"] = std::move(trace);
    return j;
}

/// Reconstructs the CP model from any tpca-result/1 document.
inline CpModel parse_cp_model(const json& j) {
    detail::expect_schema(j, "tpca-result/1");
    CpModel model;
    model.shape = j.at("shape").get<std::vector<Index>>();
    model.scales = detail::vector_from_json(j.at("scales"));
    for (const auto& m : j.at("modes"))
        model.modes.push_back(detail::matrix_from_row_major(m));
    validate_cp_model(model);
    return model;
}

inline json factor_test_to_json(const FactorCountResult& res) {
    json j;
    j["schema"] = "factor-test/1";
    j["library_version"] = k_version;
    j["k"] = res.k;
    j["K"] = res.K;
    j["m"] = res.m;
    j["null_dim"] = res.null_dim;
    j["seed"] = res.seed;
    j["stats"] = detail::vector_json(res.stats);
    j["pvalues"] = detail::vector_json(res.pvalues);
    j["divergent"] = res.divergent;
    j["floored"] = res.floored;
    j["combined"] = res.combined;
    j["warnings"] = res.warnings;
    return j;
}

inline FactorCountResult parse_factor_test(const json& j) {
    detail::expect_schema(j, "factor-test/1");
    FactorCountResult res;
    res.k = j.at("k").get<int>();
    res.K = j.at("K").get<int>();
    res.m = j.at("m").get<int>();
    res.null_dim = j.at("null_dim").get<Index>();
    res.seed = j.at("seed").get<std::uint64_t>();
    res.stats = detail::vector_from_json(j.at("stats"));
    res.pvalues = detail::vector_from_json(j.at("pvalues"));
    res.divergent = j.at("divergent").get<std::vector<bool>>();
    res.floored = j.at("floored").get<std::vector<bool>>();
    res.combined = j.at("combined").get<std::map<std::string, double>>();
    res.warnings = j.at("warnings").get<std::vector<std::string>>();
    return res;
}

inline json mc_summary_to_json(const McSummary& s) {
    json j;
    j["schema"] = "mc-study/1";
    j["library_version"] = k_version;
    j["study"] = s.study;
    j["reps"] = s.reps;
    j["seed"] = s.seed;
    j["columns"] = s.columns;
    j["rows"] = s.rows;
    json aggregates = json::array();
    for (const auto& [name, value] : s.aggregates)
        aggregates.push_back(json::array({name, value}));
    j["aggregates"] = std::move(aggregates);
    j["notes"] = s.notes;
    return j;
}

inline McSummary parse_mc_summary(const json& j) {
    detail::expect_schema(j, "mc-study/1");
    McSummary s;
    s.study = j.at("study").get<std::string>();
    s.reps = j.at("reps").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.columns = j.at("columns").get<std::vector<std::string>>();
    s.rows = j.at("rows").get<std::vector<std::vector<double>>>();
    for (const auto& pair : j.at("aggregates"))
        s.aggregates.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
    s.notes = j.at("notes").get<std::vector<std::string>>();
    return s;
}

/// Tidy CSV: the columns header then one row per replication/grid point.
inline std::string mc_summary_to_csv(const McSummary& s) {
    std::ostringstream out;
    for (std::size_t c = 0; c < s.columns.size(); ++c)
        out << (c ? "," : "") << s.columns[c];
    out << "\n";
    for (const auto& row : s.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << detail::format_double(row[c]);
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// mc-study/1 config files: `key = value` lines, '#' comments.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

inline std::vector<Index> parse_shape(const std::string& s) {
    std::vector<Index> shape;
    for (const auto& part : split_on(s, ',')) {
        if (part.empty()) throw std::domain_error("empty dimension in shape: " + s);
        shape.push_back(static_cast<Index>(std::stoll(part)));
    }
    DenseTensor::validate_shape(shape);
    return shape;
}

}  // namespace detail

/// Parses a declarative study config (schema mc-study/1). Unknown keys are
/// rejected to catch typos.
inline McStudyConfig parse_mc_config(std::istream& in) {
    McStudyConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::domain_error("config line is not key = value: " + line);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "study") cfg.kind = study_kind_from_string(value);
        else if (key == "shape") cfg.shapes = {detail::parse_shape(value)};
        else if (key == "shapes") {
            cfg.shapes.clear();
            for (const auto& s : detail::split_on(value, ';'))
                cfg.shapes.push_back(detail::parse_shape(s));
        } else if (key == "ranks") {
            cfg.ranks.clear();
            for (const auto& s : detail::split_on(value, ','))
                cfg.ranks.push_back(static_cast<Index>(std::stoll(s)));
        } else if (key == "fit_rank") cfg.fit_rank = static_cast<Index>(std::stoll(value));
        else if (key == "rho") cfg.base.rho = std::stod(value);
        else if (key == "s_eps") cfg.base.s_eps = std::stod(value);
        else if (key == "s_u") cfg.base.s_u = std::stod(value);
        else if (key == "error_dist") {
            if (value == "gaussian") cfg.base.error_dist = ErrorDist::gaussian;
            else if (value == "student-t") cfg.base.error_dist = ErrorDist::student_t;
            else throw std::domain_error("unknown error_dist: " + value);
        } else if (key == "t_dof") cfg.base.t_dof = std::stod(value);
        else if (key == "d1") cfg.d1 = std::stod(value);
        else if (key == "d2_grid") {
            cfg.d2_grid.clear();
            for (const auto& s : detail::split_on(value, ','))
                cfg.d2_grid.push_back(std::stod(s));
        } else if (key == "k") cfg.test_k = std::stoi(value);
        else if (key == "K") cfg.test_K = std::stoi(value);
        else if (key == "m") cfg.test_m = std::stoi(value);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "null_dim") cfg.null_dim = static_cast<Index>(std::stoll(value));
        else if (key == "als_max_iter") cfg.als_max_iter = std::stoi(value);
        else if (key == "als_tol") cfg.als_tol = std::stod(value);
        else if (key == "reps") cfg.reps = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "threads") cfg.threads = std::stoi(value);
        else throw std::domain_error("unknown config key: " + key);
    }
    return cfg;
}

inline McStudyConfig parse_mc_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path);
    return parse_mc_config(in);
}

}  // namespace tenfactor
