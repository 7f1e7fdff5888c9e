#pragma once

// File formats: numeric CSV for matrices and data sets (with a JSON sidecar
// carrying generator metadata), and JSON conversions for the report types.
// Doubles are printed with "%.17g" so files round-trip bit-exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbias/data.hpp"
#include "kbias/kernels.hpp"
#include "kbias/linalg.hpp"
#include "kbias/metrics.hpp"
#include "kbias/optim.hpp"
#include "kbias/spectral.hpp"

namespace kbias {

using nlohmann::json;

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --------------------------------------------------------------------------
// Matrix CSV
// --------------------------------------------------------------------------

inline void save_matrix_csv(const Matrix& m, const std::string& path) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += fmt_g17(m(i, j));
        }
        out += '\n';
    }
    write_text_file(path, out);
}

inline Matrix load_matrix_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged csv: " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty csv: " + path);
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

// --------------------------------------------------------------------------
// DataSet CSV + JSON sidecar
// --------------------------------------------------------------------------

/// Writes base_path.csv (rows of X, final column y when present) and
/// base_path.json with the generator metadata.
inline void save_dataset(const DataSet& ds, const std::string& base_path) {
    std::string out;
    const bool has_y = !ds.y.empty();
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            if (j) out += ',';
            out += fmt_g17(ds.X(i, j));
        }
        if (has_y) {
            out += ',';
            out += fmt_g17(ds.y[i]);
        }
        out += '\n';
    }
    write_text_file(base_path + ".csv", out);

    json meta;
    meta["seed"] = ds.seed;
    meta["generator_id"] = ds.generator_id;
    meta["n"] = ds.n();
    meta["p"] = ds.dim();
    meta["noise_sd"] = ds.noise_sd;
    meta["sq_norm_range"] = {ds.sq_norm_lo, ds.sq_norm_hi};
    meta["has_y"] = has_y;
    write_text_file(base_path + ".json", meta.dump(2) + "\n");
}

inline DataSet load_dataset(const std::string& base_path) {
    const json meta = json::parse(read_text_file(base_path + ".json"));
    const Matrix raw = load_matrix_csv(base_path + ".csv");
    DataSet ds;
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.generator_id = meta.at("generator_id").get<std::string>();
    ds.noise_sd = meta.at("noise_sd").get<double>();
    ds.sq_norm_lo = meta.at("sq_norm_range").at(0).get<double>();
    ds.sq_norm_hi = meta.at("sq_norm_range").at(1).get<double>();
    const bool has_y = meta.at("has_y").get<bool>();
    const std::size_t p = meta.at("p").get<std::size_t>();
    if (raw.cols() != p + (has_y ? 1 : 0))
        throw std::runtime_error("dataset csv does not match sidecar: " + base_path);
    ds.X = Matrix(raw.rows(), p);
    for (std::size_t i = 0; i < raw.rows(); ++i)
        for (std::size_t j = 0; j < p; ++j) ds.X(i, j) = raw(i, j);
    if (has_y) {
        ds.y.resize(raw.rows());
        for (std::size_t i = 0; i < raw.rows(); ++i) ds.y[i] = raw(i, p);
    }
    return ds;
}

// --------------------------------------------------------------------------
// JSON conversions
// --------------------------------------------------------------------------

inline json to_json(const KernelSpec& s) {
    json j;
    j["family"] = family_name(s.family);
    switch (s.family) {
        case KernelFamily::Polynomial:
            j["c"] = s.offset;
            j["m"] = s.degree;
            break;
        case KernelFamily::Rbf:
            j["gamma"] = s.gamma;
            break;
        case KernelFamily::Gaussian:
        case KernelFamily::Laplace:
            j["sigma"] = s.sigma;
            break;
        case KernelFamily::Sigmoid:
            j["alpha"] = s.alpha;
            j["c"] = s.offset;
            break;
        default:
            break;
    }
    return j;
}

inline KernelSpec kernel_spec_from_json(const json& j) {
    const KernelFamily fam = family_from_name(j.at("family").get<std::string>());
    switch (fam) {
        case KernelFamily::Bilinear: return KernelSpec::bilinear();
        case KernelFamily::Polynomial:
            return KernelSpec::polynomial(j.at("c").get<double>(), j.at("m").get<int>());
        case KernelFamily::Rbf: return KernelSpec::rbf(j.at("gamma").get<double>());
        case KernelFamily::Gaussian: return KernelSpec::gaussian(j.at("sigma").get<double>());
        case KernelFamily::Laplace: return KernelSpec::laplace(j.at("sigma").get<double>());
        case KernelFamily::Sigmoid:
            return KernelSpec::sigmoid(j.at("alpha").get<double>(), j.at("c").get<double>());
        case KernelFamily::CubicSpline: return KernelSpec::cubic_spline();
    }
    throw std::invalid_argument("kernel_spec_from_json: bad family");
}

inline json to_json(const Feasibility& f) {
    json j;
    j["tau"] = f.tau;
    j["lambda1"] = f.lambda1;
    j["lambda2"] = f.lambda2;
    j["lambda_n"] = f.lambda_n;
    j["gamma1"] = f.gamma1;
    j["gamma_n"] = f.gamma_n;
    j["constants"] = {{"c1", f.c1}, {"c2", f.c2}, {"c3", f.c3}, {"c4", f.c4},
                      {"c5", f.c5}, {"c6", f.c6}, {"c7", f.c7}};
    j["eta1_interval"] = {f.eta1_lo, f.eta1_hi};
    j["eta1_empty"] = f.eta1_empty;
    j["eta2_max"] = f.eta2_max;
    j["eta_gd_max"] = f.eta_gd_max;
    return j;
}

inline json to_json(const StepPlan& p) {
    json j;
    j["algo"] = algorithm_name(p.algo);
    j["stages"] = json::array();
    for (const auto& s : p.stages) j["stages"].push_back({{"eta", s.eta}, {"steps", s.steps}});
    if (p.feasibility) j["feasibility"] = to_json(*p.feasibility);
    return j;
}

inline StepPlan step_plan_from_json(const json& j) {
    StepPlan p;
    const std::string algo = j.at("algo").get<std::string>();
    if (algo == "sgd")
        p.algo = Algorithm::Sgd;
    else if (algo == "gd")
        p.algo = Algorithm::Gd;
    else
        throw std::invalid_argument("step_plan_from_json: bad algo " + algo);
    for (const auto& s : j.at("stages"))
        p.stages.push_back({s.at("eta").get<double>(), s.at("steps").get<std::size_t>()});
    p.validate();
    return p;
}

inline json to_json(const BiasMeasurement& m) {
    return {{"rq", m.rq},         {"rq_ratio", m.rq_ratio}, {"rrq", m.rrq},
            {"gamma1", m.gamma1}, {"gamma_n", m.gamma_n}};
}

inline json to_json(const GeneralizationRecord& r) {
    return {{"train_loss", r.train_loss}, {"est_error", r.est_error},
            {"delta_star", r.delta_star}, {"m_bound", r.m_bound},
            {"pred_mse", r.pred_mse}};
}

inline json to_json(const WilcoxonResult& w) {
    return {{"statistic", w.statistic}, {"p_value", w.p_value}, {"p_normal", w.p_normal},
            {"m", w.m},                 {"exact", w.exact},     {"zeros", w.zeros},
            {"ties", w.ties}};
}

inline json to_json(const SpectralReport& rep) {
    json j;
    j["n"] = rep.n;
    j["tau"] = rep.tau;
    j["ratio"] = rep.ratio;
    j["lambdas"] = rep.lambdas;
    j["gammas"] = rep.gammas;
    j["zero_eigenspace_dim"] = rep.zero_eigenspace_dim;
    j["all_pass"] = rep.all_pass();
    j["checks"] = json::array();
    for (const auto& c : rep.checks) {
        json cj;
        cj["name"] = c.name;
        cj["lhs"] = c.lhs;
        cj["bound"] = c.bound;
        cj["pass"] = c.pass;
        cj["skipped"] = c.skipped;
        cj["informational"] = c.informational;
        if (!c.note.empty()) cj["note"] = c.note;
        j["checks"].push_back(cj);
    }
    return j;
}

}  // namespace kbias
