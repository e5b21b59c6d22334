#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "bispec/experiments.hpp"
#include "bispec/polyspectra.hpp"
#include "bispec/recovery.hpp"
#include "bispec/signal.hpp"

namespace bispec::io {

using json = nlohmann::json;

/// Shortest exact decimal form; "inf"/"-inf" for infinities so SNR columns
/// stay readable.
inline std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("fmt: to_chars failed");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("parse_double: trailing characters in '" + s + "'");
    return v;
}

/// Writes via a temp file in the same directory, then renames into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
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

// ---- Signal ----------------------------------------------------------

inline std::string signal_to_csv(const Signal& x) {
    std::string out = "index,re,im\n";
    for (std::size_t i = 0; i < x.n(); ++i)
        out += std::to_string(i) + "," + fmt(x.values[i].real()) + "," + fmt(x.values[i].imag()) + "\n";
    return out;
}

inline json signal_to_json(const Signal& x) {
    json values = json::array();
    for (const cd& z : x.values) values.push_back({z.real(), z.imag()});
    return json{{"n", x.n()},
                {"domain", x.domain == Domain::Time ? "time" : "frequency"},
                {"values", std::move(values)}};
}

/// CSV carries no domain tag; callers say what the file holds.
inline Signal signal_from_csv(const std::string& text, Domain domain) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"index", "re", "im"})
        throw std::invalid_argument("signal_from_csv: bad header");
    cvec values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3) throw std::invalid_argument("signal_from_csv: bad row");
        const auto idx = static_cast<std::size_t>(std::stoull(f[0]));
        if (idx != values.size()) throw std::invalid_argument("signal_from_csv: rows out of order");
        values.emplace_back(parse_double(f[1]), parse_double(f[2]));
    }
    return Signal(std::move(values), domain);
}

inline Signal signal_from_json(const json& j) {
    const std::string dom = j.at("domain").get<std::string>();
    if (dom != "time" && dom != "frequency") throw std::invalid_argument("signal_from_json: bad domain");
    cvec values;
    for (const auto& pair : j.at("values")) values.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    if (values.size() != j.at("n").get<std::size_t>()) throw std::invalid_argument("signal_from_json: n mismatch");
    return Signal(std::move(values), dom == "time" ? Domain::Time : Domain::Frequency);
}

// ---- BispectrumGrid --------------------------------------------------

inline std::string grid_to_csv(const BispectrumGrid& b) {
    std::string out = "k1,k2,re,im,observed\n";
    for (std::size_t k1 = 0; k1 < b.n; ++k1)
        for (std::size_t k2 = 0; k2 < b.n; ++k2)
            out += std::to_string(k1) + "," + std::to_string(k2) + "," + fmt(b.at(k1, k2).real()) + "," +
                   fmt(b.at(k1, k2).imag()) + "," + (b.observed(k1, k2) ? "1" : "0") + "\n";
    return out;
}

inline json grid_to_json(const BispectrumGrid& b) {
    json entries = json::array();
    for (std::size_t k1 = 0; k1 < b.n; ++k1)
        for (std::size_t k2 = 0; k2 < b.n; ++k2)
            entries.push_back({k1, k2, b.at(k1, k2).real(), b.at(k1, k2).imag(), b.observed(k1, k2) ? 1 : 0});
    return json{{"n", b.n}, {"entries", std::move(entries)}};
}

inline BispectrumGrid grid_from_rows(std::size_t n,
                                     const std::vector<std::tuple<std::size_t, std::size_t, double, double, bool>>& rows) {
    if (n < 4 || rows.size() != n * n) throw std::invalid_argument("bispectrum grid: need n*n entries");
    BispectrumGrid b(n);
    std::vector<bool> seen(n * n, false);
    for (const auto& [k1, k2, re, im, obs] : rows) {
        if (k1 >= n || k2 >= n) throw std::invalid_argument("bispectrum grid: index out of range");
        if (seen[k1 * n + k2]) throw std::invalid_argument("bispectrum grid: duplicate entry");
        seen[k1 * n + k2] = true;
        b.at(k1, k2) = cd(re, im);
        b.mask[k1 * n + k2] = obs ? 1 : 0;
    }
    return b;
}

inline BispectrumGrid grid_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        split_csv_line(line) != std::vector<std::string>{"k1", "k2", "re", "im", "observed"})
        throw std::invalid_argument("grid_from_csv: bad header");
    std::vector<std::tuple<std::size_t, std::size_t, double, double, bool>> rows;
    std::size_t max_index = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) throw std::invalid_argument("grid_from_csv: bad row");
        const auto k1 = static_cast<std::size_t>(std::stoull(f[0]));
        const auto k2 = static_cast<std::size_t>(std::stoull(f[1]));
        max_index = std::max({max_index, k1, k2});
        rows.emplace_back(k1, k2, parse_double(f[2]), parse_double(f[3]), f[4] == "1");
    }
    return grid_from_rows(max_index + 1, rows);
}

inline BispectrumGrid grid_from_json(const json& j) {
    const auto n = j.at("n").get<std::size_t>();
    std::vector<std::tuple<std::size_t, std::size_t, double, double, bool>> rows;
    for (const auto& e : j.at("entries"))
        rows.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>(),
                          e.at(3).get<double>(), e.at(4).get<int>() != 0);
    return grid_from_rows(n, rows);
}

// ---- CumulantGrid ----------------------------------------------------

inline std::string cumulant_to_csv(const CumulantGrid& c) {
    std::string out = "n1,n2,re,im\n";
    for (std::size_t n1 = 0; n1 < c.n; ++n1)
        for (std::size_t n2 = 0; n2 < c.n; ++n2)
            out += std::to_string(n1) + "," + std::to_string(n2) + "," + fmt(c.at(n1, n2).real()) + "," +
                   fmt(c.at(n1, n2).imag()) + "\n";
    return out;
}

// ---- SolverTrace -----------------------------------------------------

inline std::string trace_to_csv(const SolverTrace& trace) {
    std::string out = "iter,h,step_norm,alpha,delta\n";
    for (const IterRecord& r : trace.records)
        out += std::to_string(r.iter) + "," + fmt(r.h) + "," + fmt(r.step_norm) + "," + fmt(r.alpha) + "," +
               fmt(r.delta) + "\n";
    return out;
}

// ---- Configs ---------------------------------------------------------

inline SolverConfig solver_config_from_json(const json& j) {
    SolverConfig cfg;
    cfg.delta0 = j.value("delta0", cfg.delta0);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.gamma_shrink = j.value("gamma_shrink", cfg.gamma_shrink);
    cfg.armijo_c = j.value("armijo_c", cfg.armijo_c);
    cfg.backtrack = j.value("backtrack", cfg.backtrack);
    cfg.q = j.value("q", cfg.q);
    cfg.eps = j.value("eps", cfg.eps);
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    return cfg;
}

inline json solver_config_to_json(const SolverConfig& cfg) {
    return json{{"delta0", cfg.delta0},     {"gamma", cfg.gamma}, {"gamma_shrink", cfg.gamma_shrink},
                {"armijo_c", cfg.armijo_c}, {"backtrack", cfg.backtrack}, {"q", cfg.q},
                {"eps", cfg.eps},           {"max_iter", cfg.max_iter}};
}

inline InitConfig init_config_from_json(const json& j) {
    InitConfig cfg;
    cfg.gamma0 = j.value("gamma0", cfg.gamma0);
    cfg.gamma1 = j.value("gamma1", cfg.gamma1);
    cfg.gamma2 = j.value("gamma2", cfg.gamma2);
    cfg.n0 = j.value("n0", cfg.n0);
    return cfg;
}

inline json init_config_to_json(const InitConfig& cfg) {
    return json{{"gamma0", cfg.gamma0}, {"gamma1", cfg.gamma1}, {"gamma2", cfg.gamma2}, {"n0", cfg.n0}};
}

inline double snr_from_json(const json& v) {
    if (v.is_string()) return parse_double(v.get<std::string>());
    return v.get<double>();
}

inline TrialConfig trial_config_from_json(const json& j) {
    TrialConfig cfg;
    cfg.n = j.value("n", cfg.n);
    cfg.band_width = j.value("band_width", cfg.band_width);
    if (j.contains("snr_db")) cfg.snr_db = snr_from_json(j.at("snr_db"));
    cfg.removal_fraction = j.value("removal_fraction", cfg.removal_fraction);
    if (j.contains("init_mode")) {
        const std::string mode = j.at("init_mode").get<std::string>();
        if (mode == "spectral")
            cfg.init_mode = InitMode::Spectral;
        else if (mode == "perturbed")
            cfg.init_mode = InitMode::Perturbed;
        else
            throw std::invalid_argument("trial config: init_mode must be 'spectral' or 'perturbed'");
    }
    cfg.delta = j.value("delta", cfg.delta);
    if (j.contains("solver")) cfg.solver = solver_config_from_json(j.at("solver"));
    if (j.contains("init")) cfg.init = init_config_from_json(j.at("init"));
    cfg.seed.value = j.value("seed", cfg.seed.value);
    cfg.success_threshold = j.value("success_threshold", cfg.success_threshold);
    if (cfg.solver.q == 0) cfg.solver.q = cfg.n;
    return cfg;
}

inline json trial_config_to_json(const TrialConfig& cfg) {
    json j{{"n", cfg.n},
           {"band_width", cfg.band_width},
           {"removal_fraction", cfg.removal_fraction},
           {"init_mode", cfg.init_mode == InitMode::Spectral ? "spectral" : "perturbed"},
           {"delta", cfg.delta},
           {"solver", solver_config_to_json(cfg.solver)},
           {"init", init_config_to_json(cfg.init)},
           {"seed", cfg.seed.value},
           {"success_threshold", cfg.success_threshold}};
    j["snr_db"] = std::isinf(cfg.snr_db) ? json("inf") : json(cfg.snr_db);
    return j;
}

struct SweepConfig {
    TrialConfig base;
    AxisSpec axis1;
    AxisSpec axis2;
    std::size_t trials = 100;
};

inline SweepConfig sweep_config_from_json(const json& j) {
    SweepConfig cfg;
    cfg.base = trial_config_from_json(j.at("base"));
    auto parse_axis = [](const json& a) {
        AxisSpec axis;
        axis.name = a.at("name").get<std::string>();
        for (const auto& v : a.at("values")) axis.values.push_back(snr_from_json(v));
        return axis;
    };
    cfg.axis1 = parse_axis(j.at("axis1"));
    cfg.axis2 = parse_axis(j.at("axis2"));
    cfg.trials = j.value("trials", cfg.trials);
    return cfg;
}

inline json sweep_config_to_json(const SweepConfig& cfg) {
    auto axis_json = [](const AxisSpec& axis) {
        json values = json::array();
        for (double v : axis.values) values.push_back(std::isinf(v) ? json(v > 0 ? "inf" : "-inf") : json(v));
        return json{{"name", axis.name}, {"values", std::move(values)}};
    };
    return json{{"base", trial_config_to_json(cfg.base)},
                {"axis1", axis_json(cfg.axis1)},
                {"axis2", axis_json(cfg.axis2)},
                {"trials", cfg.trials}};
}

// ---- Sweep output ----------------------------------------------------

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "axis1,axis2,trials,mean_dist_init,mean_dist_final,success_rate,mean_iters,mean_wall_ms\n";
    for (const SweepRow& r : rows)
        out += fmt(r.axis1) + "," + fmt(r.axis2) + "," + std::to_string(r.trials) + "," + fmt(r.mean_dist_init) +
               "," + fmt(r.mean_dist_final) + "," + fmt(r.success_rate) + "," + fmt(r.mean_iters) + "," +
               fmt(r.mean_wall_ms) + "\n";
    return out;
}

inline json sweep_to_json(const std::vector<SweepRow>& rows, const SweepConfig& cfg) {
    json out_rows = json::array();
    for (const SweepRow& r : rows) {
        json row{{"axis1", std::isinf(r.axis1) ? json("inf") : json(r.axis1)},
                 {"axis2", std::isinf(r.axis2) ? json("inf") : json(r.axis2)},
                 {"trials", r.trials},
                 {"mean_dist_init", r.mean_dist_init},
                 {"mean_dist_final", r.mean_dist_final},
                 {"success_rate", r.success_rate},
                 {"mean_iters", r.mean_iters},
                 {"mean_wall_ms", r.mean_wall_ms}};
        out_rows.push_back(std::move(row));
    }
    return json{{"config", sweep_config_to_json(cfg)}, {"rows", std::move(out_rows)}};
}

}  // namespace bispec::io
