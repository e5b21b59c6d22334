// bispec command-line front end: generation, forward maps, recovery, sweeps.
// Exit codes: 0 success, 2 input/config error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bispec/bispec.hpp"
#include "bispec/io.hpp"

namespace fs = std::filesystem;
using namespace bispec;

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("BISPEC_LOG");
    if (!env) return LogLevel::Info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[bispec] " << msg << "\n";
}

bool has_ext(const fs::path& p, const char* ext) { return p.extension() == ext; }

fs::path with_suffix(const fs::path& p, const char* suffix) {
    fs::path out = p;
    out.replace_extension();
    out += suffix;
    return out;
}

Signal load_signal(const fs::path& path, Domain csv_domain) {
    const std::string text = io::read_file(path);
    if (has_ext(path, ".json")) return io::signal_from_json(io::json::parse(text));
    if (has_ext(path, ".csv")) return io::signal_from_csv(text, csv_domain);
    throw std::invalid_argument("signal files must end in .csv or .json: " + path.string());
}

void store_signal(const fs::path& path, const Signal& x) {
    if (has_ext(path, ".json"))
        io::write_file_atomic(path, io::signal_to_json(x).dump(2) + "\n");
    else if (has_ext(path, ".csv"))
        io::write_file_atomic(path, io::signal_to_csv(x));
    else
        throw std::invalid_argument("signal files must end in .csv or .json: " + path.string());
}

BispectrumGrid load_grid(const fs::path& path) {
    const std::string text = io::read_file(path);
    if (has_ext(path, ".json")) return io::grid_from_json(io::json::parse(text));
    if (has_ext(path, ".csv")) return io::grid_from_csv(text);
    throw std::invalid_argument("bispectrum files must end in .csv or .json: " + path.string());
}

void store_grid(const fs::path& path, const BispectrumGrid& b) {
    if (has_ext(path, ".json"))
        io::write_file_atomic(path, io::grid_to_json(b).dump() + "\n");
    else if (has_ext(path, ".csv"))
        io::write_file_atomic(path, io::grid_to_csv(b));
    else
        throw std::invalid_argument("bispectrum files must end in .csv or .json: " + path.string());
}

struct CommonFlags {
    std::size_t n = 128;
    std::size_t band_width = 64;
    double snr_db = std::numeric_limits<double>::infinity();
    double removal = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string config_path;
    std::string out_path;
};

int cmd_generate(const CommonFlags& f) {
    const Signal x = generate_gaussian_spectrum(f.n, band_limited_at_origin(f.n, f.band_width), RngSeed{f.seed});
    store_signal(f.out_path, x);
    log_info("wrote signal n=" + std::to_string(f.n) + " band_width=" + std::to_string(f.band_width) + " to " +
             f.out_path);
    return 0;
}

int cmd_bispectrum(const std::string& in_path, const CommonFlags& f) {
    const Signal x = load_signal(in_path, Domain::Time);
    const Signal y = x.domain == Domain::Frequency ? x : dft(x);
    BispectrumGrid b = bispectrum(y);
    b = add_noise(b, f.snr_db, derive_seed(RngSeed{f.seed}, 2ull));
    b = mask_k1_rows(b, f.removal, derive_seed(RngSeed{f.seed}, 3ull));
    store_grid(f.out_path, b);
    log_info("wrote bispectrum grid n=" + std::to_string(b.n) + " to " + f.out_path);
    return 0;
}

int cmd_cumulant(const std::string& in_path, const CommonFlags& f) {
    const Signal x = load_signal(in_path, Domain::Time);
    const CumulantGrid c = third_order_cumulant(x.domain == Domain::Time ? x : idft(x));
    if (has_ext(f.out_path, ".csv"))
        io::write_file_atomic(f.out_path, io::cumulant_to_csv(c));
    else
        throw std::invalid_argument("cumulant output must end in .csv: " + f.out_path);
    log_info("wrote cumulant grid n=" + std::to_string(c.n) + " to " + f.out_path);
    return 0;
}

int cmd_sweep(const CommonFlags& f, CLI::App* sub) {
    if (f.config_path.empty()) throw std::invalid_argument("sweep requires --config");
    io::SweepConfig cfg = io::sweep_config_from_json(io::json::parse(io::read_file(f.config_path)));
    if (sub->count("--seed")) cfg.base.seed = RngSeed{f.seed};
    if (sub->count("--n")) cfg.base.n = f.n;
    if (sub->count("--band-width")) cfg.base.band_width = f.band_width;
    if (sub->count("--snr-db")) cfg.base.snr_db = f.snr_db;
    if (sub->count("--removal")) cfg.base.removal_fraction = f.removal;
    if (sub->count("--delta")) cfg.base.delta = f.delta;

    if (log_level() >= LogLevel::Info)
        std::cout << io::sweep_config_to_json(cfg).dump(2) << std::endl;  // effective config echo

    const auto rows = run_sweep(cfg.base, cfg.axis1, cfg.axis2, cfg.trials, f.jobs);
    io::write_file_atomic(f.out_path, io::sweep_to_csv(rows));
    io::write_file_atomic(with_suffix(f.out_path, ".json"), io::sweep_to_json(rows, cfg).dump(2) + "\n");
    log_info("wrote " + std::to_string(rows.size()) + " sweep rows to " + f.out_path);
    return 0;
}

int cmd_recover(const std::string& bf_path, const std::string& method, const std::string& ref_path,
                const CommonFlags& f, CLI::App* sub) {
    const BispectrumGrid b = load_grid(bf_path);
    SolverConfig solver;
    InitConfig init;
    if (!f.config_path.empty()) {
        const io::json j = io::json::parse(io::read_file(f.config_path));
        if (j.contains("solver")) solver = io::solver_config_from_json(j.at("solver"));
        if (j.contains("init")) init = io::init_config_from_json(j.at("init"));
    }
    if (solver.q == 0) solver.q = b.n;

    std::optional<Signal> reference;
    if (!ref_path.empty()) reference = load_signal(ref_path, Domain::Time);

    io::json summary{{"method", method}, {"n", b.n}};
    summary["config"] = io::json{{"solver", io::solver_config_to_json(solver)}, {"init", io::init_config_to_json(init)}};

    Signal recovered = Signal::time(cvec(b.n));
    try {
        if (method == "oracle") {
            const std::size_t width = sub->count("--band-width") ? f.band_width : b.n / 2;
            recovered = idft(constructive_recover(b, band_limited_at_origin(b.n, width)));
            summary["band_width"] = width;
        } else if (method == "spectral-init") {
            recovered = init_spectral(b, init);
        } else if (method == "trust-region") {
            const Signal x0 = init_spectral(b, init);
            summary["initial_h"] = objective_h(dft(x0), b);
            auto [xhat, trace] = trust_region_solve(b, x0, solver, derive_seed(RngSeed{f.seed}, 5ull));
            recovered = std::move(xhat);
            summary["iterations"] = trace.iterations();
            summary["final_h"] = trace.records.empty() ? trace.initial_h : trace.records.back().h;
            summary["stop_reason"] = trace.stop_reason == StopReason::StepBelowTolerance ? "step_below_tolerance"
                                                                                         : "max_iterations";
            io::write_file_atomic(with_suffix(f.out_path, ".trace.csv"), io::trace_to_csv(trace));
        } else {
            throw std::invalid_argument("unknown method: " + method);
        }
    } catch (const diverged_error& e) {
        // numerical failure: keep the trace on disk, report through the summary
        io::write_file_atomic(with_suffix(f.out_path, ".trace.csv"), io::trace_to_csv(e.trace));
        summary["error"] = e.what();
        io::write_file_atomic(with_suffix(f.out_path, ".summary.json"), summary.dump(2) + "\n");
        std::cerr << "bispec: " << e.what() << "\n";
        return 3;
    }

    summary["final_objective"] = objective_h(dft(recovered), b);
    if (reference) {
        summary["dist"] = dist(*reference, recovered);
        // per-bin power spectrum, reference vs estimate, for external plotting
        const cvec yt = dft(*reference).values;
        const cvec ye = dft(recovered).values;
        std::string spectrum = "k,power_ref,power_est\n";
        for (std::size_t k = 0; k < b.n; ++k)
            spectrum += std::to_string(k) + "," + io::fmt(std::norm(yt[k])) + "," + io::fmt(std::norm(ye[k])) + "\n";
        io::write_file_atomic(with_suffix(f.out_path, ".spectrum.csv"), spectrum);
    }

    store_signal(f.out_path, recovered);
    io::write_file_atomic(with_suffix(f.out_path, ".summary.json"), summary.dump(2) + "\n");
    if (log_level() >= LogLevel::Info) std::cout << summary.dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bispectrum forward maps and inversion"};
    app.require_subcommand(1);

    CommonFlags f;
    std::string in_path, bf_path, ref_path, method = "trust-region";

    auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--n", f.n, "signal length");
        sub->add_option("--band-width", f.band_width, "band width B");
        sub->add_option("--snr-db", f.snr_db, "noise level (dB), inf for noiseless");
        sub->add_option("--removal", f.removal, "fraction of k1 rows removed");
        sub->add_option("--delta", f.delta, "perturbation scale");
        sub->add_option("--seed", f.seed, "master seed");
        sub->add_option("--jobs", f.jobs, "worker threads for sweeps");
        sub->add_option("--config", f.config_path, "JSON config file");
        auto* out = sub->add_option("--out", f.out_path, "output path");
        if (needs_out) out->required();
    };

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic band-limited signal");
    add_common(generate, true);

    CLI::App* bsp = app.add_subcommand("bispectrum", "compute the bispectrum of a signal file");
    bsp->add_option("--in", in_path, "input signal file")->required();
    add_common(bsp, true);

    CLI::App* cum = app.add_subcommand("cumulant", "compute the third-order cumulant of a signal file");
    cum->add_option("--in", in_path, "input signal file")->required();
    add_common(cum, true);

    CLI::App* rec = app.add_subcommand("recover", "invert a bispectrum file back to a signal");
    rec->add_option("--bf", bf_path, "bispectrum grid file")->required();
    rec->add_option("--method", method, "spectral-init | trust-region | oracle");
    rec->add_option("--ref", ref_path, "reference signal for dist reporting");
    add_common(rec, true);

    CLI::App* orc = app.add_subcommand("oracle", "constructive recovery (noiseless complete grids)");
    orc->add_option("--bf", bf_path, "bispectrum grid file")->required();
    orc->add_option("--ref", ref_path, "reference signal for dist reporting");
    add_common(orc, true);

    CLI::App* swp = app.add_subcommand("sweep", "run a Monte-Carlo sweep from a JSON config");
    add_common(swp, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(f);
        if (bsp->parsed()) return cmd_bispectrum(in_path, f);
        if (cum->parsed()) return cmd_cumulant(in_path, f);
        if (rec->parsed()) return cmd_recover(bf_path, method, ref_path, f, rec);
        if (orc->parsed()) return cmd_recover(bf_path, "oracle", ref_path, f, orc);
        if (swp->parsed()) return cmd_sweep(f, swp);
    } catch (const degenerate_signal_error& e) {
        std::cerr << "bispec: " << e.what() << "\n";
        return 3;
    } catch (const ill_conditioned_error& e) {
        std::cerr << "bispec: " << e.what() << "\n";
        return 3;
    } catch (const diverged_error& e) {
        std::cerr << "bispec: " << e.what() << "\n";
        return 3;
    } catch (const io::json::exception& e) {
        std::cerr << "bispec: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "bispec: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "bispec: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
