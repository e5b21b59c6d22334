#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bispec/polyspectra.hpp"
#include "bispec/recovery.hpp"
#include "bispec/rng.hpp"
#include "bispec/signal.hpp"

namespace bispec {

/// Relative Frobenius error between the full bispectra of two signals,
/// dist(x, w) = |B_x - B_w|_F / |B_x|_F.
inline double dist(const Signal& x, const Signal& w) {
    if (x.n() != w.n()) throw std::invalid_argument("dist: length mismatch");
    const Signal yx = x.domain == Domain::Frequency ? x : dft(x);
    const Signal yw = w.domain == Domain::Frequency ? w : dft(w);
    const BispectrumGrid bx = bispectrum(yx);
    const BispectrumGrid bw = bispectrum(yw);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < bx.entries.size(); ++i) {
        num += std::norm(bx.entries[i] - bw.entries[i]);
        den += std::norm(bx.entries[i]);
    }
    if (den == 0.0) throw std::invalid_argument("dist: reference bispectrum is zero");
    return std::sqrt(num / den);
}

enum class InitMode { Spectral, Perturbed };

/// One Monte-Carlo trial: generate, corrupt, initialize, solve, score.
struct TrialConfig {
    std::size_t n = 128;
    std::size_t band_width = 64;
    double snr_db = std::numeric_limits<double>::infinity();
    double removal_fraction = 0.0;
    InitMode init_mode = InitMode::Spectral;
    double delta = 0.0;  // perturbation scale for InitMode::Perturbed
    SolverConfig solver;
    InitConfig init;
    RngSeed seed;
    double success_threshold = 1e-6;
};

struct TrialReport {
    double dist_init = std::numeric_limits<double>::quiet_NaN();
    double dist_final = std::numeric_limits<double>::quiet_NaN();
    bool success = false;
    std::size_t iterations = 0;
    double wall_ms = 0.0;
    std::string failure;  // empty unless the trial errored
};

namespace detail {
// Stream tags for per-trial seed derivation.
inline constexpr std::uint64_t kStreamSignal = 1;
inline constexpr std::uint64_t kStreamNoise = 2;
inline constexpr std::uint64_t kStreamMask = 3;
inline constexpr std::uint64_t kStreamPerturb = 4;
inline constexpr std::uint64_t kStreamBlocks = 5;
}  // namespace detail

/// Deterministic in cfg.seed apart from wall_ms. Solver and initializer
/// failures are folded into the report rather than thrown.
inline TrialReport run_trial(const TrialConfig& cfg) {
    if (!(cfg.removal_fraction >= 0.0 && cfg.removal_fraction <= 1.0))
        throw std::invalid_argument("run_trial: removal_fraction must lie in [0,1]");
    if (cfg.delta < 0.0) throw std::invalid_argument("run_trial: delta must be nonnegative");

    const auto t_start = std::chrono::steady_clock::now();
    TrialReport report;

    const Signal x = generate_gaussian_spectrum(cfg.n, band_limited_at_origin(cfg.n, cfg.band_width),
                                                derive_seed(cfg.seed, detail::kStreamSignal));
    BispectrumGrid b = bispectrum(dft(x));
    b = add_noise(b, cfg.snr_db, derive_seed(cfg.seed, detail::kStreamNoise));
    b = mask_k1_rows(b, cfg.removal_fraction, derive_seed(cfg.seed, detail::kStreamMask));

    try {
        Signal x0 = Signal::time(cvec(cfg.n));
        if (cfg.init_mode == InitMode::Spectral) {
            x0 = init_spectral(b, cfg.init);
        } else {
            Rng rng(derive_seed(cfg.seed, detail::kStreamPerturb));
            x0.values = x.values;
            for (std::size_t i = 0; i < cfg.n; ++i)
                x0.values[i] += cfg.delta * (rng.next_u64() & 1 ? 1.0 : -1.0);
        }
        report.dist_init = dist(x, x0);

        auto [xhat, trace] = trust_region_solve(b, x0, cfg.solver, derive_seed(cfg.seed, detail::kStreamBlocks));
        report.iterations = trace.iterations();
        report.dist_final = dist(x, xhat);
        report.success = report.dist_final < cfg.success_threshold;
    } catch (const diverged_error& e) {
        report.failure = e.what();
        report.iterations = e.trace.iterations();
    } catch (const degenerate_signal_error& e) {
        report.failure = e.what();
    } catch (const ill_conditioned_error& e) {
        report.failure = e.what();
    }

    report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

struct AxisSpec {
    std::string name;
    std::vector<double> values;
};

struct SweepRow {
    double axis1 = 0.0;
    double axis2 = 0.0;
    std::size_t trials = 0;
    double mean_dist_init = 0.0;
    double mean_dist_final = 0.0;
    double success_rate = 0.0;
    double mean_iters = 0.0;
    double mean_wall_ms = 0.0;
};

namespace detail {

inline void apply_axis(TrialConfig& cfg, const std::string& name, double value) {
    if (name == "removal_fraction") {
        cfg.removal_fraction = value;
    } else if (name == "snr_db") {
        cfg.snr_db = value;
    } else if (name == "delta") {
        cfg.delta = value;
    } else if (name == "n") {
        cfg.n = static_cast<std::size_t>(std::llround(value));
    } else if (name == "band_width") {
        cfg.band_width = static_cast<std::size_t>(std::llround(value));
    } else {
        throw std::invalid_argument("run_sweep: unknown axis name '" + name + "'");
    }
}

/// Kahan mean over values that may contain NaN (failed trials): NaNs are
/// skipped so one degenerate trial cannot poison a cell's mean.
class CompensatedMean {
public:
    void add(double v) {
        if (std::isnan(v)) return;
        ++count_;
        const double y = v - compensation_;
        const double t = sum_ + y;
        compensation_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : sum_ / static_cast<double>(count_); }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
    std::size_t count_ = 0;
};

}  // namespace detail

/// Full factorial sweep over two named axes of TrialConfig. Trial (i, j, k)
/// uses seed derive(base.seed, i, j, k), so no cell shares a stream.
/// Trials are independent and run on `jobs` threads; aggregation order is
/// fixed so the output is identical for any job count.
inline std::vector<SweepRow> run_sweep(const TrialConfig& base, const AxisSpec& axis1, const AxisSpec& axis2,
                                       std::size_t trials, std::size_t jobs = 1) {
    if (trials == 0) throw std::invalid_argument("run_sweep: trials must be positive");
    {
        TrialConfig probe = base;  // reject unknown axis names before any work
        if (!axis1.values.empty()) detail::apply_axis(probe, axis1.name, axis1.values.front());
        if (!axis2.values.empty()) detail::apply_axis(probe, axis2.name, axis2.values.front());
    }

    struct Task {
        TrialConfig cfg;
        std::size_t slot;
    };
    std::vector<Task> tasks;
    tasks.reserve(axis1.values.size() * axis2.values.size() * trials);
    for (std::size_t i = 0; i < axis1.values.size(); ++i) {
        for (std::size_t j = 0; j < axis2.values.size(); ++j) {
            for (std::size_t k = 0; k < trials; ++k) {
                TrialConfig cfg = base;
                detail::apply_axis(cfg, axis1.name, axis1.values[i]);
                detail::apply_axis(cfg, axis2.name, axis2.values[j]);
                cfg.seed = derive_seed(base.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j),
                                       static_cast<std::uint64_t>(k));
                tasks.push_back({std::move(cfg), tasks.size()});
            }
        }
    }

    std::vector<TrialReport> reports(tasks.size());
    if (jobs <= 1) {
        for (const Task& task : tasks) reports[task.slot] = run_trial(task.cfg);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                reports[tasks[i].slot] = run_trial(tasks[i].cfg);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    std::vector<SweepRow> rows;
    std::size_t slot = 0;
    for (std::size_t i = 0; i < axis1.values.size(); ++i) {
        for (std::size_t j = 0; j < axis2.values.size(); ++j) {
            detail::CompensatedMean m_init, m_final, m_iters, m_wall;
            std::size_t successes = 0;
            for (std::size_t k = 0; k < trials; ++k, ++slot) {
                const TrialReport& r = reports[slot];
                m_init.add(r.dist_init);
                m_final.add(r.dist_final);
                m_iters.add(static_cast<double>(r.iterations));
                m_wall.add(r.wall_ms);
                successes += r.success ? 1 : 0;
            }
            rows.push_back({axis1.values[i], axis2.values[j], trials, m_init.value(), m_final.value(),
                            static_cast<double>(successes) / static_cast<double>(trials), m_iters.value(),
                            m_wall.value()});
        }
    }
    return rows;
}

}  // namespace bispec
