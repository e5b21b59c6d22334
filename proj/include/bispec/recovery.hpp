#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bispec/polyspectra.hpp"
#include "bispec/rng.hpp"
#include "bispec/signal.hpp"

namespace bispec {

/// B[0,0] vanished (or a required anchor is unobserved): the instance gives
/// the initializer nothing to start from.
struct degenerate_signal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A divisor in the constructive chain fell below the genericity threshold.
struct ill_conditioned_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sign-tracking initializer weights; the discrepancy score is
/// eps = gamma0 |D0|^2 + gamma1 |D1|^2 + gamma2 |D2|^2.
struct InitConfig {
    double gamma0 = 0.09;
    double gamma1 = 0.425;
    double gamma2 = 1.0;
    std::size_t n0 = 0;
};

/// Trust-region solver tunables. delta0 <= 0 selects the default radius
/// 0.9 |x0|_2 / q. Stop tolerance eps applies to the Cauchy step norm.
struct SolverConfig {
    double delta0 = 0.0;
    double gamma = 0.1;         // keep radius while step norm >= gamma * delta
    double gamma_shrink = 0.1;  // radius multiplier on shrink
    double armijo_c = 1e-4;     // sufficient-decrease constant
    double backtrack = 0.5;     // step multiplier while backtracking
    std::size_t q = 0;          // block size; 0 selects q = n
    double eps = 1e-4;
    std::size_t max_iter = 10000;
};

enum class StopReason { StepBelowTolerance, MaxIterations, Diverged };

struct IterRecord {
    std::size_t iter = 0;
    double h = 0.0;          // objective after this iteration's update
    double step_norm = 0.0;  // |b|_2 = min(delta, |d|_2)
    double alpha = 0.0;      // accepted step size (0 on a stalled iteration)
    double delta = 0.0;      // trust radius after the update rule
    std::uint64_t block_digest = 0;
};

struct SolverTrace {
    double initial_h = 0.0;
    std::vector<IterRecord> records;
    StopReason stop_reason = StopReason::MaxIterations;
    double final_step_norm = 0.0;

    std::size_t iterations() const { return records.size(); }
};

/// The objective went non-finite; the trace up to that point is attached.
struct diverged_error : std::runtime_error {
    SolverTrace trace;
    explicit diverged_error(std::string what, SolverTrace t)
        : std::runtime_error(std::move(what)), trace(std::move(t)) {}
};

/// Least-squares misfit between the observed grid and the bispectrum of y:
/// h(y) = sum over observed (k1,k2) of |B[k1,k2] - y[k1] conj(y[k2]) y[k1-k2]|^2.
inline double objective_h(const Signal& y, const BispectrumGrid& b) {
    if (y.domain != Domain::Frequency) throw std::invalid_argument("objective_h: y must be frequency-domain");
    const std::size_t n = y.n();
    if (b.n != n) throw std::invalid_argument("objective_h: length mismatch");
    const cd* yv = y.values.data();
    double acc = 0.0;
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        const cd yk1 = yv[k1];
        std::size_t diff = k1;  // (k1 - k2) mod n, walked down as k2 grows
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            if (b.mask[k1 * n + k2]) {
                const cd model = yk1 * std::conj(yv[k2]) * yv[diff];
                acc += std::norm(b.entries[k1 * n + k2] - model);
            }
            diff = (diff == 0) ? n - 1 : diff - 1;
        }
    }
    return acc;
}

/// Block-stochastic Wirtinger gradient d[p] = dh/d(conj(y[p])) restricted to
/// the index block. Each of the three residual families keeps the mask of
/// the grid entry it differentiates, so with the full block this is the
/// exact gradient of objective_h even under masking:
///   d[p] = - sum_{k in block} r[p,k]        y[k]       conj(y[p-k])
///          - sum_{k in block} r[k,k-p]      conj(y[k]) y[k-p]
///          - sum_{k in block} conj(r[k,p])  y[k]       y[k-p]
/// with r = mask .* (B - bispectrum(y)).
inline Signal wirtinger_gradient(const Signal& y, const BispectrumGrid& b,
                                 const std::vector<std::size_t>& block) {
    if (y.domain != Domain::Frequency) throw std::invalid_argument("wirtinger_gradient: y must be frequency-domain");
    const std::size_t n = y.n();
    if (b.n != n) throw std::invalid_argument("wirtinger_gradient: length mismatch");
    if (block.empty()) throw std::invalid_argument("wirtinger_gradient: empty block");

    const cd* yv = y.values.data();
    auto residual = [&](std::size_t k1, std::size_t k2) -> cd {
        if (!b.mask[k1 * n + k2]) return cd(0.0, 0.0);
        const cd model = yv[k1] * std::conj(yv[k2]) *
                         yv[wrap(static_cast<std::ptrdiff_t>(k1) - static_cast<std::ptrdiff_t>(k2), n)];
        return b.entries[k1 * n + k2] - model;
    };

    cvec d(n, cd(0.0, 0.0));
    for (std::size_t p = 0; p < n; ++p) {
        cd acc(0.0, 0.0);
        for (std::size_t k : block) {
            const std::size_t pmk = wrap(static_cast<std::ptrdiff_t>(p) - static_cast<std::ptrdiff_t>(k), n);
            const std::size_t kmp = wrap(static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(p), n);
            acc += residual(p, k) * yv[k] * std::conj(yv[pmk]);
            acc += residual(k, kmp) * std::conj(yv[k]) * yv[kmp];
            acc += std::conj(residual(k, p)) * yv[k] * yv[kmp];
        }
        d[p] = -acc;
    }
    return Signal::frequency(std::move(d));
}

/// Q indices drawn uniformly without replacement from the pool,
/// deterministic in (seed, t). Q larger than the pool returns the full pool.
/// The solver samples from all of 0..n-1: an index whose own row is masked
/// still reaches observed entries through the column sum of the gradient,
/// while the per-entry mask gating keeps unobserved data out.
inline std::vector<std::size_t> sample_block(std::size_t n, std::size_t q,
                                             const std::vector<std::size_t>& pool,
                                             RngSeed seed, std::size_t t) {
    (void)n;
    if (q == 0) throw std::invalid_argument("sample_block: q must be positive");
    if (pool.empty()) throw std::invalid_argument("sample_block: empty index pool");
    const std::size_t take = std::min(q, pool.size());
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    return rng.sample_without_replacement(pool, take);
}

namespace detail {

inline std::uint64_t digest_indices(const std::vector<std::size_t>& idx) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t v : idx) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Spectral initialization. Recovers s with s^2[m] = B[m,0]/conj(y[0]) and
/// resolves the per-bin square-root sign by tracking continuity of s through
/// finite differences D0, D1, D2 scored with the InitConfig weights; the
/// root with the smaller score wins. Unobserved first-column entries force
/// s[m] = 0. Both global sign branches are evaluated and the one with the
/// smaller objective is returned, as the time-domain signal idft(s).
inline Signal init_spectral(const BispectrumGrid& b, const InitConfig& cfg = {}) {
    const std::size_t n = b.n;
    if (n < 4) throw std::invalid_argument("init_spectral: grid too small");
    if (!b.observed(0, 0) || b.at(0, 0) == cd(0.0, 0.0))
        throw degenerate_signal_error("init_spectral: B[0,0] is zero or unobserved");

    const double y0 = std::cbrt(b.at(0, 0).real());
    if (y0 == 0.0) throw degenerate_signal_error("init_spectral: B[0,0] has no real part");

    // Square roots of s^2[m]; the tracked vector picks +/- per bin.
    cvec root(n, cd(0.0, 0.0));
    for (std::size_t m = 0; m < n; ++m) {
        if (!b.observed(m, 0)) continue;  // minimum-energy completion for holes
        root[m] = std::sqrt(b.at(m, 0) / y0);
    }

    cvec s(n, cd(0.0, 0.0));
    const std::size_t n0 = cfg.n0 % n;
    s[n0] = root[n0];
    for (std::size_t p = 0; p + 1 < n; ++p) {
        const std::size_t cur = wrap(static_cast<std::ptrdiff_t>(n0 + p), n);
        const std::size_t nxt = wrap(static_cast<std::ptrdiff_t>(n0 + p + 1), n);
        const cd u = root[nxt];

        // Differences degenerate to lower order while history is missing.
        auto score = [&](const cd& cand) {
            const cd d0 = cand - s[cur];
            double e = cfg.gamma0 * std::norm(d0);
            if (p >= 1) {
                const cd prev1 = s[wrap(static_cast<std::ptrdiff_t>(n0 + p) - 1, n)];
                e += cfg.gamma1 * std::norm(d0 - (s[cur] - prev1));
                if (p >= 2) {
                    const cd prev2 = s[wrap(static_cast<std::ptrdiff_t>(n0 + p) - 2, n)];
                    e += cfg.gamma2 * std::norm(d0 - (s[cur] - prev1) - (prev1 - prev2));
                }
            }
            return e;
        };
        s[nxt] = (score(u) <= score(-u)) ? u : -u;
    }

    // Global sign at n0: the bispectrum of -s is -B, so the wrong branch
    // shows up directly in the objective.
    cvec neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -s[i];
    const Signal plus = Signal::frequency(std::move(s));
    const Signal minus = Signal::frequency(std::move(neg));
    const Signal& winner = (objective_h(plus, b) <= objective_h(minus, b)) ? plus : minus;
    return idft(winner);
}

/// Constructive recovery of a band-limited spectrum from a noiseless,
/// fully observed grid: y[0] from the real cube root of B[0,0], magnitudes
/// from the diagonal, y[1] as one fixed square root of B[1,0]/y[0], then
/// the sequential chain y[2] = B[2,1]/|y[1]|^2 and
/// y[k] = B[k,1]/(conj(y[1]) y[k-1]). The other y[1] branch differs from
/// this one by the alternating sign pattern, which leaves every in-band
/// bispectrum entry unchanged, so the result is exact up to that invariance.
/// With known_power_spectrum the diagonal is checked instead of extracted.
inline Signal constructive_recover(const BispectrumGrid& b, const SupportSpec& support,
                                   const std::optional<std::vector<double>>& known_power_spectrum = std::nullopt) {
    const std::size_t n = b.n;
    if (support.kind != SupportKind::BandLimited)
        throw std::invalid_argument("constructive_recover: support must be band-limited");
    const std::size_t width = support.width;
    if (width == 0 || 2 * width > n)
        throw std::invalid_argument("constructive_recover: band width must satisfy 1 <= B <= n/2");
    if (support_start(support, n) != 0)
        throw std::invalid_argument("constructive_recover: band must start at bin 0");
    for (std::size_t k1 = 0; k1 < width; ++k1)
        for (std::size_t k2 = 0; k2 < n; ++k2)
            if (!b.observed(k1, k2))
                throw std::invalid_argument("constructive_recover: rows 0..B-1 must be fully observed");
    if (known_power_spectrum && known_power_spectrum->size() != width)
        throw std::invalid_argument("constructive_recover: power spectrum must have one entry per band bin");

    const double fnorm = b.frobenius_norm();
    const double divisor_floor = 1e-14 * fnorm;
    auto require_divisor = [&](double magnitude, const char* what) {
        if (!(magnitude > divisor_floor))
            throw ill_conditioned_error(std::string("constructive_recover: vanishing divisor at ") + what);
    };

    require_divisor(std::abs(b.at(0, 0)), "B[0,0]");
    const double y0 = std::cbrt(b.at(0, 0).real());

    cvec y(n, cd(0.0, 0.0));
    y[0] = cd(y0, 0.0);

    // Diagonal magnitudes |y[k]|^2 = B[k,k]/y[0]; checked against the caller's
    // power spectrum when one is supplied.
    std::vector<double> mag2(width, 0.0);
    mag2[0] = y0 * y0;
    for (std::size_t k = 1; k < width; ++k) mag2[k] = (b.at(k, k) / y0).real();
    if (known_power_spectrum) {
        const double scale = std::max(1.0, fnorm);
        for (std::size_t k = 0; k < width; ++k) {
            const double given = (*known_power_spectrum)[k] * (*known_power_spectrum)[k];
            if (std::abs(given - mag2[k]) > 1e-8 * scale)
                throw std::invalid_argument("constructive_recover: known power spectrum inconsistent with diagonal");
            mag2[k] = given;
        }
    }

    if (width >= 2) {
        require_divisor(std::abs(y0), "y[0]");
        y[1] = std::sqrt(b.at(1, 0) / y0);
        if (width >= 3) {
            require_divisor(mag2[1], "|y[1]|^2");
            y[2] = b.at(2, 1) / mag2[1];
            for (std::size_t k = 3; k < width; ++k) {
                const cd divisor = std::conj(y[1]) * y[k - 1];
                require_divisor(std::abs(divisor), "conj(y[1]) y[k-1]");
                y[k] = b.at(k, 1) / divisor;
            }
        }
    }
    return Signal::frequency(std::move(y));
}

struct ArmijoResult {
    double rho = 0.0;
    double h_trial = 0.0;
    bool stalled = false;
};

inline constexpr double kArmijoRhoMin = 1e-12;

/// Backtracking line search: largest rho in {rho_start, rho_start*backtrack, ...}
/// with h(y + rho b) <= h(y) + armijo_c * rho * Re(d^H b). Below kArmijoRhoMin
/// the search reports a stall.
inline ArmijoResult armijo_backtrack(const Signal& y, const Signal& d, const cvec& b_step,
                                     const BispectrumGrid& b, double armijo_c, double backtrack,
                                     double h_current, double rho_start = 1.0) {
    const std::size_t n = y.n();
    double slope = 0.0;  // Re(d^H b), negative for any step along -d
    for (std::size_t i = 0; i < n; ++i) slope += (std::conj(d.values[i]) * b_step[i]).real();

    Signal trial = Signal::frequency(cvec(n));
    double rho = rho_start;
    while (rho >= kArmijoRhoMin) {
        for (std::size_t i = 0; i < n; ++i) trial.values[i] = y.values[i] + rho * b_step[i];
        const double h_trial = objective_h(trial, b);
        if (h_trial <= h_current + armijo_c * rho * slope) return {rho, h_trial, false};
        rho *= backtrack;
    }
    return {kArmijoRhoMin, h_current, true};
}

/// Trust-region refinement of Algorithm 2. Iterates on the spectral vector:
/// per iteration a block gradient d is computed, the Cauchy step
/// b = -min(delta/|d|, 1) d is backtracked through the Armijo rule, and the
/// radius is kept while |b| >= gamma * delta, otherwise multiplied by
/// gamma_shrink. Two consecutive stalled line searches also shrink the
/// radius. Stops when |b| < eps or at max_iter.
inline std::pair<Signal, SolverTrace> trust_region_solve(const BispectrumGrid& b, const Signal& x0,
                                                         const SolverConfig& cfg, RngSeed seed) {
    const std::size_t n = b.n;
    if (x0.n() != n) throw std::invalid_argument("trust_region_solve: length mismatch");
    if (x0.domain != Domain::Time) throw std::invalid_argument("trust_region_solve: x0 must be time-domain");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0) || !(cfg.gamma_shrink > 0.0 && cfg.gamma_shrink < 1.0) ||
        !(cfg.armijo_c > 0.0 && cfg.armijo_c < 1.0) || !(cfg.backtrack > 0.0 && cfg.backtrack < 1.0))
        throw std::invalid_argument("trust_region_solve: gamma, gamma_shrink, armijo_c, backtrack must lie in (0,1)");
    if (!(cfg.eps > 0.0)) throw std::invalid_argument("trust_region_solve: eps must be positive");
    const std::size_t q = cfg.q == 0 ? n : cfg.q;
    if (q > n * n) throw std::invalid_argument("trust_region_solve: q must lie in {1,...,n^2}");

    if (b.observed_count() == 0) throw std::invalid_argument("trust_region_solve: grid has no observed entries");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;

    Signal y = dft(x0);
    double delta = cfg.delta0 > 0.0 ? cfg.delta0 : 0.9 * l2_norm(x0.values) / static_cast<double>(q);

    SolverTrace trace;
    trace.initial_h = objective_h(y, b);
    if (!std::isfinite(trace.initial_h)) {
        trace.stop_reason = StopReason::Diverged;
        throw diverged_error("trust_region_solve: non-finite objective at start", std::move(trace));
    }
    double h_cur = trace.initial_h;

    // Section 4 fixes alpha = 0.6; with the line search overwriting alpha
    // every iteration it only seeds the first trial step.
    constexpr double kAlpha0 = 0.6;

    std::size_t consecutive_stalls = 0;
    for (std::size_t t = 0; t < cfg.max_iter; ++t) {
        const std::vector<std::size_t> block = sample_block(n, q, pool, seed, t);
        const Signal d = wirtinger_gradient(y, b, block);
        const double dnorm = l2_norm(d.values);

        const double step_norm = std::min(delta, dnorm);
        trace.final_step_norm = step_norm;
        if (step_norm < cfg.eps) {
            trace.stop_reason = StopReason::StepBelowTolerance;
            return {idft(y), std::move(trace)};
        }

        const double tau = std::min(delta / dnorm, 1.0);
        cvec b_step(n);
        for (std::size_t i = 0; i < n; ++i) b_step[i] = -tau * d.values[i];

        const ArmijoResult ls =
            armijo_backtrack(y, d, b_step, b, cfg.armijo_c, cfg.backtrack, h_cur, t == 0 ? kAlpha0 : 1.0);

        double alpha = 0.0;
        if (ls.stalled) {
            ++consecutive_stalls;
        } else {
            consecutive_stalls = 0;
            alpha = ls.rho;
            for (std::size_t i = 0; i < n; ++i) y.values[i] += alpha * b_step[i];
            h_cur = ls.h_trial;
        }
        if (!std::isfinite(h_cur)) {
            trace.stop_reason = StopReason::Diverged;
            throw diverged_error("trust_region_solve: non-finite objective", std::move(trace));
        }

        bool shrink = step_norm < cfg.gamma * delta;
        if (consecutive_stalls >= 2) {
            shrink = true;
            consecutive_stalls = 0;
        }
        if (shrink) delta *= cfg.gamma_shrink;

        trace.records.push_back({t, h_cur, step_norm, alpha, delta, detail::digest_indices(block)});
    }
    trace.stop_reason = StopReason::MaxIterations;
    return {idft(y), std::move(trace)};
}

}  // namespace bispec
