#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bispec/rng.hpp"

namespace bispec {

using cd = std::complex<double>;
using cvec = std::vector<cd>;

enum class Domain { Time, Frequency };

/// Finite complex signal tagged with the domain its values live in.
/// All indices are circular: position i means i mod n.
struct Signal {
    cvec values;
    Domain domain = Domain::Time;

    Signal() = default;
    Signal(cvec v, Domain d) : values(std::move(v)), domain(d) {
        if (values.size() < 4) throw std::invalid_argument("Signal: length must be at least 4");
    }

    static Signal time(cvec v) { return Signal(std::move(v), Domain::Time); }
    static Signal frequency(cvec v) { return Signal(std::move(v), Domain::Frequency); }

    std::size_t n() const { return values.size(); }
};

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
    std::ptrdiff_t m = i % static_cast<std::ptrdiff_t>(n);
    return static_cast<std::size_t>(m < 0 ? m + static_cast<std::ptrdiff_t>(n) : m);
}

inline double l2_norm(const cvec& v) {
    double s = 0.0;
    for (const cd& z : v) s += std::norm(z);
    return std::sqrt(s);
}

namespace detail {

/// Direct O(n^2) transform with a mod-n twiddle table; sign = -1 forward.
/// Exact enough for the desk scales here (round trip ~n*eps relative).
inline cvec dft_direct(const cvec& in, int sign, bool normalize) {
    const std::size_t n = in.size();
    cvec twiddle(n);
    for (std::size_t j = 0; j < n; ++j) {
        double a = sign * 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
        twiddle[j] = cd(std::cos(a), std::sin(a));
    }
    cvec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cd acc(0.0, 0.0);
        std::size_t idx = 0;
        for (std::size_t m = 0; m < n; ++m) {
            acc += in[m] * twiddle[idx];
            idx += k;
            if (idx >= n) idx -= n;
        }
        out[k] = normalize ? acc / static_cast<double>(n) : acc;
    }
    return out;
}

}  // namespace detail

/// Forward transform, unnormalized: y[k] = sum_m x[m] e^{-2 pi i k m / n}.
inline Signal dft(const Signal& x) {
    if (x.domain != Domain::Time) throw std::invalid_argument("dft: input must be time-domain");
    return Signal::frequency(detail::dft_direct(x.values, -1, false));
}

/// Inverse transform carries the 1/n factor, so idft(dft(x)) == x.
inline Signal idft(const Signal& y) {
    if (y.domain != Domain::Frequency) throw std::invalid_argument("idft: input must be frequency-domain");
    return Signal::time(detail::dft_direct(y.values, +1, true));
}

enum class SupportKind { BandLimited, TimeLimited };

/// Support descriptor. `offset` indexes the first entry of the zero run;
/// the run has n - width consecutive (circular) zeros, so the support
/// occupies the complementary width entries ending at offset - 1.
struct SupportSpec {
    SupportKind kind = SupportKind::BandLimited;
    std::size_t offset = 0;
    std::size_t width = 1;
};

/// Band occupying bins 0..width-1 (zero run starts at width), the layout
/// every experiment uses.
inline SupportSpec band_limited_at_origin(std::size_t n, std::size_t width) {
    return SupportSpec{SupportKind::BandLimited, width % n, width};
}

/// First index of the support window implied by `spec` for length n.
inline std::size_t support_start(const SupportSpec& spec, std::size_t n) {
    return wrap(static_cast<std::ptrdiff_t>(spec.offset) - static_cast<std::ptrdiff_t>(spec.width), n);
}

/// True iff the relevant domain has n - width consecutive entries of
/// magnitude <= tol starting at spec.offset.
inline bool is_support_satisfied(const Signal& x, const SupportSpec& spec, double tol = 1e-12) {
    if (tol < 0.0) throw std::invalid_argument("is_support_satisfied: tol must be nonnegative");
    const std::size_t n = x.n();
    if (spec.width >= n) return true;
    const Domain wanted = spec.kind == SupportKind::BandLimited ? Domain::Frequency : Domain::Time;
    const Signal& probe = (x.domain == wanted) ? x : (wanted == Domain::Frequency ? dft(x) : idft(x));
    const cvec& v = probe.values;
    for (std::size_t j = 0; j < n - spec.width; ++j) {
        if (std::abs(v[wrap(static_cast<std::ptrdiff_t>(spec.offset + j), n)]) > tol) return false;
    }
    return true;
}

/// Synthetic band-limited signal used by all experiments: Gaussian-bell
/// spectrum magnitude over the support (peak 1 at the window center,
/// standard deviation width/4 bins), zero outside, one uniform random
/// phase on the whole band, then the global phase rotated away so that
/// y[0] is real positive. Returned in the time domain.
inline Signal generate_gaussian_spectrum(std::size_t n, const SupportSpec& support, RngSeed seed) {
    if (support.kind != SupportKind::BandLimited)
        throw std::invalid_argument("generate_gaussian_spectrum: support must be band-limited");
    if (support.width == 0 || support.width > n)
        throw std::invalid_argument("generate_gaussian_spectrum: invalid support");
    if (n < 4) throw std::invalid_argument("generate_gaussian_spectrum: n must be at least 4");

    Rng rng(seed);
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const cd phase(std::cos(theta), std::sin(theta));

    const std::size_t start = support_start(support, n);
    const double center = (static_cast<double>(support.width) - 1.0) / 2.0;
    const double sigma = static_cast<double>(support.width) / 4.0;

    cvec y(n, cd(0.0, 0.0));
    for (std::size_t j = 0; j < support.width; ++j) {
        double t = (static_cast<double>(j) - center) / sigma;
        y[wrap(static_cast<std::ptrdiff_t>(start + j), n)] = phase * std::exp(-0.5 * t * t);
    }
    if (std::abs(y[0]) > 0.0) {
        cd rot = std::conj(y[0]) / std::abs(y[0]);
        for (cd& z : y) z *= rot;
        y[0] = cd(y[0].real(), 0.0);
    }
    return idft(Signal::frequency(std::move(y)));
}

}  // namespace bispec
