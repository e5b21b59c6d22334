#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bispec/rng.hpp"
#include "bispec/signal.hpp"

namespace bispec {

/// n x n complex grid with an observation mask. The mask is authoritative:
/// unobserved entries are zeroed and excluded from every objective,
/// gradient and metric computation.
struct BispectrumGrid {
    std::size_t n = 0;
    cvec entries;                 // row-major, entries[k1 * n + k2]
    std::vector<std::uint8_t> mask;

    BispectrumGrid() = default;
    explicit BispectrumGrid(std::size_t size)
        : n(size), entries(size * size, cd(0.0, 0.0)), mask(size * size, 1) {}

    cd& at(std::size_t k1, std::size_t k2) { return entries[k1 * n + k2]; }
    const cd& at(std::size_t k1, std::size_t k2) const { return entries[k1 * n + k2]; }
    bool observed(std::size_t k1, std::size_t k2) const { return mask[k1 * n + k2] != 0; }

    std::size_t observed_count() const {
        std::size_t m = 0;
        for (auto b : mask) m += b != 0;
        return m;
    }

    /// Frobenius norm over observed entries.
    double frobenius_norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (mask[i]) s += std::norm(entries[i]);
        return std::sqrt(s);
    }

    /// Rows with at least one observed entry (with row masking: the kept rows).
    std::vector<std::size_t> observed_rows() const {
        std::vector<std::size_t> rows;
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                if (observed(k1, k2)) {
                    rows.push_back(k1);
                    break;
                }
            }
        }
        return rows;
    }
};

/// Third-order cumulant grid, entries indexed (n1, n2). No mask.
struct CumulantGrid {
    std::size_t n = 0;
    cvec entries;

    CumulantGrid() = default;
    explicit CumulantGrid(std::size_t size) : n(size), entries(size * size, cd(0.0, 0.0)) {}

    cd& at(std::size_t n1, std::size_t n2) { return entries[n1 * n + n2]; }
    const cd& at(std::size_t n1, std::size_t n2) const { return entries[n1 * n + n2]; }
};

/// Forward bispectrum map: B[k1,k2] = y[k1] conj(y[k2]) y[k1-k2], indices
/// circular, mask all-true.
inline BispectrumGrid bispectrum(const Signal& y) {
    if (y.domain != Domain::Frequency) throw std::invalid_argument("bispectrum: input must be frequency-domain");
    const std::size_t n = y.n();
    BispectrumGrid b(n);
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            b.at(k1, k2) = y.values[k1] * std::conj(y.values[k2]) *
                           y.values[wrap(static_cast<std::ptrdiff_t>(k1) - static_cast<std::ptrdiff_t>(k2), n)];
        }
    }
    return b;
}

/// Third-order cumulant C[n1,n2] = (1/n) sum_m x[m] conj(x[m-n1]) x[m+n2].
/// Row n1 is the cross-correlation of g[m] = x[m] conj(x[m-n1]) with x,
/// evaluated through the transform pair rather than the triple loop.
inline CumulantGrid third_order_cumulant(const Signal& x) {
    if (x.domain != Domain::Time) throw std::invalid_argument("third_order_cumulant: input must be time-domain");
    const std::size_t n = x.n();
    CumulantGrid c(n);
    const cvec xf = detail::dft_direct(x.values, -1, false);
    cvec g(n), prod(n);
    for (std::size_t n1 = 0; n1 < n; ++n1) {
        for (std::size_t m = 0; m < n; ++m)
            g[m] = x.values[m] * std::conj(x.values[wrap(static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(n1), n)]);
        const cvec gf = detail::dft_direct(g, -1, false);
        // sum_m g[m] x[m+n2] has spectrum X[k] G[-k]
        for (std::size_t k = 0; k < n; ++k) prod[k] = xf[k] * gf[wrap(-static_cast<std::ptrdiff_t>(k), n)];
        const cvec row = detail::dft_direct(prod, +1, true);
        for (std::size_t n2 = 0; n2 < n; ++n2) c.at(n1, n2) = row[n2] / static_cast<double>(n);
    }
    return c;
}

/// Adds i.i.d. circular complex Gaussian noise to every observed entry.
/// The per-entry variance solves 10 log10(|B|_F^2 / (M sigma^2)) = snr_db
/// with M the observed count, so total noise power |sigma|_2^2 = M sigma^2.
inline BispectrumGrid add_noise(const BispectrumGrid& b, double snr_db, RngSeed seed) {
    if (std::isnan(snr_db)) throw std::invalid_argument("add_noise: snr_db must not be NaN");
    if (std::isinf(snr_db) && snr_db > 0.0) return b;

    const std::size_t m = b.observed_count();
    if (m == 0) return b;
    const double power = b.frobenius_norm();
    const double sigma2 = power * power / (static_cast<double>(m) * std::pow(10.0, snr_db / 10.0));
    const double scale = std::sqrt(sigma2 / 2.0);

    Rng rng(seed);
    BispectrumGrid out = b;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        if (!out.mask[i]) continue;
        out.entries[i] += cd(scale * rng.normal(), scale * rng.normal());
    }
    return out;
}

/// Removes round(fraction * n) distinct k1 rows chosen uniformly among
/// rows 1..n-1: row 0 stays observed because every recovery method anchors
/// on B[0,0] and the first column. Removed rows are zeroed and marked
/// unobserved.
inline BispectrumGrid mask_k1_rows(const BispectrumGrid& b, double fraction, RngSeed seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("mask_k1_rows: fraction must lie in [0,1]");
    const std::size_t n = b.n;
    std::size_t remove = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (remove > n - 1) remove = n - 1;
    if (remove == 0) return b;

    std::vector<std::size_t> eligible(n - 1);
    for (std::size_t i = 0; i < n - 1; ++i) eligible[i] = i + 1;
    Rng rng(seed);
    const std::vector<std::size_t> rows = rng.sample_without_replacement(std::move(eligible), remove);

    BispectrumGrid out = b;
    for (std::size_t k1 : rows) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            out.mask[k1 * n + k2] = 0;
            out.entries[k1 * n + k2] = cd(0.0, 0.0);
        }
    }
    return out;
}

/// Largest deviation from the real-signal symmetry B(k1,k2) = conj(B(-k1,-k2)).
/// Zero (to rounding) for grids built from real signals.
inline double check_conjugate_symmetry(const BispectrumGrid& b) {
    const std::size_t n = b.n;
    double worst = 0.0;
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            const cd mirror = std::conj(b.at(wrap(-static_cast<std::ptrdiff_t>(k1), n),
                                             wrap(-static_cast<std::ptrdiff_t>(k2), n)));
            worst = std::max(worst, std::abs(b.at(k1, k2) - mirror));
        }
    }
    return worst;
}

}  // namespace bispec
