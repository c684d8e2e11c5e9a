#include "qds/lineshape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "qds/error.hpp"
#include "qds/units.hpp"

namespace qds {

namespace {

constexpr int kTimePoints = 1 << 14;  // 2^14, fixed power-of-two grid
constexpr double kBaseStepEv = 5e-5;  // 0.05 meV energy resolution

// In-place iterative radix-2 FFT; sign = +1 gives sum_n x_n e^{+i 2 pi j n / N}.
void fft(std::vector<std::complex<double>>& x, int sign) {
    const size_t n = x.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(x[i], x[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * kPi / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = x[i + k];
                std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace

LineshapeResult pl_lineshape(const HuangRhysDecomposition& hr, const PhononSet& phonons,
                             double zpl_ev, double broadening_mev,
                             const LineshapeGrid& grid) {
    if (!std::isfinite(hr.total) || hr.total < 0.0) {
        throw ValidationError("pl_lineshape: total Huang-Rhys factor must be finite and >= 0");
    }
    if (!(zpl_ev > 0.0)) {
        throw ValidationError("pl_lineshape: ZPL must be > 0");
    }
    if (!(broadening_mev > 0.0)) {
        throw ValidationError("pl_lineshape: broadening must be > 0");
    }
    const double sigma_ev = broadening_mev * 1e-3;

    double e_min = grid.explicit_range ? grid.e_min : zpl_ev - 0.4;
    double e_max = grid.explicit_range ? grid.e_max : zpl_ev + 0.05;
    double step = grid.step;
    if (!(e_max > e_min) || !(step > 0.0)) {
        throw ValidationError("pl_lineshape: invalid energy grid");
    }
    e_min = std::max(e_min, step);  // emission energies stay positive

    // Phonon statistics drive the span of the Fourier grid.
    double w_max = 0.0;
    double mean = 0.0;
    double var = 0.0;
    std::vector<double> mode_ev;
    mode_ev.reserve(phonons.frequencies.size());
    for (size_t k = 0; k < phonons.frequencies.size(); ++k) {
        double w = phonons.frequencies[k] * 1e-3;
        mode_ev.push_back(w);
        double s = hr.partial_factors[k];
        if (s > 0.0 && w > 0.0) {
            w_max = std::max(w_max, w);
            mean += s * w;
            var += s * w * w;
        }
    }

    // Nyquist-style coarseness gate: the output grid must resolve both the
    // broadening and the phonon oscillation scale.
    double coarse_limit = w_max > 0.0 ? std::min(sigma_ev, 0.5 * w_max) : sigma_ev;
    if (step > coarse_limit + 1e-15) {
        throw ValidationError("pl_lineshape: grid too coarse for the phonon spectrum");
    }

    double needed = mean + 12.0 * std::sqrt(var) + w_max + 10.0 * sigma_ev;
    needed = std::max(needed, zpl_ev - e_min + 5.0 * sigma_ev);
    needed = std::max(needed, e_max - zpl_ev + 5.0 * sigma_ev);
    const int n = kTimePoints;
    double de = std::max(kBaseStepEv, 2.2 * needed / n);
    double dt = 2.0 * kPi / (n * de);

    // G(t) = exp(S~(t) - S) with Gaussian damping for the line broadening.
    std::vector<std::complex<double>> g(static_cast<size_t>(n));
    for (int i = 0; i <= n / 2; ++i) {
        double t = i * dt;
        std::complex<double> s_tilde(0.0, 0.0);
        for (size_t k = 0; k < mode_ev.size(); ++k) {
            double s = hr.partial_factors[k];
            if (s > 0.0 && mode_ev[k] > 0.0) {
                s_tilde += s * std::complex<double>(std::cos(mode_ev[k] * t),
                                                    -std::sin(mode_ev[k] * t));
            }
        }
        std::complex<double> val =
            std::exp(s_tilde - hr.total) * std::exp(-0.5 * sigma_ev * sigma_ev * t * t);
        g[static_cast<size_t>(i)] = val;
        if (i > 0 && i < n / 2) {
            g[static_cast<size_t>(n - i)] = std::conj(val);
        }
    }
    g[static_cast<size_t>(n / 2)] = std::real(g[static_cast<size_t>(n / 2)]);

    fft(g, +1);
    // A(E_j) with E_j = j*de (wrapped), unit total integral.
    std::vector<double> a(static_cast<size_t>(n));
    const double scale = dt / (2.0 * kPi);
    for (int j = 0; j < n; ++j) {
        a[static_cast<size_t>(j)] = std::max(0.0, std::real(g[static_cast<size_t>(j)]) * scale);
    }
    auto sample_a = [&](double energy) {
        double x = energy / de;
        double lo = std::floor(x);
        double frac = x - lo;
        auto wrap = [&](long long idx) {
            long long m = ((idx % n) + n) % n;
            return a[static_cast<size_t>(m)];
        };
        auto ll = static_cast<long long>(lo);
        return (1.0 - frac) * wrap(ll) + frac * wrap(ll + 1);
    };

    LineshapeResult out;
    out.zpl_position = zpl_ev;
    out.zpl_weight = std::exp(-hr.total);
    out.broadening = broadening_mev;
    out.s_total = hr.total;
    int n_points = static_cast<int>(std::floor((e_max - e_min) / step + 0.5)) + 1;
    out.energies.reserve(static_cast<size_t>(n_points));
    out.intensity.reserve(static_cast<size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        double hw = e_min + i * step;
        out.energies.push_back(hw);
        double shift = zpl_ev - hw;  // energy left in the lattice
        out.intensity.push_back(hw * hw * hw * sample_a(shift));
    }

    // Trapezoid normalization over the emitted grid.
    double integral = 0.0;
    for (size_t i = 0; i + 1 < out.intensity.size(); ++i) {
        integral += 0.5 * (out.intensity[i] + out.intensity[i + 1]) * step;
    }
    if (integral <= 0.0) {
        throw ValidationError("pl_lineshape: spectrum vanishes on the requested grid");
    }
    for (double& v : out.intensity) {
        v /= integral;
    }
    return out;
}

}  // namespace qds
