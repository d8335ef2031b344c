#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklegi/numeric.hpp"
#include "specklegi/rng.hpp"
#include "specklegi/special_functions.hpp"

namespace specklegi {

enum class SourceKind {
    Thermal,         // single rotating diffuser: exponential intensity statistics
    SpeckledSpeckle, // two cascaded diffusers with pinhole selection (gamma-gamma)
    SecondHarmonic,  // frequency-doubled thermal field: I = k * I_fund^2
};

inline const char* to_string(SourceKind k) {
    switch (k) {
        case SourceKind::Thermal: return "thermal";
        case SourceKind::SpeckledSpeckle: return "speckled-speckle";
        case SourceKind::SecondHarmonic: return "second-harmonic";
    }
    return "?";
}

inline SourceKind source_kind_from_string(const std::string& s) {
    if (s == "thermal") return SourceKind::Thermal;
    if (s == "speckled-speckle") return SourceKind::SpeckledSpeckle;
    if (s == "second-harmonic") return SourceKind::SecondHarmonic;
    throw std::invalid_argument("unknown source kind: " + s);
}

/// Which light source to simulate, with its statistical parameters.
/// Only the fields relevant to `kind` are read:
///   Thermal          mean_intensity
///   SpeckledSpeckle  mean_intensity, mu_f (first-diffuser modes),
///                    mu_s (second-selection modes; per-pixel statistics have mu_s = 1)
///   SecondHarmonic   mean_fund, mu (fundamental modes), conversion_k;
///                    the output mean is derived, not free.
struct SourceSpec {
    SourceKind kind = SourceKind::Thermal;
    double mean_intensity = 1.0;
    double mu_f = 1.0;
    double mu_s = 1.0;
    double mu = 1.0;
    double conversion_k = 1.0;
    double mean_fund = 1.0;

    static SourceSpec thermal(double mean) {
        SourceSpec s;
        s.kind = SourceKind::Thermal;
        s.mean_intensity = mean;
        s.validate();
        return s;
    }

    static SourceSpec speckled_speckle(double mean, double mu_f, double mu_s = 1.0) {
        SourceSpec s;
        s.kind = SourceKind::SpeckledSpeckle;
        s.mean_intensity = mean;
        s.mu_f = mu_f;
        s.mu_s = mu_s;
        s.validate();
        return s;
    }

    static SourceSpec second_harmonic(double mean_fund, double mu, double k) {
        SourceSpec s;
        s.kind = SourceKind::SecondHarmonic;
        s.mean_fund = mean_fund;
        s.mu = mu;
        s.conversion_k = k;
        s.validate();
        return s;
    }

    void validate() const {
        switch (kind) {
            case SourceKind::Thermal:
                if (!(mean_intensity > 0.0))
                    throw std::invalid_argument("SourceSpec: mean intensity must be positive");
                break;
            case SourceKind::SpeckledSpeckle:
                if (!(mean_intensity > 0.0))
                    throw std::invalid_argument("SourceSpec: mean intensity must be positive");
                if (!(mu_f >= 1.0) || !(mu_s >= 1.0))
                    throw std::invalid_argument("SourceSpec: mode counts must be >= 1");
                break;
            case SourceKind::SecondHarmonic:
                if (!(mean_fund > 0.0))
                    throw std::invalid_argument("SourceSpec: fundamental mean must be positive");
                if (!(mu >= 1.0))
                    throw std::invalid_argument("SourceSpec: mode count must be >= 1");
                if (!(conversion_k > 0.0))
                    throw std::invalid_argument("SourceSpec: conversion efficiency must be positive");
                break;
        }
    }

    /// Mean output intensity. For the second-harmonic source this is the
    /// second moment of the gamma-distributed fundamental:
    /// <I> = k <I_F>^2 (1 + 1/mu).
    double mean() const {
        if (kind == SourceKind::SecondHarmonic)
            return conversion_k * mean_fund * mean_fund * (1.0 + 1.0 / mu);
        return mean_intensity;
    }

    /// Analytic zero-lag g2 of a single pixel (mu_s = 1 per pixel for the
    /// cascaded source; region-integrated statistics use g2_speckled_speckle
    /// with the effective mu_s of the region).
    double single_pixel_g2() const;
};

// ---------------------------------------------------------------------------
// Intensity probability densities
// ---------------------------------------------------------------------------

/// Exponential (thermal) intensity density: P(i) = exp(-i/mean)/mean.
inline double pdf_thermal(double i, double mean) {
    if (!(mean > 0.0)) throw std::invalid_argument("pdf_thermal: mean must be positive");
    if (i < 0.0) throw std::invalid_argument("pdf_thermal: negative intensity");
    return std::exp(-i / mean) / mean;
}

/// Gamma-gamma density of the two-diffuser cascade:
///   P(i) = 2 (mu_f mu_s)^{(mu_f+mu_s)/2} / (mean G(mu_f) G(mu_s))
///          * (i/mean)^{(mu_f+mu_s-2)/2} * K_{|mu_f-mu_s|}(2 sqrt(mu_f mu_s i / mean)).
/// Evaluated in log space so large mode counts cannot overflow the Bessel
/// prefactor product. At i = 0 the continuous limit is returned; it is
/// +inf (logarithmic divergence) when mu_f == mu_s == 1.
inline double pdf_speckled_speckle(double i, double mean, double mu_f, double mu_s) {
    if (!(mean > 0.0)) throw std::invalid_argument("pdf_speckled_speckle: mean must be positive");
    if (i < 0.0) throw std::invalid_argument("pdf_speckled_speckle: negative intensity");
    if (!(mu_f >= 1.0) || !(mu_s >= 1.0))
        throw std::invalid_argument("pdf_speckled_speckle: mode counts must be >= 1");
    const double nu = std::abs(mu_f - mu_s);
    if (i == 0.0) {
        const double lo = std::min(mu_f, mu_s);
        if (nu == 0.0)
            return lo > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
        if (lo > 1.0) return 0.0;
        // K_nu(z) -> Gamma(nu) 2^{nu-1} / z^nu as z -> 0; the i powers cancel
        return std::exp(lo * std::log(mu_f * mu_s) + std::lgamma(nu) - std::log(mean) -
                        std::lgamma(mu_f) - std::lgamma(mu_s));
    }
    const double z = 2.0 * std::sqrt(mu_f * mu_s * i / mean);
    const double log_pdf = std::numbers::ln2 + 0.5 * (mu_f + mu_s) * std::log(mu_f * mu_s) -
                           std::log(mean) - std::lgamma(mu_f) - std::lgamma(mu_s) +
                           (0.5 * (mu_f + mu_s) - 1.0) * std::log(i / mean) +
                           log_bessel_k(nu, z);
    return std::exp(log_pdf);
}

/// Intensity density of a frequency-doubled gamma-distributed fundamental,
/// I = k I_F^2 with I_F ~ Gamma(mu, mean_fund/mu):
///   P(i) = b^{mu-2} exp(-mu b / mean_fund) / (2 k Gamma(mu) (mean_fund/mu)^mu),
/// with b = sqrt(i/k). (mu-1)! is generalized to Gamma(mu) so mu may be any
/// real >= 1. At i = 0 the density diverges for mu < 2; the overflow is
/// signaled as +inf, never NaN.
inline double pdf_second_harmonic(double i, double mean_fund, double mu, double k) {
    if (!(mean_fund > 0.0) || !(k > 0.0))
        throw std::invalid_argument("pdf_second_harmonic: mean_fund and k must be positive");
    if (!(mu >= 1.0)) throw std::invalid_argument("pdf_second_harmonic: mu must be >= 1");
    if (i < 0.0) throw std::invalid_argument("pdf_second_harmonic: negative intensity");
    if (i == 0.0) {
        if (mu < 2.0) return std::numeric_limits<double>::infinity();
        if (mu == 2.0)
            return std::exp(-std::numbers::ln2 - std::log(k) - std::lgamma(mu) -
                            mu * std::log(mean_fund / mu));
        return 0.0;
    }
    const double b = std::sqrt(i / k);
    const double log_pdf = (mu - 2.0) * std::log(b) - mu * b / mean_fund - std::numbers::ln2 -
                           std::log(k) - std::lgamma(mu) - mu * std::log(mean_fund / mu);
    return std::exp(log_pdf);
}

// ---------------------------------------------------------------------------
// Second-order autocorrelation g2 = <I^2>/<I>^2 at zero lag
// ---------------------------------------------------------------------------

/// g2 of the two-diffuser cascade: (1 + 1/mu_f)(1 + 1/mu_s).
/// Maximum 4 at mu_f = mu_s = 1; tends to 2 for mu_s -> inf at mu_f = 1.
inline double g2_speckled_speckle(double mu_f, double mu_s) {
    if (!(mu_f >= 1.0) || !(mu_s >= 1.0) || !std::isfinite(mu_f) || !std::isfinite(mu_s))
        throw std::invalid_argument("g2_speckled_speckle: mode counts must be finite and >= 1");
    return (1.0 + 1.0 / mu_f) * (1.0 + 1.0 / mu_s);
}

/// g2 of the frequency-doubled source: 1 + 2(2 mu + 3)/(mu (mu + 1)),
/// algebraically equal to (mu+2)(mu+3)/(mu(mu+1)).
/// Maximum 6 at mu = 1; tends to 1 for mu -> inf.
inline double g2_second_harmonic(double mu) {
    if (!(mu >= 1.0) || !std::isfinite(mu))
        throw std::invalid_argument("g2_second_harmonic: mu must be finite and >= 1");
    return 1.0 + 2.0 * (2.0 * mu + 3.0) / (mu * (mu + 1.0));
}

inline double SourceSpec::single_pixel_g2() const {
    switch (kind) {
        case SourceKind::Thermal: return 2.0;
        case SourceKind::SpeckledSpeckle: return g2_speckled_speckle(mu_f, 1.0);
        case SourceKind::SecondHarmonic: return g2_second_harmonic(mu);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Direct intensity sampling (statistical oracle, independent of the
// field-level Monte Carlo)
// ---------------------------------------------------------------------------

struct IntensitySample {
    std::vector<double> values;
    std::uint64_t seed = 0;
};

/// Draws n single-shot intensities distributed like the analytic densities:
///   Thermal          mean * Exp(1)
///   SpeckledSpeckle  mean * (G1/mu_f) * (G2/mu_s), G_i ~ Gamma(mu_i, 1)
///   SecondHarmonic   k * I_F^2, I_F ~ Gamma(mu, mean_fund/mu)
/// Deterministic: the same (spec, n, seed) always yields the same values.
inline IntensitySample sample_intensity(const SourceSpec& spec, std::size_t n,
                                        std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("sample_intensity: n must be >= 1");
    Rng rng(derive_seed(seed, /*stream=*/0x5a));
    IntensitySample out;
    out.seed = seed;
    out.values.resize(n);
    switch (spec.kind) {
        case SourceKind::Thermal:
            for (auto& v : out.values) v = rng.exponential(spec.mean_intensity);
            break;
        case SourceKind::SpeckledSpeckle:
            for (auto& v : out.values) {
                const double g1 = rng.gamma(spec.mu_f) / spec.mu_f;
                const double g2 = rng.gamma(spec.mu_s) / spec.mu_s;
                v = spec.mean_intensity * g1 * g2;
            }
            break;
        case SourceKind::SecondHarmonic:
            for (auto& v : out.values) {
                const double fund = rng.gamma(spec.mu) * (spec.mean_fund / spec.mu);
                v = spec.conversion_k * fund * fund;
            }
            break;
    }
    return out;
}

/// Moment estimator g2 = (mean of squares) / (mean)^2 of a sample.
inline double estimate_g2(const IntensitySample& sample) {
    const auto& v = sample.values;
    if (v.size() < 2) throw std::invalid_argument("estimate_g2: need at least 2 values");
    KahanSum s1, s2;
    bool any_nonzero = false;
    for (double x : v) {
        if (x != 0.0) any_nonzero = true;
        s1.add(x);
        s2.add(x * x);
    }
    if (!any_nonzero) throw std::domain_error("estimate_g2: all-zero sample");
    const double n = static_cast<double>(v.size());
    const double m1 = s1.value() / n;
    return (s2.value() / n) / (m1 * m1);
}

}  // namespace specklegi
