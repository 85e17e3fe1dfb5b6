// pulse.hpp — Time-sampled field envelopes and the write/store/retrieve timing

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "vapormem/errors.hpp"
#include "vapormem/units.hpp"

namespace vapormem::mb {

using cplx = std::complex<double>;

struct PulseEnvelope {
    std::vector<cplx> samples;
    double dt = 0.0; // s
    double t0 = 0.0; // s

    std::size_t size() const { return samples.size(); }
    double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }

    // Sum |s|^2 dt; in the normalized units this is the photon number.
    double energy() const {
        double e = 0.0;
        for (const auto& s : samples) e += std::norm(s);
        return e * dt;
    }

    void validate() const {
        if (samples.empty()) throw physics_error("PulseEnvelope: empty sample grid");
        if (!(dt > 0.0)) throw physics_error("PulseEnvelope: dt must be > 0");
        const double e = energy();
        if (!std::isfinite(e)) throw physics_error("PulseEnvelope: non-finite energy");
    }
};

// Gaussian probe normalized to `photons` = sum |s|^2 dt.
inline PulseEnvelope gaussian_pulse(double fwhm, double center, double photons, double dt,
                                    double t_end) {
    if (!(fwhm > 0.0 && dt > 0.0 && t_end > 0.0))
        throw physics_error("gaussian_pulse: fwhm, dt and t_end must be > 0");
    PulseEnvelope env;
    env.dt = dt;
    env.t0 = 0.0;
    const auto n = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    env.samples.resize(n + 1);
    const double k = 4.0 * std::numbers::ln2 / (fwhm * fwhm);
    double e = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double a = std::exp(-k * sqr(t - center));
        env.samples[i] = a;
        e += a * a;
    }
    if (photons > 0.0) {
        const double scale = std::sqrt(photons / (e * dt));
        for (auto& s : env.samples) s *= scale;
    } else {
        for (auto& s : env.samples) s = 0.0;
    }
    return env;
}

// Control schedule: on during the write stage, off during storage, on again
// for retrieval, with raised-cosine switching edges. The field is exactly
// zero on [write_off, retrieve_on].
struct ControlTiming {
    double write_off = 0.0;   // s, end of the write stage
    double retrieve_on = 0.0; // s, start of retrieval
    double edge = 0.0;        // s, switching edge duration
    double amplitude = 1.0;   // field units

    void validate() const {
        if (!(edge >= 0.0)) throw physics_error("ControlTiming: edge must be >= 0");
        if (!(write_off < retrieve_on))
            throw physics_error("ControlTiming: control must switch off before retrieval");
    }

    double value(double t) const {
        if (t <= write_off - edge) return amplitude;
        if (t < write_off) {
            const double x = (t - (write_off - edge)) / edge;
            return amplitude * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
        }
        if (t <= retrieve_on) return 0.0;
        if (t < retrieve_on + edge) {
            const double x = (t - retrieve_on) / edge;
            return amplitude * 0.5 * (1.0 - std::cos(std::numbers::pi * x));
        }
        return amplitude;
    }
};

struct StorageProtocol {
    PulseEnvelope probe_envelope; // defines the shared time grid, t0 = 0
    ControlTiming control;
    double retrieval_window = 0.0; // s

    double dt() const { return probe_envelope.dt; }
    double t_end() const { return probe_envelope.time_at(probe_envelope.size() - 1); }
    double storage_time() const { return control.retrieve_on - control.write_off; }

    void validate() const {
        probe_envelope.validate();
        control.validate();
        if (probe_envelope.t0 != 0.0)
            throw physics_error("StorageProtocol: probe envelope must start at t = 0");
        if (!(retrieval_window > 0.0))
            throw physics_error("StorageProtocol: retrieval window must be > 0");
        if (control.retrieve_on + retrieval_window > t_end() + dt())
            throw physics_error("StorageProtocol: retrieval window extends past the time grid");
    }
};

} // namespace vapormem::mb
