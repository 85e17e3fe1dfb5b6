// propagation.hpp — Maxwell-Bloch co-integration through the cell
//
// The probe envelope is marched along z in the retarded frame,
// dE_p/dz = i (Omega_p N / c) <sigma_31>, interleaved with an RK4 step of the
// local master equation at every atom node (operator splitting). A parallel
// Stokes channel integrates the sigma_42 source the same way, without
// re-absorption. Detuning scans evaluate one storage run per grid point and
// merge results in grid order.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vapormem/errors.hpp"
#include "vapormem/fpmode.hpp"
#include "vapormem/parallel.hpp"
#include "vapormem/pulse.hpp"
#include "vapormem/quantum.hpp"
#include "vapormem/spectral.hpp"
#include "vapormem/units.hpp"

namespace vapormem::mb {

using quantum::AtomFieldParams;
using quantum::Matrix4;

// --------------------------------- medium -----------------------------------

struct MediumGrid {
    int n_slices = 1;
    double length = 0.0;             // m
    double atom_number = 0.0;        // effective coupling count N
    double coupling_prefactor = 0.0; // Omega_p N / c, precomputed

    void validate() const {
        if (n_slices < 1) throw physics_error("MediumGrid: n_slices must be >= 1");
        if (!(length > 0.0)) throw physics_error("MediumGrid: length must be > 0");
        if (!(atom_number >= 0.0)) throw physics_error("MediumGrid: atom_number must be >= 0");
    }
};

inline MediumGrid make_medium(int n_slices, double length, double atom_number, double omega_p) {
    MediumGrid m;
    m.n_slices = n_slices;
    m.length = length;
    m.atom_number = atom_number;
    m.coupling_prefactor = omega_p * atom_number / speed_of_light;
    m.validate();
    return m;
}

// --------------------------------- results ----------------------------------

struct BackgroundPhotons {
    double scatter = 0.0; // photons per pulse in the ROI, pre-filter
    double stokes = 0.0;
};

struct StorageResult {
    PulseEnvelope probe_out;  // field history at z = L
    PulseEnvelope stokes_out; // Stokes channel at z = L
    std::vector<double> scatter_emission; // photons/s vs time
    double efficiency = 0.0;
    BackgroundPhotons background_photons;
};

struct PropagateOptions {
    // Converts ensemble scattering rate into detected photons/s:
    // rate(t) = 2(Gamma_31+Gamma_32) * mean_z rho_33 * atom_number * scatter_collection.
    double scatter_collection = 1.0;
    // Stokes coupling relative to the probe coupling prefactor.
    double stokes_coupling_scale = 1.0;
    bool check_invariants = true;
    std::size_t check_stride = 4000; // steps between invariant sweeps
    quantum::DensityTolerances tolerances{1e-9, 1e-10, 1e-8};
};

// ------------------------------- propagation --------------------------------

namespace detail_mb {

inline void check_probe_resolution(const PulseEnvelope& probe) {
    double max_amp = 0.0, max_step = 0.0;
    for (std::size_t i = 0; i + 1 < probe.size(); ++i) {
        max_amp = std::max(max_amp, std::abs(probe.samples[i]));
        max_step = std::max(max_step, std::abs(probe.samples[i + 1] - probe.samples[i]));
    }
    max_amp = std::max(max_amp, std::abs(probe.samples.back()));
    if (max_amp > 0.0 && max_step > 0.5 * max_amp)
        throw physics_error("propagate: probe bandwidth exceeds the Nyquist rate of dt");
}

inline void check_slice_invariants(const std::vector<quantum::State16>& rho, double t,
                                   const quantum::DensityTolerances& tol) {
    for (std::size_t j = 0; j < rho.size(); ++j) {
        try {
            quantum::validate_density(quantum::from_state(rho[j]), tol);
        } catch (const physics_error& e) {
            std::ostringstream msg;
            msg << "propagate: invariant violated in slice " << j << " at t = " << t
                << " s: " << e.what();
            throw physics_error(msg.str());
        }
    }
}

} // namespace detail_mb

inline double storage_efficiency(const StorageResult& result, const StorageProtocol& protocol);

inline StorageResult propagate(const StorageProtocol& protocol, const MediumGrid& medium,
                               const AtomFieldParams& params, const PropagateOptions& opt = {}) {
    protocol.validate();
    medium.validate();
    params.validate();
    const double dt = protocol.dt();
    quantum::check_step_size(dt, params);
    detail_mb::check_probe_resolution(protocol.probe_envelope);

    DenormalFlushGuard fp_mode;
    const std::size_t nz = static_cast<std::size_t>(medium.n_slices);
    const std::size_t nt = protocol.probe_envelope.size() - 1;
    const double dz = nz > 1 ? medium.length / static_cast<double>(nz - 1) : medium.length;
    const cplx ikap = cplx(0.0, 1.0) * medium.coupling_prefactor;
    const cplx ikap_s = ikap * opt.stokes_coupling_scale;
    const double scatter_weight =
        medium.atom_number * opt.scatter_collection / static_cast<double>(nz);
    const double g3x2 = 2.0 * params.gamma3_total();
    const auto sp = quantum::structured_params(params);

    std::vector<quantum::State16> rho(nz, quantum::to_state(quantum::ground_state()));
    std::vector<cplx> ep(nz), es(nz);

    StorageResult result;
    result.probe_out.dt = dt;
    result.probe_out.t0 = 0.0;
    result.probe_out.samples.resize(nt + 1);
    result.stokes_out = result.probe_out;
    result.scatter_emission.assign(nt + 1, 0.0);

    const auto& input = protocol.probe_envelope.samples;
    const auto& control = protocol.control;

    for (std::size_t n = 0; n <= nt; ++n) {
        const double t = static_cast<double>(n) * dt;

        // March the fields along z with the current coherences (trapezoid).
        // sigma_31 lives at row-major index 8, sigma_42 at 13, rho_33 at 10.
        ep[0] = input[n];
        es[0] = 0.0;
        for (std::size_t j = 1; j < nz; ++j) {
            ep[j] = ep[j - 1] + 0.5 * dz * ikap * (rho[j - 1][8] + rho[j][8]);
            es[j] = es[j - 1] + 0.5 * dz * ikap_s * (rho[j - 1][13] + rho[j][13]);
        }
        if (nz == 1) {
            result.probe_out.samples[n] = ep[0] + dz * ikap * rho[0][8];
            result.stokes_out.samples[n] = dz * ikap_s * rho[0][13];
        } else {
            result.probe_out.samples[n] = ep[nz - 1];
            result.stokes_out.samples[n] = es[nz - 1];
        }

        double pop3 = 0.0;
        for (const auto& r : rho) pop3 += r[10].real();
        result.scatter_emission[n] = g3x2 * pop3 * scatter_weight;

        if (n == nt) break;

        const cplx ec_start(control.value(t), 0.0);
        const cplx ec_mid(control.value(t + 0.5 * dt), 0.0);
        const cplx ec_end(control.value(t + dt), 0.0);
        for (std::size_t j = 0; j < nz; ++j)
            quantum::structured_rk4_step(rho[j], sp, ep[j], ec_start, ec_mid, ec_end, dt);

        if (opt.check_invariants && (n + 1) % opt.check_stride == 0)
            detail_mb::check_slice_invariants(rho, t + dt, opt.tolerances);
    }
    if (opt.check_invariants)
        detail_mb::check_slice_invariants(rho, static_cast<double>(nt) * dt, opt.tolerances);

    result.efficiency = storage_efficiency(result, protocol);

    const auto roi_first = static_cast<std::size_t>(std::ceil(control.retrieve_on / dt - 1e-9));
    const auto roi_last = std::min<std::size_t>(
        nt, static_cast<std::size_t>((control.retrieve_on + protocol.retrieval_window) / dt + 1e-9));
    for (std::size_t n = roi_first; n <= roi_last; ++n) {
        result.background_photons.scatter += result.scatter_emission[n] * dt;
        result.background_photons.stokes += std::norm(result.stokes_out.samples[n]) * dt;
    }
    return result;
}

// ----------------------------- storage efficiency ---------------------------

// eta = (retrieved probe energy inside the ROI) / (input probe energy).
inline double storage_efficiency(const StorageResult& result, const StorageProtocol& protocol) {
    const double dt = result.probe_out.dt;
    const double t_begin = protocol.control.retrieve_on;
    const double t_close = t_begin + protocol.retrieval_window;
    const double span = result.probe_out.time_at(result.probe_out.size() - 1);
    if (!(t_begin >= 0.0) || t_close > span + dt)
        throw physics_error("storage_efficiency: ROI lies outside the result time span");

    const auto first = static_cast<std::size_t>(std::ceil(t_begin / dt - 1e-9));
    const auto last = std::min<std::size_t>(result.probe_out.size() - 1,
                                            static_cast<std::size_t>(t_close / dt + 1e-9));
    if (first > last) throw physics_error("storage_efficiency: empty ROI");

    double retrieved = 0.0;
    for (std::size_t n = first; n <= last; ++n) retrieved += std::norm(result.probe_out.samples[n]);
    retrieved *= dt;

    const double input = protocol.probe_envelope.energy();
    if (input <= 0.0) return 0.0;

    double eta = retrieved / input;
    if (eta < 0.0 || eta > 1.0) {
        std::cerr << "[vapormem] storage_efficiency: clamping eta = " << eta << " into [0,1]\n";
        eta = std::clamp(eta, 0.0, 1.0);
    }
    return eta;
}

// --------------------------------- scans ------------------------------------

// A common shift of both phase-locked lasers enters the rotating-frame
// Hamiltonian through delta and delta23 together; the two-photon detuning
// (delta - delta23) is untouched by the scan.
inline AtomFieldParams at_laser_detuning(const AtomFieldParams& base, double detuning_rad) {
    AtomFieldParams p = base;
    p.delta = base.delta + detuning_rad;
    p.delta23 = base.delta23 + detuning_rad;
    return p;
}

struct DetuningGrid {
    double min_hz = 0.0;
    double step_hz = 0.0;
    std::size_t count = 0;

    double at(std::size_t i) const { return min_hz + static_cast<double>(i) * step_hz; }

    void validate() const {
        if (count < 1) throw physics_error("DetuningGrid: empty grid");
        if (!(step_hz > 0.0)) throw physics_error("DetuningGrid: step must be > 0");
    }
};

inline spectral::SpectralCurve efficiency_bandwidth_scan(const DetuningGrid& grid,
                                                         const StorageProtocol& protocol,
                                                         const MediumGrid& medium,
                                                         const AtomFieldParams& params,
                                                         unsigned jobs = 1,
                                                         const PropagateOptions& opt = {}) {
    grid.validate();
    std::vector<double> eta(grid.count, 0.0);
    detail::parallel_for_indexed(grid.count, jobs, [&](std::size_t i) {
        const auto p = at_laser_detuning(params, rad_from_hz(grid.at(i)));
        eta[i] = propagate(protocol, medium, p, opt).efficiency;
    });
    return spectral::SpectralCurve(grid.min_hz, grid.step_hz, std::move(eta));
}

struct BackgroundScanOptions {
    PropagateOptions propagate;
    // The two background components are emitted 13.6 GHz apart; the Stokes
    // curve is returned with this carrier offset folded into its grid origin.
    double stokes_offset_hz = 13.6e9;
    // With no probe the slices are identical, so one representative slice
    // reproduces the full z-grid up to the negligible re-seeded probe field.
    bool uniform_medium_fast_path = true;
};

struct BackgroundCurves {
    spectral::SpectralCurve scatter; // photons per pulse at the probe carrier
    spectral::SpectralCurve stokes;  // photons per pulse at the offset carrier
};

namespace detail_mb {

inline BackgroundPhotons background_single_slice(const StorageProtocol& protocol,
                                                 const MediumGrid& medium,
                                                 const AtomFieldParams& params,
                                                 const PropagateOptions& opt) {
    const double dt = protocol.dt();
    quantum::check_step_size(dt, params);
    const std::size_t nt = protocol.probe_envelope.size() - 1;
    const auto& control = protocol.control;
    const double kap_s = medium.coupling_prefactor * opt.stokes_coupling_scale;
    const double g3x2 = 2.0 * params.gamma3_total();

    const auto roi_first = static_cast<std::size_t>(std::ceil(control.retrieve_on / dt - 1e-9));
    const auto roi_last = std::min<std::size_t>(
        nt, static_cast<std::size_t>((control.retrieve_on + protocol.retrieval_window) / dt + 1e-9));

    DenormalFlushGuard fp_mode;
    const auto sp = quantum::structured_params(params);
    quantum::State16 rho = quantum::to_state(quantum::ground_state());
    BackgroundPhotons q;
    for (std::size_t n = 0; n <= nt; ++n) {
        if (n >= roi_first && n <= roi_last) {
            q.scatter += g3x2 * rho[10].real() * medium.atom_number * opt.scatter_collection * dt;
            q.stokes += std::norm(kap_s * medium.length * rho[13]) * dt;
        }
        if (n == nt) break;
        const double t = static_cast<double>(n) * dt;
        quantum::structured_rk4_step(rho, sp, cplx(0.0), cplx(control.value(t), 0.0),
                                     cplx(control.value(t + 0.5 * dt), 0.0),
                                     cplx(control.value(t + dt), 0.0), dt);
        if (opt.check_invariants && (n + 1) % opt.check_stride == 0)
            quantum::validate_density(quantum::from_state(rho), opt.tolerances);
    }
    return q;
}

} // namespace detail_mb

inline BackgroundCurves background_emission_scan(const DetuningGrid& grid,
                                                 const StorageProtocol& protocol,
                                                 const MediumGrid& medium,
                                                 const AtomFieldParams& params, unsigned jobs = 1,
                                                 const BackgroundScanOptions& opt = {}) {
    grid.validate();
    protocol.validate();
    medium.validate();
    if (protocol.probe_envelope.energy() != 0.0)
        throw physics_error("background_emission_scan: probe envelope must be identically zero");

    std::vector<double> scatter(grid.count, 0.0), stokes(grid.count, 0.0);
    detail::parallel_for_indexed(grid.count, jobs, [&](std::size_t i) {
        const auto p = at_laser_detuning(params, rad_from_hz(grid.at(i)));
        BackgroundPhotons q;
        if (opt.uniform_medium_fast_path) {
            q = detail_mb::background_single_slice(protocol, medium, p, opt.propagate);
        } else {
            q = propagate(protocol, medium, p, opt.propagate).background_photons;
        }
        scatter[i] = q.scatter;
        stokes[i] = q.stokes;
    });

    BackgroundCurves out;
    out.scatter = spectral::SpectralCurve(grid.min_hz, grid.step_hz, std::move(scatter));
    out.stokes =
        spectral::SpectralCurve(grid.min_hz + opt.stokes_offset_hz, grid.step_hz, std::move(stokes));
    return out;
}

} // namespace vapormem::mb
