// quantum.hpp — Four-level Hamiltonian and Lindblad master-equation integrator
//
// Levels are ordered |1>,|2> (ground), |3> (excited), |4> (off-resonant
// virtual state); matrices are 4x4 complex with 0-based indices, so the
// coherence sigma_31 lives at (2,0). All rates and detunings are rad/s;
// conversion from the Hz-facing interfaces happens in the harness.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "vapormem/errors.hpp"
#include "vapormem/fpmode.hpp"
#include "vapormem/units.hpp"

namespace vapormem::quantum {

using cplx = std::complex<double>;
using Matrix4 = Eigen::Matrix4cd;

// ------------------------------- parameters ---------------------------------

struct AtomFieldParams {
    double delta13 = 0.0; // probe one-photon lock offset
    double delta23 = 0.0; // control one-photon lock offset
    double delta = 0.0;   // common laser detuning

    double omega_p = 0.0; // probe coupling per unit field
    double omega_c = 0.0; // control coupling per unit field
    double alpha = 0.0;   // virtual-state coupling strength
    double omega43 = rad_from_hz(13.6e9);

    double gamma31 = 0.0;
    double gamma32 = 0.0;
    double gamma41 = 0.0;
    double gamma42 = 0.0;
    double gamma12 = 0.0;

    // Companion |2> -> |1> exchange term; the printed equation only moves
    // population one way, this is the opt-in balanced variant.
    bool gamma12_symmetric = false;

    // Degenerate-denominator guard for alpha/(omega43 + delta), relative to
    // omega43.
    double denom_epsilon = 1.0e-6;

    double gamma3_total() const { return gamma31 + gamma32; }
    double gamma4_total() const { return gamma41 + gamma42; }

    double max_rate() const {
        double m = gamma12;
        for (double g : {gamma31, gamma32, gamma41, gamma42}) m = std::max(m, g);
        return m;
    }

    void validate() const {
        for (double g : {gamma31, gamma32, gamma41, gamma42, gamma12})
            if (!(g >= 0.0)) throw physics_error("AtomFieldParams: rates must be >= 0");
        if (!(omega43 > 0.0)) throw physics_error("AtomFieldParams: omega43 must be > 0");
    }
};

// --------------------------- density-matrix checks ---------------------------

inline Matrix4 ground_state() {
    Matrix4 rho = Matrix4::Zero();
    rho(0, 0) = 1.0;
    return rho;
}

inline double hermiticity_error(const Matrix4& m) {
    double e = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j)
            e = std::max(e, std::abs(m(i, j) - std::conj(m(j, i))));
    return e;
}

inline double min_eigenvalue(const Matrix4& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix4> es;
    es.compute(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

struct DensityTolerances {
    double trace = 1e-9;
    double hermiticity = 1e-12;
    double positivity = 1e-8;
};

inline void validate_density(const Matrix4& rho, const DensityTolerances& tol = {}) {
    const double he = hermiticity_error(rho);
    if (he > tol.hermiticity)
        throw physics_error("density matrix not Hermitian, error " + std::to_string(he));
    const double te = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
    if (te > tol.trace)
        throw physics_error("density matrix trace deviates by " + std::to_string(te));
    const double ev = min_eigenvalue(rho);
    if (ev < -tol.positivity)
        throw physics_error("density matrix not positive, min eigenvalue " + std::to_string(ev));
}

// ------------------------------- Hamiltonian --------------------------------

// Every coupling enters once with its Hermitian conjugate; diagonal detuning
// terms appear once. e_p and e_c are the local complex field amplitudes.
inline Matrix4 build_hamiltonian(const AtomFieldParams& p, cplx e_p, cplx e_c) {
    const double denom = p.omega43 + p.delta;
    if (std::abs(denom) < p.denom_epsilon * p.omega43)
        throw physics_error("build_hamiltonian: degenerate virtual-state denominator omega43+delta");

    Matrix4 h = Matrix4::Zero();
    h(0, 0) = p.delta - p.delta13;
    h(1, 1) = p.delta23 - p.delta13;
    h(3, 3) = p.omega43 - p.delta13;

    const cplx probe = -p.omega_p * e_p;
    h(2, 0) = probe;
    h(0, 2) = std::conj(probe);

    const cplx control = -p.omega_c * e_c;
    h(2, 1) = control;
    h(1, 2) = std::conj(control);

    const cplx virt = -(p.alpha / denom) * p.omega_c * e_c;
    h(3, 0) = virt;
    h(3, 1) = virt;
    h(0, 3) = std::conj(virt);
    h(1, 3) = std::conj(virt);
    return h;
}

// ----------------------------- master equation ------------------------------

// drho/dt = -i[H,rho] + sum_m Gamma_3m (2 s_m3 rho s_3m - {s_33, rho})
//           + sum_m Gamma_4m (2 s_m4 rho s_4m - {s_44, rho})
//           + Gamma_12 (2 s_21 rho s_12 - {s_11, rho})
inline Matrix4 lindblad_rhs(const Matrix4& rho, const Matrix4& h, const AtomFieldParams& p) {
    Matrix4 d = cplx(0.0, -1.0) * (h * rho - rho * h);

    const double g3 = p.gamma3_total();
    const double g4 = p.gamma4_total();
    double level_loss[4] = {p.gamma12, 0.0, g3, g4};
    if (p.gamma12_symmetric) level_loss[1] += p.gamma12;

    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            d(i, j) -= (level_loss[i] + level_loss[j]) * rho(i, j);

    const cplx r33 = rho(2, 2);
    const cplx r44 = rho(3, 3);
    d(0, 0) += 2.0 * p.gamma31 * r33 + 2.0 * p.gamma41 * r44;
    d(1, 1) += 2.0 * p.gamma32 * r33 + 2.0 * p.gamma42 * r44 + 2.0 * p.gamma12 * rho(0, 0);
    if (p.gamma12_symmetric) d(0, 0) += 2.0 * p.gamma12 * rho(1, 1);
    return d;
}

// ----------------------------- structured hot path ---------------------------

// The Hamiltonian has three real diagonal entries and three couplings; the
// propagation inner loop uses this structure directly instead of dense 4x4
// products. Must stay equal to lindblad_rhs(build_hamiltonian(...)) — the
// test suite pins the two routes against each other.
struct StructuredParams {
    double d0, d1, d3;              // diagonal entries (rad/s)
    double omega_p, omega_c, virt;  // virt = alpha/(omega43+delta) * omega_c
    double loss[4];                 // anticommutator coefficient per level
    double g31x2, g32x2, g41x2, g42x2, g12x2;
    bool symmetric;
};

inline StructuredParams structured_params(const AtomFieldParams& p) {
    const double denom = p.omega43 + p.delta;
    if (std::abs(denom) < p.denom_epsilon * p.omega43)
        throw physics_error("structured_params: degenerate virtual-state denominator");
    StructuredParams s;
    s.d0 = p.delta - p.delta13;
    s.d1 = p.delta23 - p.delta13;
    s.d3 = p.omega43 - p.delta13;
    s.omega_p = p.omega_p;
    s.omega_c = p.omega_c;
    s.virt = (p.alpha / denom) * p.omega_c;
    s.loss[0] = p.gamma12;
    s.loss[1] = p.gamma12_symmetric ? p.gamma12 : 0.0;
    s.loss[2] = p.gamma3_total();
    s.loss[3] = p.gamma4_total();
    s.g31x2 = 2.0 * p.gamma31;
    s.g32x2 = 2.0 * p.gamma32;
    s.g41x2 = 2.0 * p.gamma41;
    s.g42x2 = 2.0 * p.gamma42;
    s.g12x2 = 2.0 * p.gamma12;
    s.symmetric = p.gamma12_symmetric;
    return s;
}

using State16 = std::array<cplx, 16>; // row-major rho

inline void structured_rhs(const State16& r, const StructuredParams& s, cplx e_p, cplx e_c,
                           State16& out) {
    const cplx cp = -s.omega_p * e_p;
    const cplx cc = -s.omega_c * e_c;
    const cplx cv = -s.virt * e_c;
    const cplx cps = std::conj(cp);
    const cplx ccs = std::conj(cc);
    const cplx cvs = std::conj(cv);

    const cplx* r0 = r.data();
    const cplx* r1 = r.data() + 4;
    const cplx* r2 = r.data() + 8;
    const cplx* r3 = r.data() + 12;

    for (int j = 0; j < 4; ++j) {
        // commutator columns of H*rho
        const cplx c0 = s.d0 * r0[j] + cps * r2[j] + cvs * r3[j];
        const cplx c1 = s.d1 * r1[j] + ccs * r2[j] + cvs * r3[j];
        const cplx c2 = cp * r0[j] + cc * r1[j];
        const cplx c3 = cv * (r0[j] + r1[j]) + s.d3 * r3[j];

        // rows of rho*H for column j need rho's column entries; do it per (i,j)
        out[0 * 4 + j] = c0;
        out[1 * 4 + j] = c1;
        out[2 * 4 + j] = c2;
        out[3 * 4 + j] = c3;
    }
    // subtract rho*H
    for (int i = 0; i < 4; ++i) {
        const cplx* ri = r.data() + 4 * i;
        cplx* oi = out.data() + 4 * i;
        oi[0] -= ri[0] * s.d0 + ri[2] * cp + ri[3] * cv;
        oi[1] -= ri[1] * s.d1 + ri[2] * cc + ri[3] * cv;
        oi[2] -= ri[0] * cps + ri[1] * ccs;
        oi[3] -= (ri[0] + ri[1]) * cvs + ri[3] * s.d3;
    }
    // -i [H, rho] and the dissipator
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const cplx commutator = out[4 * i + j];
            out[4 * i + j] = cplx(commutator.imag(), -commutator.real()) -
                             (s.loss[i] + s.loss[j]) * r[4 * i + j];
        }
    out[0] += s.g31x2 * r[10] + s.g41x2 * r[15];
    out[5] += s.g32x2 * r[10] + s.g42x2 * r[15] + s.g12x2 * r[0];
    if (s.symmetric) out[0] += s.g12x2 * r[5];
}

// One RK4 step of the structured right-hand side; the probe field is frozen
// over the step, the control may differ at the three substep times.
inline void structured_rk4_step(State16& r, const StructuredParams& s, cplx e_p, cplx ec_start,
                                cplx ec_mid, cplx ec_end, double dt) {
    State16 k1, k2, k3, k4, tmp;
    structured_rhs(r, s, e_p, ec_start, k1);
    for (int i = 0; i < 16; ++i) tmp[i] = r[i] + (0.5 * dt) * k1[i];
    structured_rhs(tmp, s, e_p, ec_mid, k2);
    for (int i = 0; i < 16; ++i) tmp[i] = r[i] + (0.5 * dt) * k2[i];
    structured_rhs(tmp, s, e_p, ec_mid, k3);
    for (int i = 0; i < 16; ++i) tmp[i] = r[i] + dt * k3[i];
    structured_rhs(tmp, s, e_p, ec_end, k4);
    const double w = dt / 6.0;
    for (int i = 0; i < 16; ++i) r[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
}

inline State16 to_state(const Matrix4& m) {
    State16 s;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s[4 * i + j] = m(i, j);
    return s;
}

inline Matrix4 from_state(const State16& s) {
    Matrix4 m;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = s[4 * i + j];
    return m;
}

// ------------------------------- integration --------------------------------

using FieldFn = std::function<cplx(double)>;

// One classical RK4 step with time-dependent fields.
template <typename Fp, typename Fc>
inline Matrix4 rk4_step(const Matrix4& rho, const AtomFieldParams& p, Fp&& e_p, Fc&& e_c,
                        double t, double dt) {
    const double th = t + 0.5 * dt;
    const Matrix4 h1 = build_hamiltonian(p, e_p(t), e_c(t));
    const Matrix4 h2 = build_hamiltonian(p, e_p(th), e_c(th));
    const Matrix4 h4 = build_hamiltonian(p, e_p(t + dt), e_c(t + dt));

    const Matrix4 k1 = lindblad_rhs(rho, h1, p);
    const Matrix4 k2 = lindblad_rhs(rho + (0.5 * dt) * k1, h2, p);
    const Matrix4 k3 = lindblad_rhs(rho + (0.5 * dt) * k2, h2, p);
    const Matrix4 k4 = lindblad_rhs(rho + dt * k3, h4, p);
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void check_step_size(double dt, const AtomFieldParams& p) {
    if (!(dt > 0.0)) throw physics_error("evolve: dt must be > 0");
    if (!(dt * p.max_rate() < 0.1))
        throw physics_error("evolve: stability guard dt*max_rate < 0.1 violated, dt*rate = " +
                            std::to_string(dt * p.max_rate()));
}

struct EvolveOptions {
    std::size_t sample_stride = 1; // trajectory sampling cadence in steps
    bool check_invariants = true;
    DensityTolerances tolerances{1e-9, 1e-10, 1e-8};
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Matrix4> states;
};

inline Trajectory evolve(const Matrix4& rho0, const AtomFieldParams& p, const FieldFn& e_p,
                         const FieldFn& e_c, double dt, double t_end,
                         const EvolveOptions& opt = {}) {
    p.validate();
    check_step_size(dt, p);
    validate_density(rho0, DensityTolerances{1e-9, 1e-12, 1e-8});
    DenormalFlushGuard fp_mode;

    const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    const std::size_t stride = std::max<std::size_t>(1, opt.sample_stride);

    Trajectory traj;
    traj.times.reserve(n_steps / stride + 2);
    traj.states.reserve(n_steps / stride + 2);

    auto record = [&](double t, const Matrix4& rho) {
        if (opt.check_invariants) {
            try {
                validate_density(rho, opt.tolerances);
            } catch (const physics_error& e) {
                std::ostringstream msg;
                msg << "evolve: invariant violated at t = " << t << " s: " << e.what();
                throw physics_error(msg.str());
            }
        }
        traj.times.push_back(t);
        traj.states.push_back(rho);
    };

    Matrix4 rho = rho0;
    record(0.0, rho);
    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        rho = rk4_step(rho, p, e_p, e_c, t, dt);
        if ((n + 1) % stride == 0 || n + 1 == n_steps)
            record(static_cast<double>(n + 1) * dt, rho);
    }
    return traj;
}

} // namespace vapormem::quantum
