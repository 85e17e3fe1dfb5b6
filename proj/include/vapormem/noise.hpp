// noise.hpp — SBR curves, polarization-qubit fidelity, classical thresholds
//
// Everything here is pure arithmetic over immutable inputs: the SBR ratio and
// its optimum, the Stokes-vector fidelity formula, frame alignment between
// input and retrieved polarization states, the SBR-to-fidelity mixing model,
// and the storage-lifetime fit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "vapormem/errors.hpp"
#include "vapormem/spectral.hpp"

namespace vapormem::noise {

// --------------------------------- SBR --------------------------------------

struct SbrReport {
    spectral::SpectralCurve sbr_curve;
    double optimal_delta = 0.0; // Hz
    double sbr_at_optimum = 0.0;
};

// Pointwise (eta * T) / (Q + floor) on a shared grid. The floor models the
// technical background that never vanishes in the measured counts.
inline SbrReport sbr_curve(const spectral::SpectralCurve& eta_rt,
                           const spectral::SpectralCurve& t_rt,
                           const spectral::SpectralCurve& q_rt, double floor) {
    eta_rt.validate();
    t_rt.validate();
    q_rt.validate();
    if (eta_rt.size() != t_rt.size() || eta_rt.size() != q_rt.size() ||
        eta_rt.delta0 != t_rt.delta0 || eta_rt.delta0 != q_rt.delta0 ||
        eta_rt.delta_step != t_rt.delta_step || eta_rt.delta_step != q_rt.delta_step)
        throw physics_error("sbr_curve: curves must share one grid");

    std::vector<double> values(eta_rt.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double denom = q_rt.values[i] + floor;
        if (!(denom > 0.0))
            throw physics_error("sbr_curve: nonpositive background at delta = " +
                                std::to_string(q_rt.delta_at(i)) + " Hz");
        values[i] = eta_rt.values[i] * t_rt.values[i] / denom;
    }

    SbrReport report;
    report.sbr_curve = spectral::SpectralCurve(eta_rt.delta0, eta_rt.delta_step, std::move(values));
    const std::size_t best = spectral::curve_argmax(report.sbr_curve);
    report.optimal_delta = report.sbr_curve.delta_at(best);
    report.sbr_at_optimum = report.sbr_curve.values[best];
    return report;
}

// ----------------------------- Stokes vectors -------------------------------

struct StokesVector {
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;

    double norm2() const { return s1 * s1 + s2 * s2 + s3 * s3; }
    double dot(const StokesVector& o) const { return s1 * o.s1 + s2 * o.s2 + s3 * o.s3; }

    void validate() const {
        if (norm2() > 1.0 + 1e-9)
            throw physics_error("StokesVector: norm exceeds 1");
    }

    Eigen::Vector3d vec() const { return {s1, s2, s3}; }
    static StokesVector from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

// F = (1 + S_out . S_in + sqrt((1 - |S_out|^2)(1 - |S_in|^2))) / 2
inline double fidelity(const StokesVector& s_in, const StokesVector& s_out) {
    s_in.validate();
    s_out.validate();
    const double mixed = std::sqrt(std::max(0.0, 1.0 - s_out.norm2()) *
                                   std::max(0.0, 1.0 - s_in.norm2()));
    const double f = 0.5 * (1.0 + s_out.dot(s_in) + mixed);
    return std::clamp(f, 0.0, 1.0);
}

// ----------------------------- frame alignment ------------------------------

struct AlignResult {
    Eigen::Matrix3d rotation; // proper rotation applied to the inputs
    std::vector<StokesVector> aligned_inputs;
    double mean_fidelity = 0.0;
};

// Least-squares orientation fit: the proper rotation R maximizing
// sum_i S_out_i . (R S_in_i), recovered from the SVD of the cross-covariance.
inline AlignResult align_frames(const std::vector<StokesVector>& inputs,
                                const std::vector<StokesVector>& outputs) {
    if (inputs.size() != outputs.size())
        throw physics_error("align_frames: input/output count mismatch");
    if (inputs.size() < 3)
        throw physics_error("align_frames: need at least 3 state pairs");
    for (const auto& s : inputs) s.validate();
    for (const auto& s : outputs) s.validate();

    Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < inputs.size(); ++i)
        b += outputs[i].vec() * inputs[i].vec().transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(1) < 1e-12 * std::max(1.0, sv(0)))
        throw physics_error("align_frames: degenerate span, inputs are collinear");

    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    AlignResult result;
    result.rotation = svd.matrixU() * d * svd.matrixV().transpose();

    result.aligned_inputs.reserve(inputs.size());
    double fsum = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto rotated = StokesVector::from(result.rotation * inputs[i].vec());
        result.aligned_inputs.push_back(rotated);
        fsum += fidelity(rotated, outputs[i]);
    }
    result.mean_fidelity = fsum / static_cast<double>(inputs.size());
    return result;
}

// --------------------------- SBR-to-fidelity model ---------------------------

// Unpolarized-background mixing: a fraction sbr/(sbr+1) of the counts carries
// the stored qubit at intrinsic fidelity f0, the rest is fully mixed.
inline double sbr_to_fidelity(double sbr, double intrinsic_fidelity = 1.0) {
    if (!(sbr >= 0.0)) throw physics_error("sbr_to_fidelity: sbr must be >= 0");
    if (!(intrinsic_fidelity >= 0.5 && intrinsic_fidelity <= 1.0))
        throw physics_error("sbr_to_fidelity: intrinsic fidelity must be in [0.5, 1]");
    return (sbr * intrinsic_fidelity + 0.5) / (sbr + 1.0);
}

// ---------------------------- classical thresholds ---------------------------

struct ClassicalThresholds {
    double intercept_resend = 0.0;
    double nonunitary = 0.0;
};

// Fidelity bounds a classical memory could fake. Only the operating point
// quoted for attenuated coherent states, <n> = 1 and eta = 5%, is tabulated;
// the general formula lives in the cited literature, not here.
inline ClassicalThresholds classical_thresholds(double mean_photons, double efficiency) {
    const bool supported =
        std::abs(mean_photons - 1.0) < 1e-12 && std::abs(efficiency - 0.05) < 1e-12;
    if (!supported)
        throw physics_error("classical_thresholds: only <n> = 1, eta = 0.05 is tabulated; "
                            "see the referenced bound for other operating points");
    return {0.71, 0.836};
}

struct FidelityReport {
    double fidelity = 0.0;
    double qber = 0.0;
    double vs_intercept_resend = 0.0;
    double vs_nonunitary_bound = 0.0;
};

inline FidelityReport make_fidelity_report(double f, const ClassicalThresholds& thresholds) {
    if (!(f >= 0.0 && f <= 1.0)) throw physics_error("fidelity must be in [0,1]");
    FidelityReport r;
    r.fidelity = f;
    r.qber = 1.0 - f;
    r.vs_intercept_resend = f - thresholds.intercept_resend;
    r.vs_nonunitary_bound = f - thresholds.nonunitary;
    return r;
}

// ------------------------------- lifetime fit -------------------------------

struct LifetimePoint {
    double storage_time = 0.0; // s
    double efficiency = 0.0;
};

struct LifetimeFit {
    double eta0 = 0.0;
    double tau_c = 0.0; // s
    std::vector<double> residuals; // log-space residuals per point
};

// Least squares of ln(eta) = ln(eta0) - tau/tau_c.
inline LifetimeFit lifetime_fit(const std::vector<LifetimePoint>& points) {
    if (points.size() < 2) throw physics_error("lifetime_fit: need at least 2 points");
    for (const auto& pt : points)
        if (!(pt.efficiency > 0.0))
            throw physics_error("lifetime_fit: efficiencies must be > 0");

    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& pt : points) {
        sx += pt.storage_time;
        sy += std::log(pt.efficiency);
    }
    const double mx = sx / n, my = sy / n;

    double sxx = 0.0, sxy = 0.0;
    for (const auto& pt : points) {
        const double dx = pt.storage_time - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(pt.efficiency) - my);
    }
    if (!(sxx > 0.0)) throw physics_error("lifetime_fit: degenerate storage times");

    const double slope = sxy / sxx;
    if (!(slope < 0.0)) throw physics_error("lifetime_fit: efficiencies do not decay");

    LifetimeFit fit;
    fit.tau_c = -1.0 / slope;
    fit.eta0 = std::exp(my - slope * mx);
    fit.residuals.reserve(points.size());
    for (const auto& pt : points)
        fit.residuals.push_back(std::log(pt.efficiency) -
                                (std::log(fit.eta0) + slope * pt.storage_time));
    return fit;
}

} // namespace vapormem::noise
