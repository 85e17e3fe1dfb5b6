// spectral.hpp — Spectral curves, room-temperature broadening, etalon filtering
//
// Curves are uniformly sampled real functions of the one-photon detuning
// (Hz). Broadening is the discrete convolution of a curve with the combined
// velocity/pressure distribution; the etalon stack and the cell transmission
// weight the result into the quantities used by the SBR analysis.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vapormem/errors.hpp"
#include "vapormem/units.hpp"

namespace vapormem::spectral {

// --------------------------------- curves -----------------------------------

struct SpectralCurve {
    double delta0 = 0.0;     // grid origin (Hz)
    double delta_step = 0.0; // grid spacing (Hz)
    std::vector<double> values;

    SpectralCurve() = default;
    SpectralCurve(double origin, double step, std::vector<double> v)
        : delta0(origin), delta_step(step), values(std::move(v)) {
        validate();
    }

    std::size_t size() const { return values.size(); }
    double delta_at(std::size_t i) const { return delta0 + static_cast<double>(i) * delta_step; }
    double delta_end() const { return delta_at(size() - 1); }

    void validate() const {
        if (values.empty()) throw physics_error("SpectralCurve: empty grid");
        if (!(delta_step > 0.0)) throw physics_error("SpectralCurve: delta_step must be > 0");
        for (double v : values)
            if (!std::isfinite(v)) throw physics_error("SpectralCurve: non-finite sample");
    }
};

inline double curve_max(const SpectralCurve& c) {
    return *std::max_element(c.values.begin(), c.values.end());
}

inline double curve_integral(const SpectralCurve& c) {
    double s = 0.0;
    for (double v : c.values) s += v;
    return s * c.delta_step;
}

// Index of the curve maximum; ties resolved toward the smallest |delta|.
inline std::size_t curve_argmax(const SpectralCurve& c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
        const double v = c.values[i];
        const double b = c.values[best];
        if (v > b || (v == b && std::abs(c.delta_at(i)) < std::abs(c.delta_at(best))))
            best = i;
    }
    return best;
}

// Full width at half maximum by linear interpolation of the half crossings on
// either side of the peak. Throws when a crossing is not bracketed by the grid.
inline double curve_fwhm(const SpectralCurve& c) {
    const std::size_t p = curve_argmax(c);
    const double half = 0.5 * c.values[p];

    auto cross = [&](std::ptrdiff_t dir) -> double {
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(p);
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(c.size());
        while (i + dir >= 0 && i + dir < n) {
            const double a = c.values[static_cast<std::size_t>(i)];
            const double b = c.values[static_cast<std::size_t>(i + dir)];
            if (a >= half && b < half) {
                const double frac = (a - half) / (a - b);
                return c.delta_at(static_cast<std::size_t>(i)) +
                       static_cast<double>(dir) * frac * c.delta_step;
            }
            i += dir;
        }
        throw physics_error("curve_fwhm: half-maximum not bracketed by grid");
    };

    return cross(+1) - cross(-1);
}

// --------------------------- velocity distribution --------------------------

// Combined Doppler/pressure profile. The width parameter is chosen so the
// profile falls to half its peak at delta = w_d/2.
struct VelocityDistribution {
    double w_d = 960.0e6; // Hz

    void validate() const {
        if (!(w_d > 0.0)) throw physics_error("VelocityDistribution: w_d must be > 0");
    }
};

// Unnormalized weight (1/Hz) of the velocity class detuned by `delta`.
inline double velocity_weight(double delta, const VelocityDistribution& dist) {
    dist.validate();
    const double peak = std::sqrt(std::numbers::ln2) / (dist.w_d * std::sqrt(std::numbers::pi));
    const double q = 2.0 * delta / dist.w_d;
    return peak / (1.0 + q * q);
}

// ------------------------------- broadening ---------------------------------

enum class Padding { zero, periodic };

// Discrete convolution with the velocity distribution over a window of
// 2*i_max+1 bins. Weights are normalized to unit sum so a constant curve is a
// fixed point; samples beyond the grid are zero by default (periodic
// extension is a test mode).
inline SpectralCurve broaden(const SpectralCurve& curve, const VelocityDistribution& dist,
                             std::size_t i_max, Padding padding = Padding::zero) {
    curve.validate();
    dist.validate();
    const double window = static_cast<double>(i_max) * curve.delta_step;
    if (window < 3.0 * dist.w_d)
        throw physics_error("broaden: window too small, need i_max*delta_step >= 3*w_d");

    std::vector<double> w(2 * i_max + 1);
    double wsum = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double di = (static_cast<double>(k) - static_cast<double>(i_max)) * curve.delta_step;
        w[k] = velocity_weight(di, dist);
        wsum += w[k];
    }
    for (double& x : w) x /= wsum;

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(curve.size());
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(i_max);
    std::vector<double> out(curve.size(), 0.0);
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -m; i <= m; ++i) {
            std::ptrdiff_t idx = j + i;
            if (padding == Padding::periodic) {
                idx %= n;
                if (idx < 0) idx += n;
            } else if (idx < 0 || idx >= n) {
                continue;
            }
            acc += w[static_cast<std::size_t>(i + m)] * curve.values[static_cast<std::size_t>(idx)];
        }
        out[static_cast<std::size_t>(j)] = acc;
    }
    return SpectralCurve(curve.delta0, curve.delta_step, std::move(out));
}

// ---------------------------- manifold composition --------------------------

// Pointwise sum of the responses of the two excited states: the second curve
// is shifted up by `splitting` (which must be an integer number of bins) and
// scaled by `weight2`. Samples shifted off the grid are dropped; samples with
// no shifted partner keep the first curve alone.
inline SpectralCurve manifold_compose(const SpectralCurve& curve_f1, const SpectralCurve& curve_f2,
                                      double splitting, double weight2 = 1.0) {
    curve_f1.validate();
    curve_f2.validate();
    if (curve_f1.delta_step != curve_f2.delta_step || curve_f1.delta0 != curve_f2.delta0 ||
        curve_f1.size() != curve_f2.size())
        throw physics_error("manifold_compose: curves must share one grid");

    const double bins = splitting / curve_f1.delta_step;
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(std::llround(bins));
    if (std::abs(bins - static_cast<double>(k)) > 1e-9 * std::max(1.0, std::abs(bins)))
        throw physics_error("manifold_compose: splitting is not grid-aligned");

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(curve_f1.size());
    std::vector<double> out(curve_f1.values);
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        const std::ptrdiff_t src = j - k;
        if (src >= 0 && src < n)
            out[static_cast<std::size_t>(j)] += weight2 * curve_f2.values[static_cast<std::size_t>(src)];
    }
    return SpectralCurve(curve_f1.delta0, curve_f1.delta_step, std::move(out));
}

// --------------------------------- etalons ----------------------------------

struct EtalonParams {
    double r = 0.9955;           // mirror reflectivity
    double a = 2.0e-4;           // loss
    double fsr = 13.6e9;         // free spectral range (Hz)
    double detuning_offset = 0.0; // transmission-peak position (Hz)

    void validate() const {
        if (!(r > 0.0 && r < 1.0)) throw physics_error("EtalonParams: need 0 < r < 1");
        if (!(a >= 0.0 && a < 1.0)) throw physics_error("EtalonParams: need 0 <= a < 1");
        if (!(fsr > 0.0)) throw physics_error("EtalonParams: need fsr > 0");
    }
};

// Airy transmission, normalized so the on-peak value is (1-A)^2. The phase is
// reduced modulo the FSR before entering the sine, which keeps the comb
// exactly periodic in floating point; 1 + R^2 - 2R cos(phi) is evaluated as
// (1-R)^2 + 4R sin^2(phi/2) to avoid cancellation near the peak.
inline double etalon_transmission(double delta, const EtalonParams& etalon) {
    etalon.validate();
    double r = std::fmod(delta - etalon.detuning_offset, etalon.fsr);
    if (r < 0.0) r += etalon.fsr;
    const double s = std::sin(std::numbers::pi * r / etalon.fsr);
    const double denom = sqr(1.0 - etalon.r) + 4.0 * etalon.r * s * s;
    const double num = sqr((1.0 - etalon.r) * (1.0 - etalon.a));
    return num / denom;
}

inline double cascade_transmission(const std::vector<EtalonParams>& etalons, double delta) {
    if (etalons.empty()) throw physics_error("cascade_transmission: empty etalon list");
    double t = 1.0;
    for (const auto& e : etalons) t *= etalon_transmission(delta, e);
    return t;
}

// ----------------------------- background filtering -------------------------

struct FilteredBackground {
    double scatter = 0.0;
    double stokes = 0.0;
    double total = 0.0;
};

// Photon count behind the etalon stack when the stack is shifted by
// `etalon_scan_offset`. Each component is summed over its own grid, so the
// Stokes curve must already carry its +13.6 GHz offset in delta0.
inline FilteredBackground filter_background(const SpectralCurve& q_scatter,
                                            const SpectralCurve& q_stokes,
                                            const std::vector<EtalonParams>& cascade,
                                            double etalon_scan_offset) {
    q_scatter.validate();
    q_stokes.validate();
    if (cascade.empty()) throw physics_error("filter_background: empty etalon list");

    double fsr_max = 0.0;
    for (const auto& e : cascade) fsr_max = std::max(fsr_max, e.fsr);
    const double lo = std::min(q_scatter.delta0, q_stokes.delta0) - fsr_max;
    const double hi = std::max(q_scatter.delta_end(), q_stokes.delta_end()) + fsr_max;
    if (etalon_scan_offset < lo || etalon_scan_offset > hi)
        throw physics_error("filter_background: scan offset outside covered grid");

    auto pass = [&](const SpectralCurve& q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            acc += cascade_transmission(cascade, q.delta_at(i) - etalon_scan_offset) * q.values[i];
        return acc;
    };

    FilteredBackground out;
    out.scatter = pass(q_scatter);
    out.stokes = pass(q_stokes);
    out.total = out.scatter + out.stokes;
    return out;
}

// ----------------------------- cell transmission ----------------------------

struct AbsorptionLine {
    double od = 0.0;        // peak optical depth
    double center = 0.0;    // Hz
    double width = 960.0e6; // half-maximum at center +- width/2 (Hz)
};

struct TransmissionModel {
    std::vector<AbsorptionLine> lines;
};

inline double transmission_at(double delta, const TransmissionModel& model) {
    double od = 0.0;
    for (const auto& line : model.lines) {
        if (!(line.width > 0.0)) throw physics_error("TransmissionModel: line width must be > 0");
        const double q = 2.0 * (delta - line.center) / line.width;
        od += line.od / (1.0 + q * q);
    }
    return std::exp(-od);
}

inline SpectralCurve medium_transmission(double delta0, double delta_step, std::size_t count,
                                         const TransmissionModel& model) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = transmission_at(delta0 + static_cast<double>(i) * delta_step, model);
    return SpectralCurve(delta0, delta_step, std::move(v));
}

// Measured profile: two-column text (delta in Hz, transmission in [0,1]),
// '#' comments, strictly increasing delta.
using TransmissionTable = std::vector<std::pair<double, double>>;

inline TransmissionTable load_transmission_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open transmission table: " + path);

    TransmissionTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        double d, t;
        if (!(ss >> d)) continue; // blank or comment-only line
        if (!(ss >> t))
            throw io_error(path + ":" + std::to_string(lineno) + ": expected two columns");
        if (!(t >= 0.0 && t <= 1.0))
            throw io_error(path + ":" + std::to_string(lineno) + ": transmission outside [0,1]");
        if (!table.empty() && d <= table.back().first)
            throw io_error(path + ":" + std::to_string(lineno) + ": delta not strictly increasing");
        table.emplace_back(d, t);
    }
    if (table.size() < 2) throw io_error(path + ": need at least two table rows");
    return table;
}

inline SpectralCurve sample_transmission_table(const TransmissionTable& table, double delta0,
                                               double delta_step, std::size_t count) {
    if (table.size() < 2) throw physics_error("transmission table: need at least two rows");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double d = delta0 + static_cast<double>(i) * delta_step;
        if (d < table.front().first || d > table.back().first)
            throw physics_error("transmission table does not cover requested grid");
        auto it = std::lower_bound(table.begin(), table.end(), d,
                                   [](const auto& row, double x) { return row.first < x; });
        if (it == table.begin()) {
            v[i] = it->second;
            continue;
        }
        const auto& [d1, t1] = *(it - 1);
        const auto& [d2, t2] = *it;
        const double frac = (d - d1) / (d2 - d1);
        v[i] = t1 + frac * (t2 - t1);
    }
    return SpectralCurve(delta0, delta_step, std::move(v));
}

} // namespace vapormem::spectral
