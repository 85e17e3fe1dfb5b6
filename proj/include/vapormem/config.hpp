// config.hpp — Strict key-value configuration, calibration file, defaults
//
// Scenario files and the calibration file share one line-oriented format:
// `key = value`, '#' comments, and a closed key registry. Unknown keys are
// fatal and answered with the nearest registered key, so a typo can never
// silently fall back to a default. Every resolved value remembers where it
// came from (default, calibration file, scenario file, CLI override).

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vapormem/errors.hpp"
#include "vapormem/noise.hpp"
#include "vapormem/propagation.hpp"
#include "vapormem/pulse.hpp"
#include "vapormem/quantum.hpp"
#include "vapormem/spectral.hpp"
#include "vapormem/units.hpp"

namespace vapormem::harness {

enum class KeyKind { real, integer, boolean, text };

enum class Provenance { fallback, calibration, file, override_flag };

struct KeySpec {
    KeyKind kind;
    std::string fallback;    // canonical default value
    bool calibratable;       // belongs in the calibration file
    std::string description;
};

// ------------------------------- key registry -------------------------------

inline const std::map<std::string, KeySpec>& key_registry() {
    static const std::map<std::string, KeySpec> registry = {
        // scenario-level
        {"scenario", {KeyKind::text, "efficiency-sweep", false,
                      "efficiency-sweep | background-sweep | sbr-sweep | etalon-scan | "
                      "qubit-fidelity | lifetime-fit"}},
        {"grid.min_hz", {KeyKind::real, "-2.0e9", false, "detuning grid start"}},
        {"grid.max_hz", {KeyKind::real, "1.975e9", false, "detuning grid end (inclusive)"}},
        {"grid.step_hz", {KeyKind::real, "25.0e6", false, "detuning grid step"}},
        {"output", {KeyKind::text, "out", false, "output directory"}},
        {"format", {KeyKind::text, "csv", false, "csv | json"}},
        {"jobs", {KeyKind::integer, "1", false, "worker threads over grid points"}},
        {"seed", {KeyKind::integer, "1", false, "seed for noise-injection scenarios"}},
        {"calibration", {KeyKind::text, "", false, "calibration file path (empty = built-in)"}},

        // atom-field parameters (Hz-facing)
        {"physics.delta13_hz", {KeyKind::real, "0.0", true, "probe lock offset"}},
        {"physics.delta23_hz", {KeyKind::real, "0.0", true, "control lock offset"}},
        {"physics.delta_hz", {KeyKind::real, "0.0", true, "common laser detuning"}},
        {"physics.omega_p_hz", {KeyKind::real, "300.0", true, "probe coupling per unit field"}},
        {"physics.omega_c_hz", {KeyKind::real, "5.5e6", true, "control coupling per unit field"}},
        {"physics.alpha_hz", {KeyKind::real, "6.8e8", true, "virtual-state coupling strength"}},
        {"physics.omega43_hz", {KeyKind::real, "13.6e9", true, "virtual-state splitting"}},
        {"physics.gamma31_hz", {KeyKind::real, "3.0e6", true, "excited decay to |1>"}},
        {"physics.gamma32_hz", {KeyKind::real, "3.0e6", true, "excited decay to |2>"}},
        {"physics.gamma41_hz", {KeyKind::real, "1.0e9", true, "virtual decay to |1>"}},
        {"physics.gamma42_hz", {KeyKind::real, "1.0e9", true, "virtual decay to |2>"}},
        {"physics.gamma12_hz", {KeyKind::real, "100.0", true, "ground-state decoherence"}},
        {"physics.gamma12_symmetric",
         {KeyKind::boolean, "false", true, "add the balanced |2>->|1> exchange term"}},
        {"physics.denom_epsilon",
         {KeyKind::real, "1.0e-6", true, "degenerate-denominator guard, relative to omega43"}},

        // medium
        {"medium.n_slices", {KeyKind::integer, "20", true, "z discretization"}},
        {"medium.length_m", {KeyKind::real, "0.075", true, "cell length"}},
        {"medium.atom_number", {KeyKind::real, "2.4e11", true, "effective coupling count N"}},

        // storage protocol
        {"protocol.dt_s", {KeyKind::real, "1.0e-11", true, "integrator step"}},
        {"protocol.t_end_s", {KeyKind::real, "2.0e-6", true, "simulated span"}},
        {"protocol.probe_fwhm_s", {KeyKind::real, "400.0e-9", true, "probe pulse width"}},
        {"protocol.probe_center_s", {KeyKind::real, "500.0e-9", true, "probe pulse center"}},
        {"protocol.probe_photons", {KeyKind::real, "1.0", true, "mean photon number <n>"}},
        {"protocol.write_off_s", {KeyKind::real, "850.0e-9", true, "control switch-off"}},
        {"protocol.retrieve_on_s", {KeyKind::real, "1.55e-6", true, "control switch-on"}},
        {"protocol.edge_s", {KeyKind::real, "50.0e-9", true, "control switching edge"}},
        {"protocol.control_amplitude", {KeyKind::real, "1.0", true, "control field amplitude"}},
        {"protocol.roi_s", {KeyKind::real, "400.0e-9", true, "retrieval region of interest"}},

        // room-temperature composition
        {"spectral.w_d_hz", {KeyKind::real, "960.0e6", true, "velocity distribution width"}},
        {"spectral.line2_split_hz",
         {KeyKind::real, "814.5e6", true, "second excited-state splitting"}},
        {"spectral.line2_weight_eta",
         {KeyKind::real, "0.4", true, "second-line weight in the efficiency manifold"}},
        {"spectral.line2_weight_q",
         {KeyKind::real, "1.0", true, "second-line weight in the background manifold"}},
        {"spectral.window_factor",
         {KeyKind::real, "3.2", true, "broadening window half-width in units of w_d"}},

        // cell transmission model
        {"trt.od1", {KeyKind::real, "2.4", true, "optical depth of the lower line"}},
        {"trt.od2", {KeyKind::real, "3.4", true, "optical depth of the upper line"}},
        {"trt.center1_hz", {KeyKind::real, "0.0", true, "lower line center"}},
        {"trt.center2_hz", {KeyKind::real, "814.5e6", true, "upper line center"}},
        {"trt.width_hz", {KeyKind::real, "960.0e6", true, "absorption line width"}},
        {"trt.table", {KeyKind::text, "", true, "measured transmission table (empty = model)"}},

        // etalon stack
        {"etalon1.r", {KeyKind::real, "0.9955", true, "reflectivity"}},
        {"etalon1.a", {KeyKind::real, "2.0e-4", true, "loss"}},
        {"etalon1.fsr_hz", {KeyKind::real, "13.6e9", true, "free spectral range"}},
        {"etalon1.offset_hz", {KeyKind::real, "0.0", true, "transmission-peak offset"}},
        {"etalon2.r", {KeyKind::real, "0.9955", true, "reflectivity"}},
        {"etalon2.a", {KeyKind::real, "2.0e-4", true, "loss"}},
        {"etalon2.fsr_hz", {KeyKind::real, "13.6e9", true, "free spectral range"}},
        {"etalon2.offset_hz", {KeyKind::real, "0.0", true, "transmission-peak offset"}},

        // background bookkeeping
        {"background.scatter_collection",
         {KeyKind::real, "1.2e-13", true, "scattering-to-detected-photons factor"}},
        {"background.stokes_scale",
         {KeyKind::real, "1.0", true, "Stokes coupling relative to the probe"}},
        {"background.stokes_offset_hz",
         {KeyKind::real, "13.6e9", true, "Stokes carrier offset from the probe"}},
        {"background.fast_path",
         {KeyKind::boolean, "true", true, "single-slice shortcut for probe-free runs"}},

        // SBR composition
        {"sbr.floor_frac",
         {KeyKind::real, "0.10", true, "technical floor as a fraction of on-resonance Q"}},
        {"sbr.dual_rail", {KeyKind::boolean, "false", true, "double the background (two rails)"}},

        // qubit-fidelity scenario
        {"qubit.sbr", {KeyKind::real, "5.8", false, "single-rail signal-to-background ratio"}},
        {"qubit.dual_rail", {KeyKind::boolean, "true", false, "halve the SBR for two rails"}},
        {"qubit.intrinsic_fidelity", {KeyKind::real, "1.0", false, "background-free fidelity"}},
        {"qubit.rotation_z_deg", {KeyKind::real, "12.0", false, "channel rotation about S3"}},
        {"qubit.rotation_x_deg", {KeyKind::real, "7.0", false, "channel rotation about S1"}},
        {"qubit.noise_sigma", {KeyKind::real, "0.0", false, "Stokes-vector noise (seeded)"}},
        {"qubit.mean_photons", {KeyKind::real, "1.0", false, "<n> for the classical bounds"}},
        {"qubit.efficiency", {KeyKind::real, "0.05", false, "eta for the classical bounds"}},

        // lifetime-fit scenario
        {"lifetime.points",
         {KeyKind::text, "1.0e-6:0.11,14.0e-6:0.056,28.0e-6:0.031,42.0e-6:0.011", false,
          "comma list of storage_time_s:efficiency"}},

        // calibration metadata
        {"calibration.version", {KeyKind::text, "builtin-1", true, "calibration identity"}},
        {"calibration.description",
         {KeyKind::text, "default operating point", true, "free-form note"}},
    };
    return registry;
}

// ------------------------------ value parsing -------------------------------

namespace detail_cfg {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string nearest_key(std::string_view key) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& [name, spec] : key_registry()) {
        std::size_t d = edit_distance(key, name);
        const auto dot = name.rfind('.');
        if (dot != std::string::npos) // a bare leaf name is a near miss too
            d = std::min(d, edit_distance(key, std::string_view(name).substr(dot + 1)));
        if (d < best_d) {
            best_d = d;
            best = name;
        }
    }
    return best;
}

inline double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        if (!std::isfinite(x)) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw config_error(key + ": cannot parse '" + value + "' as a real number");
    }
}

inline long long parse_integer(const std::string& key, const std::string& value) {
    long long x = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
    if (ec != std::errc() || p != value.data() + value.size())
        throw config_error(key + ": cannot parse '" + value + "' as an integer");
    return x;
}

inline bool parse_boolean(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw config_error(key + ": cannot parse '" + value + "' as a boolean");
}

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail_cfg

// ------------------------------ scenario config -----------------------------

class ScenarioConfig {
public:
    ScenarioConfig() {
        for (const auto& [key, spec] : key_registry()) {
            values_[key] = spec.fallback;
            provenance_[key] = Provenance::fallback;
        }
    }

    void set(const std::string& key, const std::string& raw_value, Provenance from) {
        const auto it = key_registry().find(key);
        if (it == key_registry().end())
            throw config_error("unknown key '" + key + "' (did you mean '" +
                               detail_cfg::nearest_key(key) + "'?)");
        const std::string value = detail_cfg::trim(raw_value);
        switch (it->second.kind) { // parse once to reject bad values early
        case KeyKind::real: detail_cfg::parse_real(key, value); break;
        case KeyKind::integer: detail_cfg::parse_integer(key, value); break;
        case KeyKind::boolean: detail_cfg::parse_boolean(key, value); break;
        case KeyKind::text: break;
        }
        values_[key] = value;
        provenance_[key] = from;
    }

    double real(const std::string& key) const { return detail_cfg::parse_real(key, at(key)); }
    long long integer(const std::string& key) const {
        return detail_cfg::parse_integer(key, at(key));
    }
    bool boolean(const std::string& key) const { return detail_cfg::parse_boolean(key, at(key)); }
    const std::string& text(const std::string& key) const { return at(key); }

    Provenance provenance(const std::string& key) const { return provenance_.at(key); }

    const std::map<std::string, std::string>& all() const { return values_; }

    // Canonical text form; reloading it reproduces the config exactly.
    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
        return out.str();
    }

    bool operator==(const ScenarioConfig& other) const { return values_ == other.values_; }

    void validate() const {
        const std::string& scenario = text("scenario");
        static const std::vector<std::string> known = {"efficiency-sweep", "background-sweep",
                                                       "sbr-sweep",        "etalon-scan",
                                                       "qubit-fidelity",   "lifetime-fit"};
        if (std::find(known.begin(), known.end(), scenario) == known.end())
            throw config_error("scenario: unknown kind '" + scenario + "'");

        if (!(real("grid.step_hz") > 0.0)) throw config_error("grid.step_hz: must be > 0");
        if (!(real("grid.min_hz") < real("grid.max_hz")))
            throw config_error("grid.min_hz: must be below grid.max_hz");
        if (integer("jobs") < 1) throw config_error("jobs: must be >= 1");
        if (integer("medium.n_slices") < 1) throw config_error("medium.n_slices: must be >= 1");
        const std::string& format = text("format");
        if (format != "csv" && format != "json")
            throw config_error("format: expected csv or json, got '" + format + "'");
        for (const char* key : {"physics.gamma31_hz", "physics.gamma32_hz", "physics.gamma41_hz",
                                "physics.gamma42_hz", "physics.gamma12_hz"})
            if (real(key) < 0.0) throw config_error(std::string(key) + ": must be >= 0");
        if (!(real("physics.omega43_hz") > 0.0))
            throw config_error("physics.omega43_hz: must be > 0");
        if (!(real("protocol.dt_s") > 0.0)) throw config_error("protocol.dt_s: must be > 0");
    }

private:
    const std::string& at(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw config_error("unknown key '" + key + "'");
        return it->second;
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, Provenance> provenance_;
};

// ------------------------------- file loading -------------------------------

namespace detail_cfg {

inline void apply_lines(ScenarioConfig& config, std::istream& in, const std::string& origin,
                        Provenance from, bool calibration_only) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
        try {
            if (calibration_only) {
                const auto it = key_registry().find(key);
                if (it != key_registry().end() && !it->second.calibratable)
                    throw config_error("key '" + key + "' does not belong in a calibration file");
            }
            config.set(key, value, from);
        } catch (const config_error& e) {
            throw config_error(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

} // namespace detail_cfg

struct CalibrationInfo {
    std::string version;
    std::string source; // "builtin" or the file path
    std::uint64_t hash = 0;
};

// Serialized calibration-eligible keys, used for the built-in hash and the
// `calibrate` subcommand.
inline std::string calibration_text(const ScenarioConfig& config) {
    std::ostringstream out;
    out << "# vapormem calibration file\n";
    out << "# paper-silent physics parameters live here; scenario files override them\n";
    for (const auto& [key, spec] : key_registry()) {
        if (!spec.calibratable) continue;
        out << key << " = " << config.all().at(key) << "  # " << spec.description << "\n";
    }
    return out.str();
}

inline CalibrationInfo apply_calibration(ScenarioConfig& config, const std::string& path) {
    CalibrationInfo info;
    if (path.empty()) {
        info.source = "builtin";
        info.version = config.text("calibration.version");
        info.hash = detail_cfg::fnv1a(calibration_text(config));
        return info;
    }
    std::ifstream in(path);
    if (!in) throw io_error("cannot open calibration file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    std::istringstream stream(bytes);
    detail_cfg::apply_lines(config, stream, path, Provenance::calibration, true);
    info.source = path;
    info.version = config.text("calibration.version");
    info.hash = detail_cfg::fnv1a(bytes);
    return info;
}

struct LoadedConfig {
    ScenarioConfig config;
    CalibrationInfo calibration;
};

// Precedence: built-in defaults < calibration file < scenario file < overrides.
inline LoadedConfig load_config(const std::string& path,
                                const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);

    // first pass just to find the calibration reference
    ScenarioConfig scan;
    detail_cfg::apply_lines(scan, in, path, Provenance::file, false);

    LoadedConfig loaded;
    loaded.calibration = apply_calibration(loaded.config, scan.text("calibration"));

    std::ifstream again(path);
    detail_cfg::apply_lines(loaded.config, again, path, Provenance::file, false);

    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw config_error("override '" + item + "': expected key=value");
        loaded.config.set(detail_cfg::trim(item.substr(0, eq)),
                          detail_cfg::trim(item.substr(eq + 1)), Provenance::override_flag);
    }

    loaded.config.validate();
    return loaded;
}

// --------------------------- typed physics builders --------------------------

inline quantum::AtomFieldParams make_params(const ScenarioConfig& c) {
    quantum::AtomFieldParams p;
    p.delta13 = rad_from_hz(c.real("physics.delta13_hz"));
    p.delta23 = rad_from_hz(c.real("physics.delta23_hz"));
    p.delta = rad_from_hz(c.real("physics.delta_hz"));
    p.omega_p = rad_from_hz(c.real("physics.omega_p_hz"));
    p.omega_c = rad_from_hz(c.real("physics.omega_c_hz"));
    p.alpha = rad_from_hz(c.real("physics.alpha_hz"));
    p.omega43 = rad_from_hz(c.real("physics.omega43_hz"));
    p.gamma31 = rad_from_hz(c.real("physics.gamma31_hz"));
    p.gamma32 = rad_from_hz(c.real("physics.gamma32_hz"));
    p.gamma41 = rad_from_hz(c.real("physics.gamma41_hz"));
    p.gamma42 = rad_from_hz(c.real("physics.gamma42_hz"));
    p.gamma12 = rad_from_hz(c.real("physics.gamma12_hz"));
    p.gamma12_symmetric = c.boolean("physics.gamma12_symmetric");
    p.denom_epsilon = c.real("physics.denom_epsilon");
    p.validate();
    return p;
}

inline mb::MediumGrid make_medium(const ScenarioConfig& c) {
    return mb::make_medium(static_cast<int>(c.integer("medium.n_slices")),
                           c.real("medium.length_m"), c.real("medium.atom_number"),
                           rad_from_hz(c.real("physics.omega_p_hz")));
}

inline mb::StorageProtocol make_protocol(const ScenarioConfig& c, bool with_probe) {
    mb::StorageProtocol proto;
    proto.probe_envelope = mb::gaussian_pulse(
        c.real("protocol.probe_fwhm_s"), c.real("protocol.probe_center_s"),
        with_probe ? c.real("protocol.probe_photons") : 0.0, c.real("protocol.dt_s"),
        c.real("protocol.t_end_s"));
    proto.control = mb::ControlTiming{c.real("protocol.write_off_s"),
                                      c.real("protocol.retrieve_on_s"), c.real("protocol.edge_s"),
                                      c.real("protocol.control_amplitude")};
    proto.retrieval_window = c.real("protocol.roi_s");
    proto.validate();
    return proto;
}

inline mb::PropagateOptions make_propagate_options(const ScenarioConfig& c) {
    mb::PropagateOptions opt;
    opt.scatter_collection = c.real("background.scatter_collection");
    opt.stokes_coupling_scale = c.real("background.stokes_scale");
    return opt;
}

inline spectral::VelocityDistribution make_velocity(const ScenarioConfig& c) {
    return spectral::VelocityDistribution{c.real("spectral.w_d_hz")};
}

inline std::vector<spectral::EtalonParams> make_cascade(const ScenarioConfig& c) {
    return {
        spectral::EtalonParams{c.real("etalon1.r"), c.real("etalon1.a"), c.real("etalon1.fsr_hz"),
                               c.real("etalon1.offset_hz")},
        spectral::EtalonParams{c.real("etalon2.r"), c.real("etalon2.a"), c.real("etalon2.fsr_hz"),
                               c.real("etalon2.offset_hz")},
    };
}

inline std::vector<noise::LifetimePoint> parse_lifetime_points(const std::string& text) {
    std::vector<noise::LifetimePoint> points;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw config_error("lifetime.points: expected time:efficiency, got '" + item + "'");
        points.push_back({detail_cfg::parse_real("lifetime.points", detail_cfg::trim(item.substr(0, colon))),
                          detail_cfg::parse_real("lifetime.points", detail_cfg::trim(item.substr(colon + 1)))});
    }
    if (points.empty()) throw config_error("lifetime.points: empty list");
    return points;
}

} // namespace vapormem::harness
