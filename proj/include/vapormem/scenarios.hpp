// scenarios.hpp — Sweep orchestration, composition pipelines, run manifest
//
// Every scenario maps a detuning (or etalon-offset) grid through the physics
// stack, merges rows in grid order regardless of the worker count, and writes
// CSV/JSON plus a manifest. Physics failures at single grid points do not
// abort the sweep: completed rows are flushed and the manifest carries a
// failure marker with the offending detunings.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "vapormem/config.hpp"
#include "vapormem/export.hpp"
#include "vapormem/noise.hpp"
#include "vapormem/parallel.hpp"
#include "vapormem/propagation.hpp"
#include "vapormem/version.hpp"

namespace vapormem::harness {

using nlohmann::ordered_json;

struct RunManifest {
    std::string status; // "ok" or "partial"
    ordered_json document;
    std::string manifest_path;
};

// ------------------------------ sweep machinery -----------------------------

struct SweepFailure {
    double delta_hz = 0.0;
    std::string message;
};

namespace detail_run {

inline mb::DetuningGrid make_grid(const ScenarioConfig& c) {
    mb::DetuningGrid grid;
    grid.min_hz = c.real("grid.min_hz");
    grid.step_hz = c.real("grid.step_hz");
    grid.count = static_cast<std::size_t>(
                     std::floor((c.real("grid.max_hz") - grid.min_hz) / grid.step_hz + 1e-9)) +
                 1;
    grid.validate();
    return grid;
}

// Runs fn(i) for every grid index, capturing physics failures per point.
template <typename Fn>
inline std::vector<SweepFailure> sweep(const mb::DetuningGrid& grid, unsigned jobs, Fn&& fn) {
    std::vector<std::optional<std::string>> errors(grid.count);
    detail::parallel_for_indexed(grid.count, jobs, [&](std::size_t i) {
        try {
            fn(i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    std::vector<SweepFailure> failures;
    for (std::size_t i = 0; i < grid.count; ++i)
        if (errors[i]) failures.push_back({grid.at(i), *errors[i]});
    return failures;
}

inline std::string hex64(std::uint64_t x) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(x));
    return buf;
}

// Splitting must land on the grid for the manifold composition; the harness
// rounds and records the rounding.
inline double grid_aligned_splitting(double splitting, double step, std::vector<std::string>& notes) {
    const double bins = std::round(splitting / step);
    const double used = bins * step;
    if (used != splitting) {
        std::ostringstream note;
        note << "line2 splitting rounded from " << splitting << " Hz to " << used
             << " Hz to align with the grid";
        notes.push_back(note.str());
    }
    return used;
}

inline std::size_t broaden_window(const ScenarioConfig& c) {
    return static_cast<std::size_t>(
        std::ceil(c.real("spectral.window_factor") * c.real("spectral.w_d_hz") /
                  c.real("grid.step_hz")));
}

inline spectral::SpectralCurve trt_curve(const ScenarioConfig& c, const mb::DetuningGrid& grid) {
    if (!c.text("trt.table").empty()) {
        const auto table = spectral::load_transmission_table(c.text("trt.table"));
        return spectral::sample_transmission_table(table, grid.min_hz, grid.step_hz, grid.count);
    }
    const spectral::TransmissionModel model{
        {{c.real("trt.od1"), c.real("trt.center1_hz"), c.real("trt.width_hz")},
         {c.real("trt.od2"), c.real("trt.center2_hz"), c.real("trt.width_hz")}}};
    return spectral::medium_transmission(grid.min_hz, grid.step_hz, grid.count, model);
}

// Portable seeded normal deviates (Box-Muller over mt19937_64), so noisy
// scenarios are byte-reproducible across standard libraries.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        spare_ = radius * std::sin(two_pi * u2);
        has_spare_ = true;
        return radius * std::cos(two_pi * u2);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace detail_run

// --------------------------- composition pipelines ---------------------------

struct EfficiencyPipeline {
    spectral::SpectralCurve eta_cold;
    spectral::SpectralCurve eta_rt;
    spectral::SpectralCurve t_rt;
    std::vector<SweepFailure> failures;
};

inline EfficiencyPipeline run_efficiency_pipeline(const ScenarioConfig& c,
                                                  const mb::DetuningGrid& grid, unsigned jobs,
                                                  std::vector<std::string>& notes) {
    const auto params = make_params(c);
    const auto medium = make_medium(c);
    const auto protocol = make_protocol(c, true);
    const auto opt = make_propagate_options(c);

    std::vector<double> eta(grid.count, 0.0);
    EfficiencyPipeline out;
    out.failures = detail_run::sweep(grid, jobs, [&](std::size_t i) {
        const auto p = mb::at_laser_detuning(params, rad_from_hz(grid.at(i)));
        eta[i] = mb::propagate(protocol, medium, p, opt).efficiency;
    });
    out.eta_cold = spectral::SpectralCurve(grid.min_hz, grid.step_hz, std::move(eta));
    if (!out.failures.empty()) return out;

    const double split = detail_run::grid_aligned_splitting(c.real("spectral.line2_split_hz"),
                                                            grid.step_hz, notes);
    const auto composed = spectral::manifold_compose(out.eta_cold, out.eta_cold, split,
                                                     c.real("spectral.line2_weight_eta"));
    out.eta_rt = spectral::broaden(composed, make_velocity(c), detail_run::broaden_window(c));
    out.t_rt = detail_run::trt_curve(c, grid);
    return out;
}

struct BackgroundPipeline {
    spectral::SpectralCurve scatter_cold, stokes_cold; // stokes carries its offset in delta0
    spectral::SpectralCurve scatter_rt, stokes_rt;
    std::vector<SweepFailure> failures;
};

inline BackgroundPipeline run_background_pipeline(const ScenarioConfig& c,
                                                  const mb::DetuningGrid& grid, unsigned jobs,
                                                  std::vector<std::string>& notes) {
    const auto params = make_params(c);
    const auto medium = make_medium(c);
    const auto protocol = make_protocol(c, false);

    mb::BackgroundScanOptions opt;
    opt.propagate = make_propagate_options(c);
    opt.stokes_offset_hz = c.real("background.stokes_offset_hz");
    opt.uniform_medium_fast_path = c.boolean("background.fast_path");

    std::vector<double> scatter(grid.count, 0.0), stokes(grid.count, 0.0);
    BackgroundPipeline out;
    out.failures = detail_run::sweep(grid, jobs, [&](std::size_t i) {
        const mb::DetuningGrid point{grid.at(i), grid.step_hz, 1};
        const auto curves =
            mb::background_emission_scan(point, protocol, medium, params, 1, opt);
        scatter[i] = curves.scatter.values[0];
        stokes[i] = curves.stokes.values[0];
    });
    out.scatter_cold = spectral::SpectralCurve(grid.min_hz, grid.step_hz, std::move(scatter));
    out.stokes_cold =
        spectral::SpectralCurve(grid.min_hz + opt.stokes_offset_hz, grid.step_hz, std::move(stokes));
    if (!out.failures.empty()) return out;

    const double split = detail_run::grid_aligned_splitting(c.real("spectral.line2_split_hz"),
                                                            grid.step_hz, notes);
    const double w2 = c.real("spectral.line2_weight_q");
    const auto dist = make_velocity(c);
    const auto window = detail_run::broaden_window(c);
    out.scatter_rt =
        spectral::broaden(spectral::manifold_compose(out.scatter_cold, out.scatter_cold, split, w2),
                          dist, window);
    out.stokes_rt =
        spectral::broaden(spectral::manifold_compose(out.stokes_cold, out.stokes_cold, split, w2),
                          dist, window);
    return out;
}

// -------------------------------- run_scenario ------------------------------

namespace detail_run {

inline void fill_failures(ordered_json& manifest, const std::vector<SweepFailure>& failures) {
    auto& list = manifest["failed_points"] = ordered_json::array();
    for (const auto& f : failures) list.push_back({{"delta_hz", f.delta_hz}, {"error", f.message}});
}

} // namespace detail_run

inline RunManifest run_scenario(const LoadedConfig& loaded) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig& c = loaded.config;
    c.validate();

    const std::string scenario = c.text("scenario");
    const auto jobs = static_cast<unsigned>(c.integer("jobs"));
    const std::string format = c.text("format");
    const std::filesystem::path outdir = c.text("output");
    std::filesystem::create_directories(outdir);

    std::vector<std::string> notes;
    std::vector<SweepFailure> failures;
    ResultTable table;
    ordered_json summary;

    const mb::DetuningGrid grid = detail_run::make_grid(c);

    if (scenario == "efficiency-sweep") {
        const auto pipe = run_efficiency_pipeline(c, grid, jobs, notes);
        failures = pipe.failures;
        if (failures.empty()) {
            table.columns = {"delta_hz", "eta_cold", "eta_rt", "t_rt", "eta_rt_x_t_rt"};
            for (std::size_t i = 0; i < grid.count; ++i)
                table.rows.push_back({grid.at(i), pipe.eta_cold.values[i], pipe.eta_rt.values[i],
                                      pipe.t_rt.values[i],
                                      pipe.eta_rt.values[i] * pipe.t_rt.values[i]});
            spectral::SpectralCurve product(grid.min_hz, grid.step_hz, std::vector<double>(grid.count));
            for (std::size_t i = 0; i < grid.count; ++i)
                product.values[i] = pipe.eta_rt.values[i] * pipe.t_rt.values[i];
            const std::size_t best = spectral::curve_argmax(product);
            summary["eta_cold_peak"] = spectral::curve_max(pipe.eta_cold);
            summary["eta_t_optimum_delta_hz"] = product.delta_at(best);
            summary["eta_t_optimum"] = product.values[best];
        } else {
            table.columns = {"delta_hz", "eta_cold"};
            for (std::size_t i = 0; i < grid.count; ++i)
                table.rows.push_back({grid.at(i), pipe.eta_cold.values[i]});
        }
    } else if (scenario == "background-sweep") {
        const auto pipe = run_background_pipeline(c, grid, jobs, notes);
        failures = pipe.failures;
        table.columns = {"delta_hz", "q_scatter_cold", "q_stokes_cold"};
        if (failures.empty()) {
            table.columns.insert(table.columns.end(),
                                 {"q_scatter_rt", "q_stokes_rt", "q_rt_total"});
            for (std::size_t i = 0; i < grid.count; ++i)
                table.rows.push_back({grid.at(i), pipe.scatter_cold.values[i],
                                      pipe.stokes_cold.values[i], pipe.scatter_rt.values[i],
                                      pipe.stokes_rt.values[i],
                                      pipe.scatter_rt.values[i] + pipe.stokes_rt.values[i]});
            summary["stokes_carrier_offset_hz"] = c.real("background.stokes_offset_hz");
        } else {
            for (std::size_t i = 0; i < grid.count; ++i)
                table.rows.push_back({grid.at(i), pipe.scatter_cold.values[i],
                                      pipe.stokes_cold.values[i]});
        }
    } else if (scenario == "sbr-sweep") {
        const auto eff = run_efficiency_pipeline(c, grid, jobs, notes);
        failures = eff.failures;
        BackgroundPipeline bg;
        if (failures.empty()) {
            bg = run_background_pipeline(c, grid, jobs, notes);
            failures = bg.failures;
        }
        if (failures.empty()) {
            const double rail = c.boolean("sbr.dual_rail") ? 2.0 : 1.0;
            spectral::SpectralCurve q_total(grid.min_hz, grid.step_hz,
                                            std::vector<double>(grid.count));
            spectral::SpectralCurve eta_t = q_total;
            for (std::size_t i = 0; i < grid.count; ++i) {
                q_total.values[i] = rail * (bg.scatter_rt.values[i] + bg.stokes_rt.values[i]);
                eta_t.values[i] = eff.eta_rt.values[i] * eff.t_rt.values[i];
            }
            // technical floor pinned to the modeled on-resonance background
            std::size_t i0 = 0;
            for (std::size_t i = 1; i < grid.count; ++i)
                if (std::abs(grid.at(i)) < std::abs(grid.at(i0))) i0 = i;
            const double floor = c.real("sbr.floor_frac") * q_total.values[i0];

            spectral::SpectralCurve ones(grid.min_hz, grid.step_hz,
                                         std::vector<double>(grid.count, 1.0));
            const auto report = noise::sbr_curve(eta_t, ones, q_total, floor);

            table.columns = {"delta_hz", "eta_t", "q_scatter_rt", "q_stokes_rt", "sbr"};
            for (std::size_t i = 0; i < grid.count; ++i)
                table.rows.push_back({grid.at(i), eta_t.values[i],
                                      rail * bg.scatter_rt.values[i],
                                      rail * bg.stokes_rt.values[i],
                                      report.sbr_curve.values[i]});
            summary["optimal_delta_hz"] = report.optimal_delta;
            summary["sbr_at_optimum"] = report.sbr_at_optimum;
            summary["technical_floor_photons"] = floor;
            summary["dual_rail"] = c.boolean("sbr.dual_rail");
        }
    } else if (scenario == "etalon-scan") {
        const auto bg = run_background_pipeline(c, grid, jobs, notes);
        failures = bg.failures;
        if (failures.empty()) {
            const auto cascade = make_cascade(c);
            double total_in = 0.0;
            for (double v : bg.scatter_rt.values) total_in += v;
            for (double v : bg.stokes_rt.values) total_in += v;
            if (!(total_in > 0.0))
                throw physics_error("etalon-scan: background model produced no photons");

            table.columns = {"etalon_offset_hz", "cascade_transmission", "filtered_scatter_frac",
                             "filtered_stokes_frac", "filtered_total_frac"};
            for (std::size_t i = 0; i < grid.count; ++i) {
                const double offset = grid.at(i);
                const auto filtered =
                    spectral::filter_background(bg.scatter_rt, bg.stokes_rt, cascade, offset);
                table.rows.push_back({offset, spectral::cascade_transmission(cascade, offset),
                                      filtered.scatter / total_in, filtered.stokes / total_in,
                                      filtered.total / total_in});
            }
            summary["input_photons"] = total_in;
        }
    } else if (scenario == "qubit-fidelity") {
        const double sbr_single = c.real("qubit.sbr");
        const bool dual = c.boolean("qubit.dual_rail");
        // a second rail collects its own background, doubling q for the qubit
        const double sbr = dual ? sbr_single / 2.0 : sbr_single;
        const double f0 = c.real("qubit.intrinsic_fidelity");

        const double shrink = (2.0 * f0 - 1.0) * sbr / (sbr + 1.0);
        const Eigen::Matrix3d channel =
            (Eigen::AngleAxisd(c.real("qubit.rotation_z_deg") * std::numbers::pi / 180.0,
                               Eigen::Vector3d::UnitZ()) *
             Eigen::AngleAxisd(c.real("qubit.rotation_x_deg") * std::numbers::pi / 180.0,
                               Eigen::Vector3d::UnitX()))
                .toRotationMatrix();

        const std::vector<noise::StokesVector> inputs = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
        detail_run::GaussianSampler gauss(static_cast<std::uint64_t>(c.integer("seed")));
        const double sigma = c.real("qubit.noise_sigma");

        std::vector<noise::StokesVector> outputs;
        for (const auto& s : inputs) {
            Eigen::Vector3d v = shrink * (channel * s.vec());
            v += sigma * Eigen::Vector3d(gauss.next(), gauss.next(), gauss.next());
            if (v.squaredNorm() > 1.0) v /= v.norm();
            outputs.push_back(noise::StokesVector::from(v));
        }

        const auto aligned = noise::align_frames(inputs, outputs);
        const auto thresholds =
            noise::classical_thresholds(c.real("qubit.mean_photons"), c.real("qubit.efficiency"));
        const auto report = noise::make_fidelity_report(aligned.mean_fidelity, thresholds);

        table.columns = {"state_index", "s_in_1", "s_in_2", "s_in_3",
                         "s_out_1",     "s_out_2", "s_out_3", "fidelity"};
        for (std::size_t i = 0; i < inputs.size(); ++i)
            table.rows.push_back({static_cast<double>(i), inputs[i].s1, inputs[i].s2, inputs[i].s3,
                                  outputs[i].s1, outputs[i].s2, outputs[i].s3,
                                  noise::fidelity(aligned.aligned_inputs[i], outputs[i])});

        summary["states"] = {"H", "V", "D", "A", "R", "L"};
        summary["qubit_sbr"] = sbr;
        summary["mean_fidelity"] = report.fidelity;
        summary["qber"] = report.qber;
        summary["predicted_fidelity"] = noise::sbr_to_fidelity(sbr, f0);
        summary["margin_vs_intercept_resend"] = report.vs_intercept_resend;
        summary["margin_vs_nonunitary_bound"] = report.vs_nonunitary_bound;
    } else if (scenario == "lifetime-fit") {
        const auto points = parse_lifetime_points(c.text("lifetime.points"));
        const auto fit = noise::lifetime_fit(points);
        table.columns = {"storage_time_s", "efficiency", "fit_efficiency", "log_residual"};
        for (std::size_t i = 0; i < points.size(); ++i)
            table.rows.push_back({points[i].storage_time, points[i].efficiency,
                                  fit.eta0 * std::exp(-points[i].storage_time / fit.tau_c),
                                  fit.residuals[i]});
        summary["eta0"] = fit.eta0;
        summary["tau_c_s"] = fit.tau_c;
    } else {
        throw config_error("scenario: unknown kind '" + scenario + "'");
    }

    // ------------------------------ write outputs ---------------------------
    std::vector<std::string> written;
    const std::string stem = (outdir / scenario).string();
    if (format == "csv") {
        export_csv(table, stem + ".csv");
        written.push_back(stem + ".csv");
    } else {
        ordered_json header;
        header["code_version"] = version_string;
        header["scenario"] = scenario;
        header["config"] = c.all();
        export_json(table, header, stem + ".json");
        written.push_back(stem + ".json");
    }

    ordered_json manifest;
    manifest["code_version"] = version_string;
    manifest["scenario"] = scenario;
    manifest["status"] = failures.empty() ? "ok" : "partial";
    manifest["calibration"] = {{"version", loaded.calibration.version},
                               {"source", loaded.calibration.source},
                               {"fnv64", detail_run::hex64(loaded.calibration.hash)}};
    manifest["grid"] = {{"min_hz", grid.min_hz},
                        {"step_hz", grid.step_hz},
                        {"count", grid.count}};
    manifest["config"] = c.all();
    manifest["summary"] = summary;
    manifest["notes"] = notes;
    detail_run::fill_failures(manifest, failures);
    manifest["outputs"] = written;
    manifest["duration_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              start)
            .count();

    RunManifest result;
    result.status = manifest["status"];
    result.manifest_path = (outdir / "manifest.json").string();
    {
        std::ofstream out(result.manifest_path, std::ios::binary);
        if (!out) throw io_error("cannot write " + result.manifest_path);
        out << manifest.dump(2) << "\n";
    }
    result.document = std::move(manifest);
    return result;
}

} // namespace vapormem::harness
