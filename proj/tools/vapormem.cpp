// vapormem — warm-vapor EIT quantum memory simulator CLI
//
// Subcommands: run, validate, calibrate, version. Exit codes: 0 success,
// 1 configuration error, 2 physics/numeric error, 3 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vapormem/config.hpp"
#include "vapormem/scenarios.hpp"
#include "vapormem/version.hpp"

namespace {

using namespace vapormem;
using namespace vapormem::harness;

const char* provenance_name(Provenance p) {
    switch (p) {
    case Provenance::fallback: return "default";
    case Provenance::calibration: return "calibration";
    case Provenance::file: return "config";
    case Provenance::override_flag: return "override";
    }
    return "?";
}

struct CommonFlags {
    std::string out;
    int jobs = 0;
    std::string format;
    std::vector<std::string> overrides;

    std::vector<std::string> as_overrides() const {
        std::vector<std::string> all = overrides;
        if (!out.empty()) all.push_back("output=" + out);
        if (jobs > 0) all.push_back("jobs=" + std::to_string(jobs));
        if (!format.empty()) all.push_back("format=" + format);
        return all;
    }
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--out", flags.out, "output directory (overrides config)");
    cmd->add_option("--jobs", flags.jobs, "worker threads (overrides config)");
    cmd->add_option("--format", flags.format, "csv | json (overrides config)");
    cmd->add_option("--override", flags.overrides, "key=value override, repeatable");
}

int cmd_run(const std::string& path, const CommonFlags& flags) {
    const auto loaded = load_config(path, flags.as_overrides());
    const auto manifest = run_scenario(loaded);
    std::cout << "scenario:  " << loaded.config.text("scenario") << "\n"
              << "status:    " << manifest.status << "\n"
              << "manifest:  " << manifest.manifest_path << "\n";
    for (const auto& f : manifest.document["outputs"])
        std::cout << "output:    " << f.get<std::string>() << "\n";
    if (!manifest.document["summary"].empty())
        std::cout << "summary:   " << manifest.document["summary"].dump() << "\n";
    if (manifest.status != "ok") {
        std::cerr << "some grid points failed; see " << manifest.manifest_path << "\n";
        return 2;
    }
    return 0;
}

int cmd_validate(const std::string& path, const CommonFlags& flags) {
    const auto loaded = load_config(path, flags.as_overrides());
    std::cout << "# resolved configuration (" << path << ")\n";
    std::cout << "# calibration: " << loaded.calibration.source << " version "
              << loaded.calibration.version << "\n";
    for (const auto& [key, value] : loaded.config.all())
        std::cout << key << " = " << value << "  # "
                  << provenance_name(loaded.config.provenance(key)) << "\n";
    return 0;
}

int cmd_calibrate(const std::string& out_dir, bool check) {
    const ScenarioConfig defaults;
    const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
    std::filesystem::create_directories(dir);
    const auto path = dir / "calibration.cal";
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw io_error("cannot write " + path.string());
        out << calibration_text(defaults);
    }
    std::cout << "wrote " << path.string() << " (version " << defaults.text("calibration.version")
              << ")\n";

    if (check) {
        const auto params = make_params(defaults);
        const auto medium = make_medium(defaults);
        const auto protocol = make_protocol(defaults, true);
        const auto result =
            mb::propagate(protocol, medium, params, make_propagate_options(defaults));
        std::cout << "calibration check: eta = " << result.efficiency
                  << " at the default operating point (reference 0.051)\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"warm-vapor EIT quantum memory simulator"};
    app.require_subcommand(1);

    std::string config_path;
    CommonFlags run_flags, validate_flags;
    std::string calibrate_out;
    bool calibrate_check = false;

    auto* run = app.add_subcommand("run", "execute a scenario");
    run->add_option("config", config_path, "scenario config file")->required();
    add_common(run, run_flags);

    auto* validate = app.add_subcommand("validate", "resolve and print a config");
    validate->add_option("config", config_path, "scenario config file")->required();
    add_common(validate, validate_flags);

    auto* calibrate = app.add_subcommand("calibrate", "write the versioned calibration file");
    calibrate->add_option("--out", calibrate_out, "target directory");
    calibrate->add_flag("--check", calibrate_check, "run the calibration storage scenario");

    auto* version = app.add_subcommand("version", "print the version string");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, run_flags);
        if (validate->parsed()) return cmd_validate(config_path, validate_flags);
        if (calibrate->parsed()) return cmd_calibrate(calibrate_out, calibrate_check);
        if (version->parsed()) {
            std::cout << "vapormem " << vapormem::version_string << "\n";
            return 0;
        }
    } catch (const vapormem::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const vapormem::physics_error& e) {
        std::cerr << "physics error: " << e.what() << "\n";
        return 2;
    } catch (const vapormem::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
