// Command-line front end: run experiments, characterize the device, audit
// the controller wiring.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spikectl/controller.hpp"
#include "spikectl/harness.hpp"
#include "spikectl/mismatch.hpp"

#ifndef SPIKECTL_VERSION
#define SPIKECTL_VERSION "unknown"
#endif

using namespace spikectl;

namespace {

harness::HarnessConfig load(const std::string& path) {
    return path.empty() ? harness::default_config() : harness::load_config(path);
}

std::ofstream open_in(const std::string& dir, const std::string& file) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(std::filesystem::path(dir) / file);
    if (!out) {
        throw ArgumentError("cannot write '" + (std::filesystem::path(dir) / file).string() + "'");
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiking speed controller on a simulated neuromorphic device"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";

    auto* run = app.add_subcommand("run", "Run one experiment and write its traces");
    std::string experiment;
    std::optional<std::uint64_t> seed;
    run->add_option("--experiment", experiment, "staircase | stop_and_go | learn_all | characterize");
    run->add_option("--config", config_path, "JSON config (default: built-in defaults)");
    run->add_option("--seed", seed, "Overrides the config seed");
    run->add_option("--out", out_dir, "Output directory")->required();

    auto* characterize = app.add_subcommand("characterize", "200 Hz rate sweep of every neuron");
    characterize->add_option("--config", config_path, "JSON config");
    characterize->add_option("--out", out_dir, "Output directory");

    auto* audit = app.add_subcommand("audit", "Build the controller and check every connection group");
    audit->add_option("--config", config_path, "JSON config");
    audit->add_option("--out", out_dir, "Directory for wiring.json");

    auto* calibrate = app.add_subcommand("calibrate", "Recompute c, plant gain, bins and w_max; print the config");
    calibrate->add_option("--config", config_path, "JSON config");

    auto* dump = app.add_subcommand("config", "Print the default config");
    auto* version = app.add_subcommand("version", "Print the version");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = load(config_path);
            if (!experiment.empty()) {
                config.experiment.kind = experiment;
            }
            if (seed) {
                config.seed = *seed;
            }
            std::cout << harness::run_experiment(config, out_dir) << '\n';
        } else if (*characterize) {
            auto config = load(config_path);
            const auto profile = harness::run_characterize(config, out_dir);
            std::printf("%zu neurons at %.0f Hz: mean %.2f Hz, std %.2f Hz\n", profile.rates_hz.size(),
                        profile.stimulus_rate_hz, profile.mean(), profile.stddev());
        } else if (*audit) {
            const auto config = load(config_path);
            const auto device = harness::build_device(config.device, config.controller, config.learning);
            const auto report = controller::audit(device.network, device.wiring);
            for (const auto& e : report.entries) {
                std::printf("%-20s expected %4zu installed %4zu %s\n", e.group.c_str(), e.expected, e.installed,
                            e.ok ? "ok" : "MISMATCH");
            }
            std::printf("%zu neurons, %zu connections, %zu plastic synapses: %s\n", report.neurons,
                        device.wiring.connection_count(), device.wiring.plastic_synapses,
                        report.ok ? "ok" : "FAILED");
            open_in(out_dir, "wiring.json") << controller::wiring_to_json(device.wiring, config.controller, report)
                                            << '\n';
            return report.ok ? 0 : 1;
        } else if (*calibrate) {
            auto config = load(config_path);
            const auto device = harness::build_device(config.device, config.controller, config.learning);
            const auto motor = harness::calibrate_motor(config, device);
            config.u_per_hz = motor.u_per_hz;
            config.plant.gain = motor.plant_gain;
            config.bins = motor.bins;
            config.learning.w_max = harness::calibrate_w_max(config, device, motor.mr_rate_hz[4]);
            std::cerr << "held command mr rates (Hz):";
            for (const double r : motor.mr_rate_hz) {
                std::cerr << ' ' << r;
            }
            std::cerr << '\n';
            std::cout << harness::config_to_json(config) << '\n';
        } else if (*dump) {
            std::cout << harness::config_to_json(harness::default_config()) << '\n';
        } else if (*version) {
            std::cout << "spikectl " << SPIKECTL_VERSION << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
