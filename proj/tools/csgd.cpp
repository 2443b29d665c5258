#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csgd/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Block-iterative CT reconstruction experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Experiment config file")->required();
    run->add_option("--override", overrides, "Replace one config value: section.key=value")->take_all();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : csgd::kExitConfig;
    }
    return csgd::run_experiment_main(config_path, overrides);
}
