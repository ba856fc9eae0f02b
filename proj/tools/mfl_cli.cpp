// mfl: run one experiment described by a config file.
//
//   mfl --config study.cfg [--out DIR] [--seed INT] [--jobs INT]
//
// Exit status: 0 pass, 1 criterion failure, 2 configuration error, 3 abort.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mfl/config.hpp"
#include "mfl/runner.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Mean-field limit experiments: PDE solves, coupled particles, convergence studies"};
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    app.add_option("--config", config_path, "Experiment config file")->required();
    app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
    app.add_option("--seed", seed, "Master seed (overrides schedule.master_seed)");
    app.add_option("--jobs", jobs, "Parallel jobs")->check(CLI::PositiveNumber);
    app.set_version_flag("--version", std::string(mfl::kVersion));
    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : mfl::kExitConfig;
    }

    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "cannot read config " << config_path << '\n';
        return mfl::kExitConfig;
    }
    std::stringstream text;
    text << in.rdbuf();

    mfl::ExperimentConfig config;
    try {
        config = mfl::parse_config(text.str());
    } catch (mfl::ConfigError const& e) {
        std::cerr << e.what() << '\n';
        return mfl::kExitConfig;
    }
    if (!out_dir.empty())
        config.output_dir = out_dir;
    if (seed)
        config.master_seed = *seed;

    mfl::RunOptions options;
    options.jobs = jobs;
    options.log = &std::cout;
    try {
        auto outcome = mfl::run(config, options);
        std::cout << "manifest " << outcome.manifest.string() << '\n';
        return outcome.exit_code;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mfl::kExitAbort;
    }
}
