#include <exception>
#include <functional>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "figp/experiment.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Functional-input Gaussian process experiments"};
    app.require_subcommand(1);

    std::string config;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string output;

    const std::map<std::string, std::pair<std::string, std::function<void(const figp::ExperimentConfig&)>>> commands{
        {"simulate", {"Simulate a synthetic data set", figp::cmd_simulate}},
        {"fit", {"Random search, MAP optimization and MCMC for every subset, model and input", figp::cmd_fit}},
        {"predict", {"Posterior predictive mean and sd on the test halves", figp::cmd_predict}},
        {"validate", {"Validation statistics and summary tables", figp::cmd_validate}},
        {"screen", {"Permutation feature dynamic importance of the ARD fit", figp::cmd_screen}},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, cmd] : commands) {
        CLI::App* s = app.add_subcommand(name, cmd.first);
        s->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
        s->add_option("--seed", seed, "Master seed (overrides the config)");
        s->add_option("--jobs", jobs, "Concurrent tasks (overrides the config)")->check(CLI::PositiveNumber);
        s->add_option("--output", output, "Output directory (overrides the config)");
        subs[name] = s;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        for (const auto& [name, s] : subs) {
            if (!s->parsed())
                continue;
            figp::ConfigOverrides o;
            if (s->count("--seed"))
                o.seed = seed;
            if (s->count("--jobs"))
                o.jobs = jobs;
            if (s->count("--output"))
                o.output = output;
            figp::ExperimentConfig cfg = figp::load_config(config, o);
            commands.at(name).second(cfg);
        }
    } catch (...) {
        auto e = std::current_exception();
        int code = figp::exit_code_for(e);
        figp::Log::error(figp::message_of(e));
        return code;
    }
    return 0;
}
