#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "entroflow/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Langevin diffusion entropy and control experiments"};
    app.set_version_flag("--version", entroflow::version_string());
    app.require_subcommand(1);

    std::string config;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;

    const char* help = nullptr;
    for (const std::string& name : entroflow::subcommand_names()) {
        if (name == "forward") help = "Solve the Fokker-Planck flow, write density and entropy tables";
        if (name == "reverse") help = "Simulate the optimally controlled reversed dynamics";
        if (name == "verify-control") help = "Estimate control costs and compare with relative entropies";
        if (name == "entropy-report") help = "Entropy dissipation, infinite-horizon identity, martingale probes";
        if (name == "iterate") help = "Alternate backward and forward stages";
        if (name == "ergodic") help = "Long-run occupation time of a set";
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "TOML or JSON experiment file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override ensemble.seed");
        sub->add_option("--threads", threads, "Upper bound on worker threads")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out, "Output directory (default: $ENTROFLOW_OUT)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    entroflow::RunRequest req;
    req.command = chosen->get_name();
    req.config_path = config;
    if (chosen->count("--seed") > 0) req.seed = seed;
    req.threads = threads;
    if (!out.empty()) req.out = out;
    return entroflow::run_subcommand(req, std::cout, std::cerr);
}
