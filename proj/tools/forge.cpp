#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "forge/annotation_server.hpp"
#include "forge/error.hpp"
#include "forge/jsonl.hpp"
#include "forge/pipeline.hpp"
#include "forge/store.hpp"

namespace {

const std::vector<std::string> kBuildStages{"ingest", "verify", "augment", "perturb", "disrupt", "select", "report"};

int serve(forge::Pipeline& pipeline, const std::string& host, int port, bool reopen, forge::DatasetStore& store) {
    if (store.stage_complete("serve") && !reopen) {
        spdlog::info("serve: skipped (already complete; pass --reopen to serve again)");
        return 0;
    }
    // Signals are taken synchronously so the server threads never see them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    pipeline.begin_serve();
    auto service = pipeline.make_annotation_service();
    forge::AnnotationServer server(*service, pipeline.settings().static_dir.string());
    const int bound = server.start(host, port);
    std::cout << "annotation service on http://" << host << ":" << bound << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("serve: signal {}, shutting down", sig);
    server.stop();
    pipeline.finish_serve();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthesizes code-evaluation benchmarks by rule-guided perturbation."};
    app.require_subcommand(1);
    std::string config_path, store_path;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    app.add_option("--config", config_path, "configuration file");
    app.add_option("--store", store_path, "dataset store directory")->required();
    app.add_option("--seed", seed, "override pipeline.seed");
    app.add_flag("-v,--verbose", verbose, "debug logging");

    std::vector<std::string> all_stages(forge::kStages.begin(), forge::kStages.end());
    std::map<std::string, CLI::App*> subs;
    for (const auto& s : all_stages) subs[s] = app.add_subcommand(s, "run the " + s + " stage");
    subs["build"] = app.add_subcommand("build", "run ingest through report");
    subs["status"] = app.add_subcommand("status", "show stage status");
    std::string host;
    int port = 0;
    bool reopen = false;
    subs["serve"]->add_option("--host", host, "bind address");
    subs["serve"]->add_option("--port", port, "port (0 picks a free one)");
    subs["serve"]->add_flag("--reopen", reopen, "serve again after the stage completed");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
    spdlog::set_pattern("[%l] %v");

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        forge::KeyValueConfig cfg;
        if (!config_path.empty()) cfg = forge::KeyValueConfig::load(config_path);
        if (seed) cfg.set("pipeline.seed", std::to_string(*seed));
        auto settings = forge::ForgeSettings::from_config(cfg);
        auto store = forge::DatasetStore::open(store_path, true);

        if (command == "status") {
            for (const auto& s : forge::kStages) {
                const char* state = store.stage_complete(s) ? "complete" : store.stage_started(s) ? "running" : "-";
                std::cout << s << "\t" << state << "\n";
            }
            return 0;
        }
        forge::Pipeline pipeline(settings, store);
        if (command == "serve") {
            return serve(pipeline, host.empty() ? settings.server_host : host,
                         subs["serve"]->count("--port") ? port : settings.server_port, reopen, store);
        }
        if (command == "build") {
            for (const auto& s : kBuildStages) pipeline.run(s);
            return 0;
        }
        pipeline.run(command);
        if (command == "stats") std::cout << forge::read_file(store.path("stats.txt"));
        if (command == "meta") std::cout << forge::read_file(store.path("meta.txt"));
        return 0;
    } catch (const forge::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
