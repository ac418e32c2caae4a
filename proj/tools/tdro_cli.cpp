// Command-line driver: tdro_cli {ground|propagate|extract|validate|all} --config <path> [--out <dir>] [--override k=v ...]
// Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 validation failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdro/pipeline.hpp"

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::string source = "exact";
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "flat key = value config file")->required();
    cmd->add_option("--out", o.out_dir, "output directory (default: the config's 'outputs' key)");
    cmd->add_option("--override", o.overrides, "key=value, applied after the config file")->take_all();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transition probabilities from time-averaged densities: two-electron harmonium model"};
    app.require_subcommand(1);
    Options o;
    auto* ground = app.add_subcommand("ground", "stationary states and KS ground state");
    auto* propagate = app.add_subcommand("propagate", "time propagation of one source");
    auto* extract = app.add_subcommand("extract", "exact and KS-determinant probabilities and density read-out");
    auto* validate = app.add_subcommand("validate", "oracle checks on the stored artifacts");
    auto* all = app.add_subcommand("all", "every stage in order");
    for (auto* c : {ground, propagate, extract, validate, all}) add_common(c, o);
    propagate->add_option("--source", o.source, "exact | exact_2d | tdks_exact | tdks_sic")
        ->check(CLI::IsMember({"exact", "exact_2d", "tdks_exact", "tdks_sic"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        tdro::RunConfig cfg = tdro::load_config(o.config_path);
        for (const auto& kv : o.overrides) tdro::apply_override(cfg, kv);
        cfg.validate();
        const tdro::fs::path out = o.out_dir.empty() ? tdro::fs::path(cfg.outputs) : tdro::fs::path(o.out_dir);

        if (*ground) tdro::run_ground(cfg, out, std::cout);
        else if (*propagate) tdro::run_propagate(cfg, tdro::trace_source_from_string(o.source), out, std::cout);
        else if (*extract) tdro::run_extract(cfg, out, std::cout);
        else {
            const auto report = *all ? tdro::run_all(cfg, out, std::cout) : tdro::run_validate(cfg, out, std::cout);
            if (!report.passed()) {
                std::cerr << "validation failed\n";
                return 3;
            }
        }
    } catch (const tdro::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const tdro::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
