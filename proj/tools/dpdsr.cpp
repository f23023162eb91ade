// dpdsr: dataset generation, training, sweeps, evaluation and attractor
// analysis from the command line. Exit codes: 0 success, 1 runtime
// failure, 2 usage error.

#include <charconv>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dpdsr/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace dpdsr::cli;

namespace {

struct Common {
    std::optional<fs::path> config;
    std::vector<std::string> set;
    std::optional<std::uint64_t> seed;
    std::optional<double> scale;
    std::optional<std::size_t> workers;
    std::optional<fs::path> out;
    bool overwrite = false;
};

void add_common(CLI::App* cmd, Common& c, bool workers) {
    cmd->add_option("-c,--config", c.config, "key = value configuration file");
    cmd->add_option("-s,--set", c.set, "override a configuration key (key=value), repeatable");
    cmd->add_option("--seed", c.seed, "training seed");
    cmd->add_option("--scale", c.scale, "desk-scale factor for data length and training budget")->check(CLI::PositiveNumber);
    if (workers) cmd->add_option("--workers", c.workers, "concurrent sweep runs")->check(CLI::PositiveNumber);
    cmd->add_option("-o,--out", c.out, "output directory");
    cmd->add_flag("--overwrite", c.overwrite, "replace an existing output directory");
}

RunConfig resolve(const Common& c, const std::optional<fs::path>& inherited) {
    std::vector<Assignment> overrides;
    for (const auto& s : c.set) overrides.push_back(parse_assignment(s));
    if (c.seed) overrides.emplace_back("seed", std::to_string(*c.seed));
    if (c.scale) {
        char buf[32];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *c.scale);
        // one desk-scale factor for the data length and the training budget
        overrides.emplace_back("scale", std::string(buf, end));
        overrides.emplace_back("data_scale", std::string(buf, end));
    }
    if (c.workers) overrides.emplace_back("workers", std::to_string(*c.workers));
    return resolve_config(inherited, c.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamical system reconstruction with a dual state/noise projection"};
    app.require_subcommand(1);
    const fs::path root = default_output_root();

    GenerateRequest gen;
    std::optional<fs::path> gen_out;
    auto* generate = app.add_subcommand("generate", "simulate a benchmark system and write train/test splits");
    generate->add_option("name", gen.name, "lorenz, cell, doublewell, rnn, neuron or ecg")->required();
    generate->add_option("--seed", gen.seed, "simulation seed");
    generate->add_option("--scale", gen.scale, "fraction of the full series length");
    generate->add_option("--rnn-scaling", gen.rnn_scaling, "coupling variance of the chaotic RNN: g2/n or g/n2");
    generate->add_option("--input", gen.input, "raw recording for neuron/ecg");
    generate->add_option("-o,--out", gen_out, "data directory");
    generate->add_flag("--overwrite", gen.overwrite, "replace existing files");

    Common train_opts, sweep_opts, eval_opts, attr_opts, tau_opts;
    auto* train = app.add_subcommand("train", "train one model");
    add_common(train, train_opts, false);

    auto* sweep = app.add_subcommand("sweep", "grid search with several seeds per cell");
    add_common(sweep, sweep_opts, true);

    fs::path eval_ckpt, attr_ckpt, sweep_dir;
    auto* eval = app.add_subcommand("eval", "score a checkpoint against the test split and plot it");
    eval->add_option("checkpoint", eval_ckpt, "checkpoint directory")->required();
    add_common(eval, eval_opts, false);

    auto* attr = app.add_subcommand("attractors", "find the attractors of a checkpoint's noise-free map");
    attr->add_option("checkpoint", attr_ckpt, "checkpoint directory")->required();
    add_common(attr, attr_opts, false);

    auto* tauopt = app.add_subcommand("tauopt", "predictability time against the forcing interval of a sweep");
    tauopt->add_option("sweep_dir", sweep_dir, "directory written by `dpdsr sweep`")->required();
    add_common(tauopt, tau_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*generate) {
            gen.out_dir = gen_out ? *gen_out : root / "data";
            cmd_generate(gen, std::cout);
        } else if (*train) {
            const auto c = resolve(train_opts, std::nullopt);
            const auto out = train_opts.out ? *train_opts.out
                                            : root / (c.dataset + "_" + dpdsr::models::to_string(c.train.model.variant) +
                                                      "_seed" + std::to_string(c.train.seed));
            cmd_train(c, out, train_opts.overwrite, std::cout);
        } else if (*sweep) {
            const auto c = resolve(sweep_opts, std::nullopt);
            const auto out = sweep_opts.out ? *sweep_opts.out
                                            : root / ("sweep_" + c.dataset + "_" +
                                                      dpdsr::models::to_string(c.train.model.variant));
            cmd_sweep(c, out, sweep_opts.overwrite, std::cout);
        } else if (*eval) {
            const auto c = resolve(eval_opts, inherited_config(eval_ckpt));
            cmd_eval(c, eval_ckpt, eval_opts.out ? *eval_opts.out : eval_ckpt / "eval", eval_opts.overwrite, std::cout);
        } else if (*attr) {
            const auto c = resolve(attr_opts, inherited_config(attr_ckpt));
            cmd_attractors(c, attr_ckpt, attr_opts.out ? *attr_opts.out : attr_ckpt / "attractors", attr_opts.overwrite,
                           std::cout);
        } else if (*tauopt) {
            const auto c = resolve(tau_opts, inherited_config(sweep_dir));
            cmd_tauopt(c, sweep_dir, tau_opts.out ? *tau_opts.out : sweep_dir / "tauopt", tau_opts.overwrite, std::cout);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
