#include "dpdsr/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <ostream>
#include <sstream>

#include "dpdsr/cli/svg.hpp"
#include "dpdsr/io/binary.hpp"

namespace dpdsr::cli {

namespace fs = std::filesystem;

namespace {

bool is_synthetic(const std::string& name) {
    const auto& names = dynsys::synthetic_dataset_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

dynsys::ConnectivityScaling rnn_scaling(const std::string& text) {
    if (text == "g2/n") return dynsys::ConnectivityScaling::g_squared_over_n;
    if (text == "g/n2") return dynsys::ConnectivityScaling::g_over_n_squared;
    throw UsageError("rnn scaling must be g2/n or g/n2, got '" + text + "'");
}

fs::path stem(const RunConfig& c, const char* split) { return c.data_dir / (c.dataset + "_" + split); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_run_config(const RunConfig& config, const fs::path& dir) {
    io::atomic_write(dir / "run.conf", to_text(config));
}

std::unique_ptr<models::Model> load_model(const fs::path& checkpoint, std::size_t& iteration) {
    if (!fs::exists(checkpoint / "model.bin")) throw UsageError("not a checkpoint directory: " + checkpoint.string());
    auto ck = models::load_checkpoint(checkpoint);
    iteration = ck.iteration;
    return std::move(ck.model);
}

// ../.. of run/checkpoints/ckpt_N
std::string run_name(const fs::path& checkpoint) {
    return fs::weakly_canonical(checkpoint).parent_path().parent_path().filename().string();
}

}  // namespace

fs::path default_output_root() {
    if (const char* env = std::getenv("DPDSR_OUTPUT_ROOT"); env && *env) return env;
    return "dpdsr_runs";
}

RunConfig resolve_config(const std::optional<fs::path>& inherited, const std::optional<fs::path>& config_file,
                         const std::vector<Assignment>& overrides) {
    RunConfig c;
    std::vector<Assignment> all;
    if (inherited) {
        auto a = read_config_file(*inherited);
        all.insert(all.end(), a.begin(), a.end());
    }
    if (config_file) {
        auto a = read_config_file(*config_file);
        all.insert(all.end(), a.begin(), a.end());
    }
    all.insert(all.end(), overrides.begin(), overrides.end());
    apply_assignments(c, all);
    if (c.data_dir.empty()) c.data_dir = default_output_root() / "data";
    c.data_dir = fs::absolute(c.data_dir).lexically_normal();
    validate(c);
    return c;
}

std::optional<fs::path> inherited_config(const fs::path& dir) {
    // a run directory, a checkpoint of a run, or a checkpoint of a sweep run
    for (const auto& candidate : {dir / "run.conf", dir / ".." / ".." / "run.conf", dir / ".." / ".." / ".." / ".." / "run.conf"}) {
        if (fs::is_regular_file(candidate)) return candidate;
    }
    return std::nullopt;
}

void prepare_output(const fs::path& dir, bool overwrite) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!overwrite)
            throw std::runtime_error("output directory " + dir.string() + " already exists; pass --overwrite to replace it");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

dynsys::DatasetPair load_data(const RunConfig& config, std::ostream& log) {
    const auto train_stem = stem(config, "train"), test_stem = stem(config, "test");
    if (!fs::exists(train_stem.string() + ".bin") || !fs::exists(test_stem.string() + ".bin")) {
        if (!is_synthetic(config.dataset))
            throw UsageError("no data for dataset '" + config.dataset + "' in " + config.data_dir.string() +
                             "; known synthetic datasets are lorenz, cell, doublewell, rnn; recordings need "
                             "`dpdsr generate neuron|ecg --input FILE`");
        log << "generating " << config.dataset << " (seed " << config.data_seed << ", scale " << config.data_scale
            << ") into " << config.data_dir.string() << '\n';
        dynsys::GenerateOptions opts;
        opts.scale = config.data_scale;
        opts.rnn_scaling = rnn_scaling(config.rnn_scaling);
        auto pair = dynsys::generate_dataset(config.dataset, config.data_seed, opts);
        fs::create_directories(config.data_dir);
        dynsys::write_dataset_pair(pair, config.data_dir);
        return pair;
    }
    dynsys::DatasetPair pair{dynsys::read_dataset(train_stem), dynsys::read_dataset(test_stem)};
    if (is_synthetic(config.dataset)) {
        const auto& p = pair.train.generator_params;
        if (p.contains("scale") && p["scale"].get<double>() != config.data_scale)
            throw std::runtime_error("stored " + config.dataset + " data was generated at scale " +
                                     csv_number(p["scale"].get<double>()) + " but data_scale is " +
                                     csv_number(config.data_scale) + "; regenerate it or point data_dir elsewhere");
        if (pair.train.seed != config.data_seed)
            throw std::runtime_error("stored " + config.dataset + " data was generated with seed " +
                                     std::to_string(pair.train.seed) + " but data_seed is " +
                                     std::to_string(config.data_seed));
    }
    return pair;
}

void cmd_generate(const GenerateRequest& r, std::ostream& log) {
    dynsys::DatasetPair pair;
    if (r.name == "neuron" || r.name == "ecg") {
        if (!r.input) throw UsageError("dataset '" + r.name + "' is a recording; pass --input FILE");
        pair = dynsys::preprocess_external(dynsys::read_samples(*r.input), dynsys::parse_external_kind(r.name));
    } else if (is_synthetic(r.name)) {
        if (!(r.scale > 0.0 && r.scale <= 1.0)) throw UsageError("scale must lie in (0, 1]");
        dynsys::GenerateOptions opts;
        opts.scale = r.scale;
        opts.rnn_scaling = rnn_scaling(r.rnn_scaling);
        pair = dynsys::generate_dataset(r.name, r.seed, opts);
    } else {
        throw UsageError("unknown dataset '" + r.name + "'; expected lorenz, cell, doublewell, rnn, neuron or ecg");
    }
    for (const char* split : {"_train", "_test"}) {
        for (const char* ext : {".bin", ".json"}) {
            const auto f = r.out_dir / (pair.train.name + split + ext);
            if (fs::exists(f) && !r.overwrite)
                throw std::runtime_error(f.string() + " already exists; pass --overwrite to replace it");
        }
    }
    fs::create_directories(r.out_dir);
    const auto [train, test] = dynsys::write_dataset_pair(pair, r.out_dir);
    log << "wrote " << train.string() << " (" << pair.train.length << " points) and " << test.string() << " ("
        << pair.test.length << " points)\n";
}

void cmd_train(const RunConfig& config, const fs::path& out, bool overwrite, std::ostream& log) {
    const auto data = load_data(config, log);
    RunConfig c = config;
    c.train.model.d_x = data.train.channels;
    prepare_output(out, overwrite);
    write_run_config(c, out);
    log << "training " << models::to_string(c.train.model.variant) << " on " << c.dataset << " for "
        << c.train.total_iterations() << " iterations -> " << out.string() << '\n';
    const auto result = training::train(c.train, data.train, out, [&](const training::TraceRow& row) {
        if (c.log_every == 0 || row.iteration % c.log_every != 0) return;
        log << "iter " << row.iteration;
        for (const auto& [name, v] : row.components) log << ' ' << name << '=' << v;
        log << " grad_norm=" << row.grad_norm << '\n';
    });
    if (result.failed)
        throw std::runtime_error("training failed after " + std::to_string(result.iterations_done) +
                                 " iterations: " + result.failure);
    log << "done: final loss " << result.final_loss << ", " << result.checkpoints.size() << " checkpoints\n";
}

void cmd_sweep(const RunConfig& config, const fs::path& out, bool overwrite, std::ostream& log) {
    const auto data = load_data(config, log);
    RunConfig c = config;
    c.train.model.d_x = data.train.channels;
    prepare_output(out, overwrite);
    write_run_config(c, out);
    training::SweepOptions opts;
    opts.workers = c.workers;
    opts.evaluation = c.eval;
    std::size_t done = 0;
    const std::size_t total = c.grid.cell_count(c.train.model.variant) * c.grid.seeds;
    opts.on_run_done = [&](const training::SweepRun& run) {
        log << '[' << ++done << '/' << total << "] " << run.run_dir.filename().string() << ' '
            << (run.failed ? "failed: " + run.failure : "score " + csv_number(run.score())) << '\n';
    };
    const auto r = training::sweep(c.grid, c.train, data, out, opts);
    log << "selected " << r.runs[r.selected_run].run_dir.filename().string() << " (cell mean "
        << r.cell_scores[r.selected_cell] << ", run " << r.runs[r.selected_run].score() << ")\n";
}

void cmd_eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& out, bool overwrite,
              std::ostream& log) {
    std::size_t iteration = 0;
    const auto model = load_model(checkpoint, iteration);
    const auto data = load_data(config, log);
    prepare_output(out, overwrite);
    write_run_config(config, out);
    std::vector<double> generated;
    auto report = evaluation::evaluate(*model, data.train, data.test, run_name(checkpoint), config.eval, &generated);
    report.checkpoint = iteration;
    io::atomic_write(out / "evaluation.json", report.to_json().dump(2) + "\n");
    io::atomic_write(out / "evaluation.csv", evaluation::reports_csv({report}));

    const std::size_t ch = data.test.channels, steps = generated.size() / ch;
    {
        std::ostringstream csv;
        csv.precision(17);
        csv << 't';
        for (std::size_t c = 0; c < ch; ++c) csv << ",x" << c;
        csv << '\n';
        for (std::size_t t = 0; t < steps; ++t) {
            csv << t;
            for (std::size_t c = 0; c < ch; ++c) csv << ',' << generated[t * ch + c];
            csv << '\n';
        }
        io::atomic_write(out / "generated.csv", csv.str());
    }
    for (std::size_t c = 0; c < ch; ++c) {
        std::vector<double> gen(steps);
        for (std::size_t t = 0; t < steps; ++t) gen[t] = generated[t * ch + c];
        const auto real = data.test.channel(c);
        const std::size_t n = std::min({config.plot_points, gen.size(), real.size()});
        const std::string suffix = ch == 1 ? "" : "_x" + std::to_string(c);
        io::atomic_write(out / ("timeseries" + suffix + ".svg"),
                         svg_line_plot(config.dataset + ": generated vs test",
                                       {{"test", {real.begin(), real.begin() + static_cast<std::ptrdiff_t>(n)}, "#1f77b4"},
                                        {"generated", {gen.begin(), gen.begin() + static_cast<std::ptrdiff_t>(n)}, "#d62728"}},
                                       "t", "x" + std::to_string(c)));
        io::atomic_write(out / ("histogram" + suffix + ".svg"),
                         svg_histogram(config.dataset + ": state distribution",
                                       {{"test", real, "#1f77b4"}, {"generated", gen, "#d62728"}}, 40,
                                       "x" + std::to_string(c)));
    }
    log << "D_d=" << report.D_d << " D_s=" << report.D_s << " PE_20=" << report.PE << " KL_eps=" << report.KL_eps
        << " score=" << report.score << (report.diverged ? " (diverged)" : "") << '\n';
}

void cmd_attractors(const RunConfig& config, const fs::path& checkpoint, const fs::path& out, bool overwrite,
                    std::ostream& log) {
    std::size_t iteration = 0;
    const auto model = load_model(checkpoint, iteration);
    const auto data = load_data(config, log);
    prepare_output(out, overwrite);
    write_run_config(config, out);
    const auto points = attractors::embedded_initial_points(
        *model, data.train, config.attractor_points, derive_seed(config.attractor.lyapunov.seed, "attractor-points"));
    const auto report = attractors::find_attractors(attractors::skeleton_map(*model), points, config.attractor);
    auto j = report.to_json(config.trajectory_points);
    j["checkpoint"] = iteration;
    io::atomic_write(out / "attractors.json", j.dump(2) + "\n");

    std::ostringstream summary, traj;
    summary.precision(17);
    traj.precision(17);
    summary << "attractor,class,lambda_max,spread,basin_fraction,members\n";
    traj << "attractor,t";
    for (std::size_t i = 0; i < model->state_dim(); ++i) traj << ",z" << i;
    traj << '\n';
    for (std::size_t a = 0; a < report.attractors.size(); ++a) {
        const auto& at = report.attractors[a];
        summary << a << ',' << attractors::to_string(at.cls) << ',' << at.lambda_max << ',' << at.spread << ','
                << at.basin_fraction << ',' << at.members.size() << '\n';
        const std::size_t n = std::min(config.trajectory_points, at.trajectory.size() / at.dim);
        for (std::size_t t = 0; t < n; ++t) {
            traj << a << ',' << t;
            for (std::size_t i = 0; i < at.dim; ++i) traj << ',' << at.trajectory[t * at.dim + i];
            traj << '\n';
        }
        log << "attractor " << a << ": " << attractors::to_string(at.cls) << ", lambda_max " << at.lambda_max
            << ", basin " << at.basin_fraction << '\n';
    }
    io::atomic_write(out / "attractors.csv", summary.str());
    io::atomic_write(out / "attractor_trajectories.csv", traj.str());
    if (report.escaped) log << report.escaped << " of " << report.initial_points << " trajectories escaped\n";
}

void cmd_tauopt(const RunConfig& config, const fs::path& sweep_dir, const fs::path& out, bool overwrite,
                std::ostream& log) {
    const auto table = sweep_dir / "sweep_results.csv";
    if (!fs::is_regular_file(table)) throw UsageError("no sweep_results.csv in " + sweep_dir.string());
    std::istringstream in(io::read_file(table));
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw UsageError("sweep_results.csv has no '" + name + "' column");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_tau = column("tau"), c_run = column("run"), c_status = column("status"),
               c_ckpt = column("checkpoint"), c_best = column("best_in_run"), c_score = column("score");

    struct Pick {
        std::string run;
        std::size_t checkpoint;
        double score;
    };
    std::map<double, Pick> best;
    while (std::getline(in, line)) {
        const auto row = split_csv_line(line);
        if (row.size() != header.size() || row[c_status] != "ok" || row[c_best] != "1") continue;
        const double tau = std::stod(row[c_tau]), score = std::stod(row[c_score]);
        if (!std::isfinite(score)) continue;
        const auto it = best.find(tau);
        if (it == best.end() || score < it->second.score)
            best[tau] = {row[c_run], static_cast<std::size_t>(std::stoull(row[c_ckpt])), score};
    }
    if (best.empty()) throw std::runtime_error("sweep has no successful runs");

    const auto data = load_data(config, log);
    std::vector<double> taus, lambdas;
    nlohmann::json picks = nlohmann::json::array();
    for (const auto& [tau, pick] : best) {
        const auto dir = training::checkpoint_dir(sweep_dir / "runs" / pick.run, pick.checkpoint);
        std::size_t iteration = 0;
        const auto model = load_model(dir, iteration);
        const auto* dp = dynamic_cast<const models::DpdsrModel*>(model.get());
        if (!dp) throw UsageError("tauopt needs a DPDSR or SPDSR sweep");
        const auto lambda = attractors::forced_lyapunov(*dp, data.train, static_cast<std::size_t>(tau), config.attractor.lyapunov);
        if (!lambda) {
            log << "tau " << tau << ": forced trajectory escaped, skipped\n";
            continue;
        }
        log << "tau " << tau << ": lambda_max " << *lambda << " (" << pick.run << ", checkpoint " << pick.checkpoint
            << ")\n";
        taus.push_back(tau);
        lambdas.push_back(*lambda);
        picks.push_back({{"tau", tau}, {"run", pick.run}, {"checkpoint", pick.checkpoint}, {"score", pick.score}});
    }
    if (taus.size() < 2) throw std::runtime_error("tauopt needs at least two tau values with a finite exponent");
    const auto curve = attractors::tau_opt_curve(taus, lambdas, config.tauopt_clamp);
    prepare_output(out, overwrite);
    write_run_config(config, out);
    auto j = curve.to_json();
    j["runs"] = picks;
    io::atomic_write(out / "taucurve.json", j.dump(2) + "\n");
    io::atomic_write(out / "taucurve.csv", curve.csv());
    std::vector<double> diag(curve.tau);
    io::atomic_write(out / "taucurve.svg",
                     svg_line_plot("tau_opt over the tau grid", {{"tau_opt", curve.tau_opt, "#d62728"}, {"tau", diag, "#7f7f7f"}},
                                   "grid index", "steps"));
    log << curve.fixed_points.size() << " attracting fixed point(s)";
    for (double f : curve.fixed_points) log << ' ' << f;
    log << '\n';
}

}  // namespace dpdsr::cli
