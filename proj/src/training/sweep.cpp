#include "dpdsr/training/sweep.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "dpdsr/io/binary.hpp"

namespace dpdsr::training {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string short_number(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

const char* axis_tag(const std::string& axis) {
    if (axis == "tau") return "tau";
    if (axis == "log_sigma_eta2") return "eta";
    if (axis == "log_sigma_eps2") return "eps";
    if (axis == "gamma") return "gamma";
    return "tpred";
}

std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<std::pair<std::string, std::vector<double>>> SweepGrid::axes(models::Variant variant) const {
    switch (variant) {
        case models::Variant::dpdsr:
        case models::Variant::spdsr: return {{"tau", tau}, {"log_sigma_eta2", log_sigma_eta2}};
        case models::Variant::dkf: return {{"log_sigma_eta2", log_sigma_eta2}, {"log_sigma_eps2", log_sigma_eps2}};
        case models::Variant::arlstm: return {{"gamma", gamma}, {"t_pred", t_pred}};
    }
    return {};
}

std::size_t SweepGrid::cell_count(models::Variant variant) const {
    std::size_t n = 1;
    for (const auto& [name, values] : axes(variant)) n *= values.size();
    return n;
}

void SweepGrid::validate(models::Variant variant) const {
    if (seeds == 0) throw std::invalid_argument("sweep grid: seeds must be at least 1");
    for (const auto& [name, values] : axes(variant)) {
        if (values.empty()) throw std::invalid_argument("sweep grid: axis '" + name + "' is empty");
        for (double v : values) {
            if (!std::isfinite(v)) throw std::invalid_argument("sweep grid: axis '" + name + "' has a non-finite value");
            const bool count = name == "tau" || name == "t_pred";
            if (count && (v < 1.0 || v != std::floor(v)))
                throw std::invalid_argument("sweep grid: axis '" + name + "' needs positive integers, got " +
                                            short_number(v));
            if (name == "gamma" && (v < 0.0 || v > 1.0))
                throw std::invalid_argument("sweep grid: gamma must lie in [0, 1], got " + short_number(v));
        }
    }
}

std::vector<SweepCell> sweep_cells(const SweepGrid& grid, models::Variant variant) {
    grid.validate(variant);
    const auto axes = grid.axes(variant);
    std::vector<SweepCell> cells{SweepCell{}};
    for (const auto& [name, values] : axes) {
        std::vector<SweepCell> next;
        for (const auto& cell : cells) {
            for (double v : values) {
                SweepCell c = cell;
                c.values.emplace_back(name, v);
                c.name += (c.name.empty() ? "" : "_") + std::string(axis_tag(name)) + short_number(v);
                next.push_back(std::move(c));
            }
        }
        cells = std::move(next);
    }
    return cells;
}

TrainingConfig apply_cell(const TrainingConfig& base, const SweepCell& cell) {
    TrainingConfig c = base;
    for (const auto& [name, v] : cell.values) {
        if (name == "tau") c.loss.tau = static_cast<std::size_t>(v);
        else if (name == "log_sigma_eta2") c.loss.log_sigma_eta2 = v;
        else if (name == "log_sigma_eps2") c.model.log_sigma_eps2 = v;
        else if (name == "gamma") c.loss.gamma = v;
        else if (name == "t_pred") c.loss.t_pred = static_cast<std::size_t>(v);
        else throw std::invalid_argument("sweep: unknown axis '" + name + "'");
    }
    return c;
}

double SweepRun::score() const {
    if (failed || !best) return kInf;
    return checkpoints[*best].report.score;
}

json SweepResult::selection_json() const {
    const auto& run = runs.at(selected_run);
    json axes = json::object();
    for (const auto& [name, v] : cells.at(selected_cell).values) axes[name] = v;
    json j{{"variant", models::to_string(variant)},
           {"cell", cells.at(selected_cell).name},
           {"axes", axes},
           {"cell_mean_score", cell_scores.at(selected_cell)},
           {"seed", run.seed},
           {"run_dir", run.run_dir.string()},
           {"score", run.score()}};
    if (run.best) {
        j["checkpoint"] = run.checkpoints[*run.best].iteration;
        j["checkpoint_dir"] = checkpoint_dir(run.run_dir, run.checkpoints[*run.best].iteration).string();
        j["final_checkpoint"] = run.checkpoints.back().iteration;
        j["final_score"] = run.checkpoints.back().report.score;
    }
    return j;
}

SweepResult sweep(const SweepGrid& grid, const TrainingConfig& base, const dynsys::DatasetPair& data,
                  const fs::path& out_dir, const SweepOptions& options) {
    SweepResult result;
    result.variant = base.model.variant;
    result.cells = sweep_cells(grid, result.variant);
    for (const auto& cell : result.cells) apply_cell(base, cell).validate();

    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        for (std::size_t k = 0; k < grid.seeds; ++k) {
            SweepRun run;
            run.cell = c;
            run.seed_index = k;
            run.seed = derive_seed(base.seed, "sweep-seed", k);
            run.run_dir = out_dir / "runs" / (result.cells[c].name + "_seed" + std::to_string(k));
            result.runs.push_back(std::move(run));
        }
    }

    auto execute = [&](SweepRun& run) {
        try {
            auto config = apply_cell(base, result.cells[run.cell]);
            config.seed = run.seed;
            const auto trained = train(config, data.train, run.run_dir);
            if (trained.failed) {
                run.failed = true;
                run.failure = trained.failure;
            }
            for (const auto& dir : trained.checkpoints) {
                const auto ck = models::load_checkpoint(dir);
                auto report = evaluation::evaluate(*ck.model, data.train, data.test, run.run_dir.filename().string(),
                                                   options.evaluation);
                report.checkpoint = ck.iteration;
                io::atomic_write(dir / "evaluation.json", report.to_json().dump(2) + "\n");
                run.checkpoints.push_back({ck.iteration, std::move(report)});
            }
            if (run.failed) return;
            for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
                if (!run.best || run.checkpoints[i].report.score < run.checkpoints[*run.best].report.score) run.best = i;
            }
        } catch (const std::exception& e) {
            run.failed = true;
            run.failure = e.what();
        }
    };

    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < result.runs.size();) {
            execute(result.runs[i]);
            if (options.on_run_done) {
                std::lock_guard lock(report_mutex);
                options.on_run_done(result.runs[i]);
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, result.runs.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    result.cell_scores.assign(result.cells.size(), 0.0);
    for (const auto& run : result.runs) result.cell_scores[run.cell] += run.score() / static_cast<double>(grid.seeds);
    bool any = false;
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        if (result.cell_scores[c] < result.cell_scores[result.selected_cell]) result.selected_cell = c;
    }
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        const auto& run = result.runs[r];
        if (run.score() < kInf) any = true;
        if (run.cell != result.selected_cell) continue;
        if (result.runs[result.selected_run].cell != result.selected_cell || run.score() < result.runs[result.selected_run].score())
            result.selected_run = r;
    }

    fs::create_directories(out_dir);
    io::atomic_write(out_dir / "sweep_results.csv", sweep_csv(result));
    if (!any) {
        throw std::runtime_error("sweep: all " + std::to_string(result.runs.size()) + " runs failed");
    }
    io::atomic_write(out_dir / "selection.json", result.selection_json().dump(2) + "\n");
    return result;
}

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "cell";
    const auto& axes = result.cells.empty() ? std::vector<std::pair<std::string, double>>{} : result.cells[0].values;
    for (const auto& [name, v] : axes) out << ',' << name;
    out << ",seed_index,seed,run,status,checkpoint,best_in_run,D_d,D_s,PE_20,D_ISI,KL_eps,score,selected\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        const auto& run = result.runs[r];
        const auto& cell = result.cells[run.cell];
        auto prefix = [&] {
            out << cell.name;
            for (const auto& [name, v] : cell.values) out << ',' << csv_number(v);
            out << ',' << run.seed_index << ',' << run.seed << ',' << run.run_dir.filename().string() << ','
                << (run.failed ? "failed" : "ok") << ',';
        };
        const bool selected_run = r == result.selected_run;
        if (run.checkpoints.empty()) {
            prefix();
            out << ",0,,,,,,inf," << 0 << '\n';
            continue;
        }
        for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
            const auto& rep = run.checkpoints[i].report;
            const bool best = run.best && *run.best == i;
            prefix();
            out << run.checkpoints[i].iteration << ',' << (best ? 1 : 0) << ',' << csv_number(rep.D_d) << ','
                << csv_number(rep.D_s) << ',' << csv_number(rep.PE) << ','
                << (rep.D_isi ? csv_number(*rep.D_isi) : "") << ',' << csv_number(rep.KL_eps) << ','
                << csv_number(run.failed ? kInf : rep.score) << ',' << (selected_run && best ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace dpdsr::training
