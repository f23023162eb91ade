#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dpdsr/cli/commands.hpp"
#include "dpdsr/cli/svg.hpp"
#include "dpdsr/io/binary.hpp"

using namespace dpdsr;
using namespace dpdsr::cli;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("dpdsr_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct Result {
    int code;
    std::string out, err;
};

// runs the binary inside dir with the output root pointing there
Result run(const fs::path& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && DPDSR_OUTPUT_ROOT='" + (dir / "root").string() + "' '" +
                            DPDSR_CLI + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(out), io::read_file(err)};
}

const char* kTiny = R"(# small smoke configuration
dataset = doublewell
data_dir = data
data_scale = 0.01
d_z = 3
hidden = 8
g_hidden = 6
encoder_channels = 5
encoder_layers = 3
encoder_lstm_hidden = 4
chunk_length = 40
batch_size = 2
trim = 5
mc_samples = 1
iterations = 6
checkpoint_every = 3
eval_generation_length = 600
eval_pe_warmup = 16
eval_pe_horizon = 5
eval_pe_chunks = 8
eval_kl_length = 40
eval_kl_trim = 5
eval_kl_chunks = 4
attractor_points = 10
attractor_warmup = 50
attractor_length = 100
attractor_compare_points = 50
lyapunov_steps = 100
grid_tau = 2,5,9
grid_log_sigma_eta2 = -2
grid_seeds = 1
)";

// smallest settings that still exercise every stage of a sweep
const char* kMinimal = R"(dataset = doublewell
data_dir = data
data_scale = 0.01
d_z = 2
hidden = 4
g_hidden = 3
encoder_channels = 2
encoder_layers = 1
encoder_lstm_hidden = 2
chunk_length = 20
batch_size = 1
trim = 2
mc_samples = 1
iterations = 1
checkpoint_every = 1
eval_generation_length = 200
eval_pe_warmup = 8
eval_pe_horizon = 2
eval_pe_chunks = 2
eval_pe_noise_draws = 2
eval_kl_length = 20
eval_kl_trim = 2
eval_kl_chunks = 2
eval_kl_mc_samples = 1
eval_spectral_segment = 64
)";

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("configuration text round-trips", "[cli]") {
    RunConfig c;
    apply_assignments(c, parse_config_text(kTiny));
    CHECK(c.train.model.d_z == 3);
    CHECK(c.grid.tau == std::vector<double>{2, 5, 9});
    CHECK(c.data_scale == 0.01);

    apply_assignments(c, {{"eval_weights", "1,1,0.2,0"}, {"learning_rate", "0.00123456789012345"}, {"variant", "dkf"}});
    const auto text = to_text(c);
    RunConfig back;
    apply_assignments(back, parse_config_text(text));
    CHECK(to_text(back) == text);
    CHECK(back.train.learning_rate == 0.00123456789012345);
    REQUIRE(back.eval.weights);
    CHECK((*back.eval.weights)[2] == 0.2);
    CHECK(back.train.model.variant == models::Variant::dkf);
    CHECK(count(text, "\n") == config_keys().size());

    apply_assignments(back, {{"eval_weights", "auto"}});
    CHECK_FALSE(back.eval.weights);
}

TEST_CASE("configuration errors are reported together", "[cli]") {
    RunConfig c;
    try {
        apply_assignments(c, {{"bogus", "1"}, {"d_z", "abc"}, {"tau", "-3"}, {"also_bad", "x"}, {"variant", "lstm"}});
        FAIL("expected a UsageError");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bogus") != std::string::npos);
        CHECK(msg.find("also_bad") != std::string::npos);
        CHECK(msg.find("d_z") != std::string::npos);
        CHECK(msg.find("tau") != std::string::npos);
        CHECK(msg.find("variant") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("a = 1\nno equals sign\n= 3\n"), UsageError);
    try {
        parse_config_text("a = 1\nno equals sign\n= 3\n", "x.conf");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("x.conf:2") != std::string::npos);
        CHECK(std::string(e.what()).find("x.conf:3") != std::string::npos);
    }
    CHECK(parse_config_text("  # only a comment\n\n k =  v  # trailing\n") == std::vector<Assignment>{{"k", "v"}});
    CHECK(parse_assignment("seed=4") == Assignment{"seed", "4"});
    CHECK_THROWS_AS(parse_assignment("seed"), UsageError);

    RunConfig bad;
    bad.train.batch_size = 0;
    bad.rnn_scaling = "wrong";
    try {
        validate(bad);
        FAIL("expected a UsageError");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
        CHECK(std::string(e.what()).find("rnn_scaling") != std::string::npos);
    }
}

TEST_CASE("svg emission", "[cli]") {
    const auto line = svg_line_plot("a <b> & c", {{"x", {0, 1, std::nan(""), 3, 4}, "#000"}, {"y", {1, 2}, "#f00"}});
    CHECK(line.rfind("<svg", 0) == 0);
    CHECK(line.ends_with("</svg>\n"));
    CHECK(count(line, "<polyline") == 3);  // the NaN splits the first series
    CHECK(line.find("a &lt;b&gt; &amp; c") != std::string::npos);

    const auto hist = svg_histogram("h", {{"one", {0, 0, 1, 1, 1}, "#000"}}, 4);
    CHECK(count(hist, "<rect x=") == 2 + 1);  // two occupied bins plus the frame
    CHECK_THROWS_AS(svg_histogram("h", {}, 4), std::invalid_argument);
    CHECK_NOTHROW(svg_line_plot("flat", {{"c", {2, 2, 2}}}));
}

TEST_CASE("command line contract", "[cli]") {
    const auto dir = scratch("contract");
    write(dir / "tiny.conf", kTiny);

    SECTION("usage errors exit with 2") {
        CHECK(run(dir, "").code == 2);
        CHECK(run(dir, "frobnicate").code == 2);
        CHECK(run(dir, "generate nosuchsystem").code == 2);
        CHECK(run(dir, "generate neuron").code == 2);  // needs --input
        const auto r = run(dir, "train -c tiny.conf -s bogus=1 -s d_z=x -s other=2");
        CHECK(r.code == 2);
        CHECK(r.err.find("bogus") != std::string::npos);
        CHECK(r.err.find("other") != std::string::npos);
        CHECK(r.err.find("d_z") != std::string::npos);
        CHECK(run(dir, "train -c missing.conf").code == 2);
        CHECK(run(dir, "train -c tiny.conf -s dataset=nosuchsystem").code == 2);
        CHECK(run(dir, "eval not_a_checkpoint -c tiny.conf").code == 2);
        CHECK(run(dir, "--help").code == 0);
    }

    SECTION("generate writes both splits at the requested scale") {
        const auto r = run(dir, "generate doublewell --scale 0.1 --seed 3");
        REQUIRE(r.code == 0);
        const auto train = dynsys::read_dataset(dir / "root" / "data" / "doublewell_train");
        const auto test = dynsys::read_dataset(dir / "root" / "data" / "doublewell_test");
        CHECK(train.length == 10000);
        CHECK(test.length == 10000);
        const auto before = io::read_file(dir / "root" / "data" / "doublewell_train.bin");
        CHECK(run(dir, "generate doublewell --scale 0.1 --seed 3").code == 1);  // append-only
        CHECK(run(dir, "generate doublewell --scale 0.1 --seed 3 --overwrite").code == 0);
        const bool same = io::read_file(dir / "root" / "data" / "doublewell_train.bin") == before;
        CHECK(same);
        CHECK(run(dir, "generate doublewell --scale 0").code == 2);
    }
    fs::remove_all(dir);
}

TEST_CASE("train, evaluate and analyse through the command line", "[cli]") {
    const auto dir = scratch("pipeline");
    write(dir / "tiny.conf", kTiny);

    auto r = run(dir, "train -c tiny.conf -o run1");
    REQUIRE(r.code == 0);
    for (const char* f : {"run.conf", "config.json", "loss_trace.csv", "checkpoints/ckpt_3/model.bin",
                          "checkpoints/ckpt_6/model.bin"})
        CHECK(fs::exists(dir / "run1" / f));
    const auto model = io::read_file(dir / "run1/checkpoints/ckpt_6/model.bin");

    // run directories are append-only
    CHECK(run(dir, "train -c tiny.conf -o run1").code == 1);
    REQUIRE(run(dir, "train -c tiny.conf -o run1 --overwrite").code == 0);
    bool same = io::read_file(dir / "run1/checkpoints/ckpt_6/model.bin") == model;
    CHECK(same);
    // the persisted configuration reproduces the run
    REQUIRE(run(dir, "train -c run1/run.conf -o run2").code == 0);
    same = io::read_file(dir / "run2/checkpoints/ckpt_6/model.bin") == model;
    CHECK(same);
    CHECK(io::read_file(dir / "run2/run.conf") == io::read_file(dir / "run1/run.conf"));

    // stored data generated under other settings is not silently reused
    CHECK(run(dir, "train -c tiny.conf -s data_scale=0.02 -o run3").code == 1);

    r = run(dir, "eval run1/checkpoints/ckpt_6");
    REQUIRE(r.code == 0);
    const auto eval_dir = dir / "run1/checkpoints/ckpt_6/eval";
    for (const char* f : {"evaluation.json", "evaluation.csv", "generated.csv", "timeseries.svg", "histogram.svg"})
        CHECK(fs::exists(eval_dir / f));
    const auto report = nlohmann::json::parse(io::read_file(eval_dir / "evaluation.json"));
    CHECK(report["checkpoint"] == 6);
    CHECK(report["generation_length"] == 600);
    CHECK(report["KL_eps"].get<double>() > 0.0);
    CHECK(run(dir, "eval run1/checkpoints/ckpt_6").code == 1);
    REQUIRE(run(dir, "eval run1/checkpoints/ckpt_6 --overwrite").code == 0);
    CHECK(nlohmann::json::parse(io::read_file(eval_dir / "evaluation.json")) == report);

    r = run(dir, "attractors run1/checkpoints/ckpt_6");
    REQUIRE(r.code == 0);
    const auto attr = nlohmann::json::parse(io::read_file(dir / "run1/checkpoints/ckpt_6/attractors/attractors.json"));
    double basin = 0.0;
    for (const auto& a : attr["attractors"]) basin += a["basin_fraction"].get<double>();
    if (attr["escaped"] != attr["initial_points"]) CHECK(basin == Catch::Approx(1.0));
    CHECK(attr["initial_points"] == 10);

    SECTION("SPDSR checkpoints report no noise usage") {
        REQUIRE(run(dir, "train -c tiny.conf -s variant=spdsr -o spdsr").code == 0);
        REQUIRE(run(dir, "eval spdsr/checkpoints/ckpt_6").code == 0);
        const auto j = nlohmann::json::parse(io::read_file(dir / "spdsr/checkpoints/ckpt_6/eval/evaluation.json"));
        CHECK(j["KL_eps"] == 0.0);
    }
    fs::remove_all(dir);
}

TEST_CASE("sweep and tau_opt through the command line", "[cli]") {
    const auto dir = scratch("sweep");
    write(dir / "tiny.conf", kTiny);
    auto r = run(dir, "sweep -c tiny.conf --workers 2 -o sw");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "sw/sweep_results.csv"));
    CHECK(fs::exists(dir / "sw/selection.json"));
    CHECK(std::distance(fs::directory_iterator(dir / "sw/runs"), fs::directory_iterator{}) == 3);
    CHECK(run(dir, "sweep -c tiny.conf -o sw").code == 1);

    r = run(dir, "tauopt sw");
    REQUIRE(r.code == 0);
    const auto curve = nlohmann::json::parse(io::read_file(dir / "sw/tauopt/taucurve.json"));
    CHECK(curve["tau"] == std::vector<double>{2, 5, 9});
    CHECK(curve["runs"].size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const double l = curve["lambda_max"][i].get<double>(), opt = curve["tau_opt"][i].get<double>();
        CHECK(opt == Catch::Approx(l > 0 ? std::min(200.0, std::log(2.0) / l) : 200.0));
    }
    const auto csv = io::read_file(dir / "sw/tauopt/taucurve.csv");
    CHECK(csv.rfind("tau,lambda_max,tau_opt\n", 0) == 0);
    CHECK(count(csv, "\n") == 4);

    // tau_opt needs a tau axis
    REQUIRE(run(dir, "sweep -c tiny.conf -s variant=arlstm -s grid_gamma=0 -s grid_t_pred=10 -o ar").code == 0);
    CHECK(run(dir, "tauopt ar").code == 2);
    fs::remove_all(dir);
}

TEST_CASE("default DPDSR grid produces 96 runs", "[cli]") {
    const auto dir = scratch("grid");
    write(dir / "minimal.conf", kMinimal);
    REQUIRE(run(dir, "sweep -c minimal.conf -o full").code == 0);
    CHECK(std::distance(fs::directory_iterator(dir / "full/runs"), fs::directory_iterator{}) == 96);
    CHECK(count(io::read_file(dir / "full/sweep_results.csv"), "\n") == 1 + 96);
    fs::remove_all(dir);
}
