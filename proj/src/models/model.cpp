#include "dpdsr/models/model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dpdsr/io/binary.hpp"

namespace dpdsr::models {

using nlohmann::json;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::dpdsr: return "dpdsr";
        case Variant::spdsr: return "spdsr";
        case Variant::dkf: return "dkf";
        case Variant::arlstm: return "arlstm";
    }
    return "unknown";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::dpdsr, Variant::spdsr, Variant::dkf, Variant::arlstm})
        if (to_string(v) == name) return v;
    throw std::invalid_argument("unknown model variant '" + name + "' (expected dpdsr, spdsr, dkf or arlstm)");
}

json ModelConfig::to_json() const {
    return {{"variant", to_string(variant)},
            {"d_x", d_x},
            {"d_z", d_z},
            {"d_zhat", variant == Variant::dpdsr || variant == Variant::spdsr ? generative().zhat_dim() : d_zhat},
            {"d_eps", d_eps},
            {"hidden", hidden},
            {"g_hidden", g_hidden},
            {"noise_gain", noise_gain},
            {"log_sigma_eps2", log_sigma_eps2},
            {"ar_hidden", ar_hidden},
            {"ar_init_hidden", ar_init_hidden},
            {"encoder",
             {{"channels", encoder.channels},
              {"kernel", encoder.kernel},
              {"layers", encoder.layers},
              {"lstm_hidden", encoder.lstm_hidden}}}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.d_x = j.value("d_x", c.d_x);
    c.d_z = j.value("d_z", c.d_z);
    c.d_zhat = j.value("d_zhat", c.d_zhat);
    c.d_eps = j.value("d_eps", c.d_eps);
    c.hidden = j.value("hidden", c.hidden);
    c.g_hidden = j.value("g_hidden", c.g_hidden);
    c.noise_gain = j.value("noise_gain", c.noise_gain);
    c.log_sigma_eps2 = j.value("log_sigma_eps2", c.log_sigma_eps2);
    c.ar_hidden = j.value("ar_hidden", c.ar_hidden);
    c.ar_init_hidden = j.value("ar_init_hidden", c.ar_init_hidden);
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        c.encoder.channels = e.value("channels", c.encoder.channels);
        c.encoder.kernel = e.value("kernel", c.encoder.kernel);
        c.encoder.layers = e.value("layers", c.encoder.layers);
        c.encoder.lstm_hidden = e.value("lstm_hidden", c.encoder.lstm_hidden);
    }
    return c;
}

GenerativeConfig ModelConfig::generative() const {
    GenerativeConfig g;
    g.d_x = d_x;
    g.d_z = d_z;
    g.d_zhat = d_zhat;
    g.d_eps = d_eps;
    g.hidden = hidden;
    g.g_hidden = g_hidden;
    g.noise_gain = noise_gain;
    g.stochastic = variant != Variant::spdsr;
    return g;
}

ParameterList Model::all_parameters() const {
    auto all = parameters();
    for (auto& p : causal_parameters()) all.push_back(std::move(p));
    return all;
}

// ---- DPDSR / SPDSR

DpdsrModel::DpdsrModel(const ModelConfig& config, Rng& rng) : config_(config) {
    const auto gc = config.generative();
    gen = GenerativeParams::make(gc, rng);
    state_encoder = StateEncoder::make(config.d_x, gc.zhat_dim(), config.encoder, false, rng);
    causal_encoder = StateEncoder::make(config.d_x, gc.zhat_dim(), config.encoder, true, rng);
    if (gc.stochastic) noise_encoder = NoiseEncoder::make(config.d_x, gc.zhat_dim(), gc.d_eps, config.encoder, rng);
}

ParameterList DpdsrModel::parameters() const {
    ParameterList out;
    gen.collect("generative", out);
    state_encoder.collect("state_encoder", out);
    if (noise_encoder) noise_encoder->collect("noise_encoder", out);
    return out;
}

ParameterList DpdsrModel::causal_parameters() const {
    ParameterList out;
    causal_encoder.collect("causal_encoder", out);
    return out;
}

ad::Tensor DpdsrModel::embed(const ad::Tensor& x) const { return gen.complete(state_encoder(x)); }

ad::Tensor DpdsrModel::causal_state(const ad::Tensor& x) const {
    return gen.complete(ad::select(causal_encoder(x), 1, x.dim(1) - 1));
}

ad::Tensor DpdsrModel::step(const ad::Tensor& z, const ad::Tensor& xi) const {
    return gen.evolve(z, noise_dim() ? xi : ad::Tensor{});
}

std::optional<ad::Tensor> DpdsrModel::causal_loss(const ad::Tensor& x) const {
    ad::Tensor target;
    {
        ad::NoGradGuard guard;
        target = state_encoder(x);
    }
    return ad::mean(ad::square(ad::sub(causal_encoder(x), target)));
}

// ---- DKF

DkfModel::DkfModel(const ModelConfig& config, Rng& rng) : config_(config) {
    DkfConfig dc;
    dc.d_x = config.d_x;
    dc.d_z = config.d_z;
    dc.hidden = config.hidden;
    dc.log_sigma_eps2 = config.log_sigma_eps2;
    dc.encoder = config.encoder;
    params = DkfParams::make(dc, rng);
    causal_encoder = StateEncoder::make(config.d_x, config.d_z, config.encoder, true, rng);
}

ParameterList DkfModel::parameters() const {
    ParameterList out;
    params.collect("dkf", out);
    return out;
}

ParameterList DkfModel::causal_parameters() const {
    ParameterList out;
    causal_encoder.collect("causal_encoder", out);
    return out;
}

ad::Tensor DkfModel::embed(const ad::Tensor& x) const { return ad::stack(dkf_posterior(x, params, {}).z, 1); }

ad::Tensor DkfModel::causal_state(const ad::Tensor& x) const {
    return ad::select(causal_encoder(x), 1, x.dim(1) - 1);
}

ad::Tensor DkfModel::step(const ad::Tensor& z, const ad::Tensor& xi) const {
    auto next = params.drift(z);
    if (!xi.defined()) return next;
    return ad::add(next, ad::mul(xi, ad::exp(ad::scale(params.log_sigma_eps2, 0.5))));
}

std::optional<ad::Tensor> DkfModel::causal_loss(const ad::Tensor& x) const {
    ad::Tensor target;
    {
        ad::NoGradGuard guard;
        target = embed(x);
    }
    return ad::mean(ad::square(ad::sub(causal_encoder(x), target)));
}

// ---- AR-LSTM

ArLstmModel::ArLstmModel(const ModelConfig& config, Rng& rng) : config_(config) {
    ArLstmConfig ac;
    ac.d_x = config.d_x;
    ac.hidden = config.ar_hidden;
    ac.code = config.d_z;
    ac.init_hidden = config.ar_init_hidden;
    ac.encoder = config.encoder;
    params = ArLstmParams::make(ac, rng);
}

ParameterList ArLstmModel::parameters() const {
    ParameterList out;
    params.collect("arlstm", out);
    return out;
}

std::size_t ArLstmModel::warmup(std::size_t length) const {
    if (length < 2) throw std::invalid_argument("arlstm: need at least two samples to embed");
    return std::min<std::size_t>(100, length - 1);
}

ad::Tensor ArLstmModel::embed(const ad::Tensor& x) const {
    const std::size_t steps = x.dim(1), h = config_.ar_hidden;
    const std::size_t w = warmup(steps);
    const auto init = params.initial_state(ad::slice(x, 1, 0, w));
    ad::LstmState s{ad::slice(init, 1, 0, h), ad::slice(init, 1, h, 2 * h)};
    // state at t: LSTM memory after inputs up to x_{t-1}, and x_t as the next input
    std::vector<ad::Tensor> states{ad::concat({s.h, s.c, ad::select(x, 1, w - 1)}, 1)};
    for (std::size_t t = w; t < steps; ++t) {
        s = ad::lstm_cell(s, ad::select(x, 1, t - 1), params.lstm);
        states.push_back(ad::concat({s.h, s.c, ad::select(x, 1, t)}, 1));
    }
    return ad::stack(states, 1);
}

ad::Tensor ArLstmModel::causal_state(const ad::Tensor& x) const {
    auto e = embed(x);
    return ad::select(e, 1, e.dim(1) - 1);
}

ad::Tensor ArLstmModel::observe(const ad::Tensor& z) const {
    const std::size_t h = config_.ar_hidden;
    return ad::slice(z, 1, 2 * h, 2 * h + config_.d_x);
}

// ---- factory and checkpoints

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t seed) {
    Rng rng = make_rng(seed, "model-init");
    switch (config.variant) {
        case Variant::dpdsr:
        case Variant::spdsr: return std::make_unique<DpdsrModel>(config, rng);
        case Variant::dkf: return std::make_unique<DkfModel>(config, rng);
        case Variant::arlstm: return std::make_unique<ArLstmModel>(config, rng);
    }
    throw std::invalid_argument("make_model: unknown variant");
}

namespace {

constexpr char kMagic[8] = {'D', 'P', 'D', 'S', 'R', 'C', 'K', '1'};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir, std::size_t iteration, std::uint64_t seed,
                     const json& extra) {
    const auto params = model.all_parameters();
    std::ostringstream blob;
    blob.write(kMagic, sizeof kMagic);
    io::write_u32(blob, static_cast<std::uint32_t>(params.size()));
    json tensors = json::array();
    for (const auto& p : params) {
        io::write_u32(blob, static_cast<std::uint32_t>(p.name.size()));
        blob.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        io::write_u32(blob, static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto d : p.tensor.shape()) io::write_u64(blob, d);
        io::write_f64(blob, p.tensor.data());
        tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    }
    const auto& c = model.config();
    json manifest = {{"variant", to_string(c.variant)},
                     {"d_z", c.d_z},
                     {"d_zhat", c.to_json().at("d_zhat")},
                     {"d_eps", c.d_eps},
                     {"config", c.to_json()},
                     {"iteration", iteration},
                     {"seed", seed},
                     {"tensors", tensors}};
    if (!extra.is_null()) manifest["extra"] = extra;
    io::atomic_write(dir / "model.bin", blob.str());
    io::atomic_write(dir / "model.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(io::read_file(dir / "model.json"));
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint " + dir.string() + ": malformed manifest: " + e.what());
    }
    Checkpoint ck;
    ck.model = make_model(ModelConfig::from_json(manifest.at("config")), 0);
    ck.iteration = manifest.value("iteration", std::size_t{0});
    ck.seed = manifest.value("seed", std::uint64_t{0});
    if (manifest.contains("extra")) ck.extra = manifest.at("extra");

    std::istringstream in(io::read_file(dir / "model.bin"));
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + sizeof magic, kMagic))
        throw std::runtime_error("checkpoint " + dir.string() + ": bad tensor file header");
    std::map<std::string, ad::Tensor> by_name;
    for (auto& p : ck.model->all_parameters()) by_name.emplace(p.name, p.tensor);
    const std::uint32_t count = io::read_u32(in);
    if (count != by_name.size())
        throw std::runtime_error("checkpoint " + dir.string() + ": expected " + std::to_string(by_name.size()) +
                                 " tensors, found " + std::to_string(count));
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(io::read_u32(in), '\0');
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
        ad::Shape shape(io::read_u32(in));
        for (auto& d : shape) d = io::read_u64(in);
        auto values = io::read_f64(in, ad::numel_of(shape));
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint " + dir.string() + ": unexpected tensor " + name);
        if (it->second.shape() != shape)
            throw std::runtime_error("checkpoint " + dir.string() + ": tensor " + name + " has shape " +
                                     ad::to_string(shape) + ", model expects " + ad::to_string(it->second.shape()));
        std::copy(values.begin(), values.end(), it->second.mutable_data().begin());
    }
    return ck;
}

void copy_parameters(const Model& from, Model& to) {
    const auto src = from.all_parameters();
    auto dst = to.all_parameters();
    if (src.size() != dst.size()) throw std::invalid_argument("copy_parameters: parameter lists differ");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].name != dst[i].name || src[i].tensor.shape() != dst[i].tensor.shape())
            throw std::invalid_argument("copy_parameters: mismatch at " + src[i].name);
        std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), dst[i].tensor.mutable_data().begin());
    }
}

}  // namespace dpdsr::models
