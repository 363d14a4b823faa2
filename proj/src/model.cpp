#include "puzzletune/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "puzzletune/error.hpp"
#include "puzzletune/ops.hpp"
#include "puzzletune/rng.hpp"
#include "puzzletune/tensor_io.hpp"

namespace puzzletune {

namespace {

constexpr double kEmbedStd = 0.02;

std::size_t hidden_width(std::size_t dim, double ratio) {
    return static_cast<std::size_t>(std::lround(static_cast<double>(dim) * ratio));
}

template <typename T>
T read_field(const nlohmann::json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) {
        return fallback;
    }
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, fmt::format("model config key '{}': {}", key, e.what()));
    }
}

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> out(end - begin);
    std::iota(out.begin(), out.end(), begin);
    return out;
}

// Repeats a [n, D] parameter across the batch as [B, n, D].
Tensor tile_batch(const Tensor& param, std::size_t batch) {
    Tensor lifted = ops::reshape(param, {1, param.dim(0), param.dim(1)});
    return ops::index_select(lifted, 0, std::vector<std::size_t>(batch, 0));
}

Tensor linear(const Checkpoint& ckpt, const std::string& prefix, const Tensor& x) {
    return ops::bias_add(ops::matmul(x, ckpt.at(prefix + ".weight")), ckpt.at(prefix + ".bias"));
}

Tensor norm(const Checkpoint& ckpt, const std::string& prefix, const Tensor& x) {
    return ops::layer_norm(x, ckpt.at(prefix + ".weight"), ckpt.at(prefix + ".bias"));
}

Tensor attention(const Checkpoint& ckpt, const std::string& prefix, const Tensor& x, std::size_t heads) {
    const std::size_t batch = x.dim(0);
    const std::size_t len = x.dim(1);
    const std::size_t dim = x.dim(2);
    const std::size_t head_dim = dim / heads;
    const std::size_t bh = batch * heads;

    Tensor qkv = linear(ckpt, prefix + ".qkv", x);
    qkv = ops::reshape(qkv, {batch, len, 3, heads, head_dim});
    qkv = ops::transpose(qkv, {2, 0, 3, 1, 4});
    qkv = ops::reshape(qkv, {3, bh, len, head_dim});
    const Tensor q = ops::reshape(ops::index_select(qkv, 0, {0}), {bh, len, head_dim});
    const Tensor k = ops::reshape(ops::index_select(qkv, 0, {1}), {bh, len, head_dim});
    const Tensor v = ops::reshape(ops::index_select(qkv, 0, {2}), {bh, len, head_dim});

    Tensor scores = ops::matmul(q, ops::transpose(k, {0, 2, 1}));
    scores = ops::scale(scores, 1.0 / std::sqrt(static_cast<double>(head_dim)));
    Tensor out = ops::matmul(ops::softmax(scores, 2), v);
    out = ops::reshape(out, {batch, heads, len, head_dim});
    out = ops::reshape(ops::transpose(out, {0, 2, 1, 3}), {batch, len, dim});
    return linear(ckpt, prefix + ".proj", out);
}

// Pre-norm transformer block.
Tensor block(const Checkpoint& ckpt, const std::string& prefix, const Tensor& x, std::size_t heads) {
    Tensor y = ops::add(x, attention(ckpt, prefix + ".attn", norm(ckpt, prefix + ".norm1", x), heads));
    Tensor h = ops::gelu(linear(ckpt, prefix + ".mlp.fc1", norm(ckpt, prefix + ".norm2", y)));
    return ops::add(y, linear(ckpt, prefix + ".mlp.fc2", h));
}

TokenSequence encode_layers(const Checkpoint& ckpt, const TokenSequence& seq, bool prompted) {
    const ModelConfig& cfg = ckpt.config;
    if (seq.stage != Stage::embedded) {
        fail(ErrorCode::ShapeMismatch, "encode expects an embedded token sequence");
    }
    if (seq.tokens.rank() != 3 || seq.tokens.dim(1) != 1 + cfg.token_count() || seq.tokens.dim(2) != cfg.enc_dim) {
        fail(ErrorCode::ShapeMismatch, "encode: token tensor " + to_string(seq.tokens.shape()));
    }
    const std::size_t batch = seq.tokens.dim(0);
    const std::size_t len = seq.tokens.dim(1);
    const bool with_prompts = prompted && cfg.prompt_count > 0;
    const auto keep = iota_indices(0, len);

    Tensor x = seq.tokens;
    for (std::size_t n = 0; n < cfg.enc_layers; ++n) {
        const std::string prefix = fmt::format("enc.{}", n);
        if (with_prompts) {
            Tensor prompts = tile_batch(ckpt.at(fmt::format("prompt.{}", n)), batch);
            x = block(ckpt, prefix, ops::concat({x, prompts}, 1), cfg.enc_heads);
            x = ops::index_select(x, 1, keep);
        } else {
            x = block(ckpt, prefix, x, cfg.enc_heads);
        }
    }
    return {norm(ckpt, "enc.norm", x), seq.roles, Stage::encoded};
}

void check_roles(const ModelConfig& cfg, const std::vector<TokenRole>& roles) {
    if (roles.size() != 1 + cfg.token_count() || roles.front() != TokenRole::cls ||
        std::count(roles.begin(), roles.end(), TokenRole::cls) != 1) {
        fail(ErrorCode::RoleMismatch, "role list must hold one leading cls and one role per token");
    }
}

void put_param(Checkpoint& ckpt, const std::string& name, Tensor value) { ckpt.params[name] = std::move(value); }

Tensor truncated(const Rng& rng, const std::string& name, Shape shape) {
    Rng r = rng.fork(name);
    std::vector<double> data(element_count(shape));
    for (auto& v : data) {
        v = r.truncated_normal(kEmbedStd);
    }
    return Tensor(std::move(shape), std::move(data));
}

// Xavier-scaled normal weight plus zero bias.
void put_linear(Checkpoint& ckpt, const Rng& rng, const std::string& prefix, std::size_t in, std::size_t out) {
    Rng r = rng.fork(prefix + ".weight");
    const double std = std::sqrt(2.0 / static_cast<double>(in + out));
    std::vector<double> data(in * out);
    for (auto& v : data) {
        v = r.normal() * std;
    }
    put_param(ckpt, prefix + ".weight", Tensor({in, out}, std::move(data)));
    put_param(ckpt, prefix + ".bias", Tensor::zeros({out}));
}

void put_norm(Checkpoint& ckpt, const std::string& prefix, std::size_t dim) {
    put_param(ckpt, prefix + ".weight", Tensor::full({dim}, 1.0));
    put_param(ckpt, prefix + ".bias", Tensor::zeros({dim}));
}

void put_block(Checkpoint& ckpt, const Rng& rng, const std::string& prefix, std::size_t dim, double ratio) {
    const std::size_t hidden = hidden_width(dim, ratio);
    put_norm(ckpt, prefix + ".norm1", dim);
    put_linear(ckpt, rng, prefix + ".attn.qkv", dim, 3 * dim);
    put_linear(ckpt, rng, prefix + ".attn.proj", dim, dim);
    put_norm(ckpt, prefix + ".norm2", dim);
    put_linear(ckpt, rng, prefix + ".mlp.fc1", dim, hidden);
    put_linear(ckpt, rng, prefix + ".mlp.fc2", hidden, dim);
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

void ModelConfig::validate() const {
    if (token_patch == 0 || image_side == 0 || image_side % token_patch != 0) {
        fail(ErrorCode::IndivisibleTokenPatch,
             fmt::format("token patch {} does not divide image side {}", token_patch, image_side));
    }
    if (enc_layers == 0 || enc_dim == 0 || enc_heads == 0 || enc_dim % enc_heads != 0) {
        fail(ErrorCode::ConfigError, "encoder needs at least one layer and enc_dim divisible by enc_heads");
    }
    if (dec_dim == 0 || dec_heads == 0 || dec_dim % dec_heads != 0) {
        fail(ErrorCode::ConfigError, "dec_dim must be divisible by dec_heads");
    }
    if (!(mlp_ratio > 0.0) || hidden_width(std::min(enc_dim, dec_dim), mlp_ratio) == 0) {
        fail(ErrorCode::ConfigError, "mlp_ratio must give a non-empty hidden layer");
    }
}

nlohmann::json ModelConfig::to_json() const {
    return {{"image_side", image_side}, {"token_patch", token_patch}, {"enc_layers", enc_layers},
            {"enc_dim", enc_dim},       {"enc_heads", enc_heads},     {"prompt_count", prompt_count},
            {"dec_layers", dec_layers}, {"dec_dim", dec_dim},         {"dec_heads", dec_heads},
            {"mlp_ratio", mlp_ratio}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        fail(ErrorCode::ConfigError, "model config must be a JSON object");
    }
    ModelConfig cfg;
    const auto known = cfg.to_json();
    for (const auto& item : doc.items()) {
        if (!known.contains(item.key())) {
            fail(ErrorCode::ConfigError, "unknown model config key '" + item.key() + "'");
        }
    }
    cfg.image_side = read_field(doc, "image_side", cfg.image_side);
    cfg.token_patch = read_field(doc, "token_patch", cfg.token_patch);
    cfg.enc_layers = read_field(doc, "enc_layers", cfg.enc_layers);
    cfg.enc_dim = read_field(doc, "enc_dim", cfg.enc_dim);
    cfg.enc_heads = read_field(doc, "enc_heads", cfg.enc_heads);
    cfg.prompt_count = read_field(doc, "prompt_count", cfg.prompt_count);
    cfg.dec_layers = read_field(doc, "dec_layers", cfg.dec_layers);
    cfg.dec_dim = read_field(doc, "dec_dim", cfg.dec_dim);
    cfg.dec_heads = read_field(doc, "dec_heads", cfg.dec_heads);
    cfg.mlp_ratio = read_field(doc, "mlp_ratio", cfg.mlp_ratio);
    cfg.validate();
    return cfg;
}

std::string ModelConfig::hash() const { return fmt::format("{:016x}", fnv1a64(to_json().dump())); }

std::vector<TokenRole> token_roles(const ModelConfig& cfg, const PatchGrid& puzzle_grid,
                                   const std::vector<bool>& fix_mask) {
    const std::size_t p = puzzle_grid.patch_size;
    if (p == 0 || p % cfg.token_patch != 0) {
        fail(ErrorCode::IndivisibleTokenPatch,
             fmt::format("puzzle patch {} is not a multiple of token patch {}", p, cfg.token_patch));
    }
    if (puzzle_grid.rows * p != cfg.image_side || puzzle_grid.cols * p != cfg.image_side ||
        fix_mask.size() != puzzle_grid.locations()) {
        fail(ErrorCode::ShapeMismatch, "puzzle grid does not tile the model's image side");
    }
    const std::size_t side = cfg.tokens_per_side();
    const std::size_t per = p / cfg.token_patch;
    std::vector<TokenRole> roles{TokenRole::cls};
    roles.reserve(1 + cfg.token_count());
    for (std::size_t ty = 0; ty < side; ++ty) {
        for (std::size_t tx = 0; tx < side; ++tx) {
            const std::size_t loc = (ty / per) * puzzle_grid.cols + tx / per;
            roles.push_back(fix_mask[loc] ? TokenRole::position : TokenRole::relation);
        }
    }
    return roles;
}

std::vector<TokenRole> plain_roles(const ModelConfig& cfg) {
    std::vector<TokenRole> roles(1 + cfg.token_count(), TokenRole::relation);
    roles.front() = TokenRole::cls;
    return roles;
}

const char* to_string(TrainMode mode) noexcept { return mode == TrainMode::prompt ? "prompt" : "full"; }

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "prompt") {
        return TrainMode::prompt;
    }
    if (name == "full") {
        return TrainMode::full;
    }
    fail(ErrorCode::ConfigError, "unknown training mode '" + name + "'");
}

const Tensor& Checkpoint::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) {
        fail(ErrorCode::ConfigError, "checkpoint has no parameter '" + name + "'");
    }
    return it->second;
}

bool Checkpoint::is_trainable(const std::string& name) const {
    return std::binary_search(trainable.begin(), trainable.end(), name);
}

void Checkpoint::set_mode(TrainMode mode) {
    trainable.clear();
    for (auto& [name, tensor] : params) {
        const bool train = mode == TrainMode::full || starts_with(name, "prompt.") || starts_with(name, "dec.") ||
                           starts_with(name, "head.");
        tensor.set_requires_grad(train);
        if (train) {
            trainable.push_back(name);
        }
    }
}

std::vector<Tensor> Checkpoint::trainable_params() const {
    std::vector<Tensor> out;
    for (const auto& name : trainable) {
        out.push_back(at(name));
    }
    return out;
}

std::size_t Checkpoint::parameter_count() const {
    std::size_t total = 0;
    for (const auto& [name, tensor] : params) {
        total += tensor.numel();
    }
    return total;
}

Checkpoint Checkpoint::clone() const {
    Checkpoint copy = *this;
    for (auto& [name, tensor] : copy.params) {
        const bool flag = tensor.requires_grad();
        tensor = tensor.clone();
        tensor.set_requires_grad(flag);
    }
    return copy;
}

Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed, TrainMode mode) {
    cfg.validate();
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.seed = seed;
    const Rng rng = Rng(seed).fork("init");
    const std::size_t m = cfg.token_count();

    put_linear(ckpt, rng, "embed", cfg.pixels_per_token(), cfg.enc_dim);
    put_param(ckpt, "embed.pos", truncated(rng, "embed.pos", {m, cfg.enc_dim}));
    put_param(ckpt, "embed.cls", truncated(rng, "embed.cls", {1, cfg.enc_dim}));
    for (std::size_t n = 0; n < cfg.enc_layers; ++n) {
        put_block(ckpt, rng, fmt::format("enc.{}", n), cfg.enc_dim, cfg.mlp_ratio);
        if (cfg.prompt_count > 0) {
            const std::string name = fmt::format("prompt.{}", n);
            put_param(ckpt, name, truncated(rng, name, {cfg.prompt_count, cfg.enc_dim}));
        }
    }
    put_norm(ckpt, "enc.norm", cfg.enc_dim);

    put_linear(ckpt, rng, "dec.proj", cfg.enc_dim, cfg.dec_dim);
    put_param(ckpt, "dec.pos", truncated(rng, "dec.pos", {m, cfg.dec_dim}));
    for (std::size_t n = 0; n < cfg.dec_layers; ++n) {
        put_block(ckpt, rng, fmt::format("dec.{}", n), cfg.dec_dim, cfg.mlp_ratio);
    }
    put_norm(ckpt, "dec.norm", cfg.dec_dim);
    put_param(ckpt, "head.weight", Tensor::zeros({cfg.dec_dim, cfg.pixels_per_token()}));
    put_param(ckpt, "head.bias", Tensor::zeros({cfg.pixels_per_token()}));

    ckpt.set_mode(mode);
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "params", ec);
    if (ec) {
        fail(ErrorCode::IoError, "cannot create " + (dir / "params").string() + ": " + ec.message());
    }
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [name, tensor] : ckpt.params) {
        const std::string file = "params/" + name + ".ptnsr";
        tensor_io::write_file(dir / file, tensor);
        entries.push_back({{"name", name}, {"shape", tensor.shape()}, {"trainable", ckpt.is_trainable(name)},
                           {"file", file}});
    }
    const nlohmann::json manifest = {{"config", ckpt.config.to_json()},
                                     {"config_hash", ckpt.config.hash()},
                                     {"epoch", ckpt.epoch},
                                     {"seed", ckpt.seed},
                                     {"params", entries}};
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + (dir / "manifest.json").string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + (dir / "manifest.json").string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FileFormatError, std::string("manifest.json: ") + e.what());
    }
    Checkpoint ckpt;
    try {
        ckpt.config = ModelConfig::from_json(manifest.at("config"));
        if (manifest.at("config_hash").get<std::string>() != ckpt.config.hash()) {
            fail(ErrorCode::FileFormatError, "manifest config hash does not match its config");
        }
        ckpt.epoch = manifest.at("epoch").get<std::size_t>();
        ckpt.seed = manifest.at("seed").get<std::uint64_t>();
        for (const auto& entry : manifest.at("params")) {
            const auto name = entry.at("name").get<std::string>();
            Tensor tensor = tensor_io::read_file(dir / entry.at("file").get<std::string>());
            if (tensor.shape() != entry.at("shape").get<Shape>()) {
                fail(ErrorCode::FileFormatError, "parameter '" + name + "' shape differs from manifest");
            }
            const bool train = entry.at("trainable").get<bool>();
            tensor.set_requires_grad(train);
            if (train) {
                ckpt.trainable.push_back(name);
            }
            ckpt.params[name] = tensor;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FileFormatError, std::string("manifest.json: ") + e.what());
    }
    std::sort(ckpt.trainable.begin(), ckpt.trainable.end());
    // Every parameter the architecture needs must be present.
    const Checkpoint reference = init_checkpoint(ckpt.config, 0, TrainMode::full);
    for (const auto& [name, tensor] : reference.params) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end() || it->second.shape() != tensor.shape()) {
            fail(ErrorCode::FileFormatError, "checkpoint is missing or misshapes parameter '" + name + "'");
        }
    }
    return ckpt;
}

TokenSequence embed(const Checkpoint& ckpt, const Tensor& images, std::vector<TokenRole> roles) {
    const ModelConfig& cfg = ckpt.config;
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg.image_side ||
        images.dim(3) != cfg.image_side) {
        fail(ErrorCode::ShapeMismatch, fmt::format("embed expects [B,3,{0},{0}], got {1}", cfg.image_side,
                                                   to_string(images.shape())));
    }
    check_roles(cfg, roles);
    const std::size_t batch = images.dim(0);
    auto [grid, tiles] = patchify(images, cfg.token_patch);
    Tensor tokens = ops::reshape(tiles, {batch, grid.locations(), cfg.pixels_per_token()});
    tokens = ops::bias_add(linear(ckpt, "embed", tokens), ckpt.at("embed.pos"));
    tokens = ops::concat({tile_batch(ckpt.at("embed.cls"), batch), tokens}, 1);
    return {tokens, std::move(roles), Stage::embedded};
}

TokenSequence encode(const Checkpoint& ckpt, const TokenSequence& seq) { return encode_layers(ckpt, seq, true); }

TokenSequence encode_plain(const Checkpoint& ckpt, const TokenSequence& seq) {
    return encode_layers(ckpt, seq, false);
}

TokenSequence apply_positional_hint(const TokenSequence& encoded, const TokenSequence& embedded) {
    if (encoded.roles != embedded.roles || encoded.tokens.shape() != embedded.tokens.shape() ||
        embedded.stage != Stage::embedded || encoded.stage == Stage::embedded) {
        fail(ErrorCode::RoleMismatch, "positional hint needs an encoded and an embedded sequence with equal roles");
    }
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < encoded.roles.size(); ++i) {
        if (encoded.roles[i] == TokenRole::position) {
            positions.push_back(i);
        }
    }
    if (positions.empty()) {
        return {encoded.tokens, encoded.roles, Stage::hinted};
    }
    Tensor hinted = ops::index_assign(encoded.tokens, 1, positions, ops::index_select(embedded.tokens, 1, positions));
    return {hinted, encoded.roles, Stage::hinted};
}

Tensor decode(const Checkpoint& ckpt, const TokenSequence& hinted) {
    const ModelConfig& cfg = ckpt.config;
    if (hinted.stage != Stage::hinted) {
        fail(ErrorCode::ShapeMismatch, "decode expects a hinted token sequence");
    }
    if (hinted.tokens.rank() != 3 || hinted.tokens.dim(1) != 1 + cfg.token_count() ||
        hinted.tokens.dim(2) != cfg.enc_dim) {
        fail(ErrorCode::ShapeMismatch, "decode: token tensor " + to_string(hinted.tokens.shape()));
    }
    const std::size_t batch = hinted.tokens.dim(0);
    const std::size_t m = cfg.token_count();
    Tensor x = ops::index_select(hinted.tokens, 1, iota_indices(1, 1 + m));
    x = ops::bias_add(linear(ckpt, "dec.proj", x), ckpt.at("dec.pos"));
    for (std::size_t n = 0; n < cfg.dec_layers; ++n) {
        x = block(ckpt, fmt::format("dec.{}", n), x, cfg.dec_heads);
    }
    x = linear(ckpt, "head", norm(ckpt, "dec.norm", x));
    x = ops::reshape(x, {batch, m, 3, cfg.token_patch, cfg.token_patch});
    return unpatchify(x, cfg.token_grid());
}

ForwardPass restore_forward(const Checkpoint& ckpt, const Tensor& puzzle, std::vector<TokenRole> roles) {
    ForwardPass pass;
    pass.embedded = embed(ckpt, puzzle, std::move(roles));
    pass.encoded = encode(ckpt, pass.embedded);
    pass.hinted = apply_positional_hint(pass.encoded, pass.embedded);
    pass.restored = decode(ckpt, pass.hinted);
    return pass;
}

Tensor cls_features(const Checkpoint& ckpt, const Tensor& images) {
    NoGradGuard guard;
    const TokenSequence encoded = encode(ckpt, embed(ckpt, images, plain_roles(ckpt.config)));
    return ops::reshape(ops::index_select(encoded.tokens, 1, {0}), {images.dim(0), ckpt.config.enc_dim});
}

}  // namespace puzzletune
