#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "puzzletune/puzzle.hpp"
#include "puzzletune/tensor.hpp"

namespace puzzletune {

struct ModelConfig {
    std::size_t image_side = 32;
    std::size_t token_patch = 4;
    std::size_t enc_layers = 2;
    std::size_t enc_dim = 32;
    std::size_t enc_heads = 2;
    std::size_t prompt_count = 4;
    std::size_t dec_layers = 1;
    std::size_t dec_dim = 32;
    std::size_t dec_heads = 2;
    double mlp_ratio = 2.0;

    void validate() const;
    std::size_t tokens_per_side() const noexcept { return image_side / token_patch; }
    std::size_t token_count() const noexcept { return tokens_per_side() * tokens_per_side(); }
    std::size_t pixels_per_token() const noexcept { return 3 * token_patch * token_patch; }
    PatchGrid token_grid() const noexcept { return {token_patch, tokens_per_side(), tokens_per_side()}; }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& doc);
    // Hex digest of the canonical JSON form.
    std::string hash() const;
};

enum class TokenRole { cls, position, relation };
enum class Stage { embedded, encoded, hinted };

struct TokenSequence {
    Tensor tokens;  // [B, 1 + m, D]
    std::vector<TokenRole> roles;
    Stage stage = Stage::embedded;
};

// Index 0 is cls; token t inherits the role of the puzzle patch containing it.
std::vector<TokenRole> token_roles(const ModelConfig& cfg, const PatchGrid& puzzle_grid,
                                   const std::vector<bool>& fix_mask);
// Every token marked relation; used when no puzzle is involved.
std::vector<TokenRole> plain_roles(const ModelConfig& cfg);

enum class TrainMode { prompt, full };

const char* to_string(TrainMode mode) noexcept;
TrainMode train_mode_from_string(const std::string& name);

struct Checkpoint {
    ModelConfig config;
    std::map<std::string, Tensor> params;
    std::vector<std::string> trainable;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;

    const Tensor& at(const std::string& name) const;
    bool is_trainable(const std::string& name) const;
    // Recomputes the trainable set and the requires_grad flags.
    void set_mode(TrainMode mode);
    std::vector<Tensor> trainable_params() const;
    std::size_t parameter_count() const;
    // Deep copy; plain copies share parameter storage.
    Checkpoint clone() const;
};

Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed, TrainMode mode);

// Directory with manifest.json and params/<name>.ptnsr.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

TokenSequence embed(const Checkpoint& ckpt, const Tensor& images, std::vector<TokenRole> roles);
// Deep-prompted encoder: layer n sees [sequence, P_n] and its prompt outputs are dropped.
TokenSequence encode(const Checkpoint& ckpt, const TokenSequence& seq);
// Same weights, no prompts.
TokenSequence encode_plain(const Checkpoint& ckpt, const TokenSequence& seq);
// Position-role tokens of `encoded` are replaced by their stage-0 embeddings.
TokenSequence apply_positional_hint(const TokenSequence& encoded, const TokenSequence& embedded);
// Drops cls and maps the m tokens back to [B, 3, h, w].
Tensor decode(const Checkpoint& ckpt, const TokenSequence& hinted);

struct ForwardPass {
    TokenSequence embedded;
    TokenSequence encoded;
    TokenSequence hinted;
    Tensor restored;
};

ForwardPass restore_forward(const Checkpoint& ckpt, const Tensor& puzzle, std::vector<TokenRole> roles);

// Encoded cls token per image, [B, D], computed without recording gradients.
Tensor cls_features(const Checkpoint& ckpt, const Tensor& images);

}  // namespace puzzletune
