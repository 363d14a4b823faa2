#include "puzzletune/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>

#include <fmt/core.h>

#include "puzzletune/curriculum.hpp"
#include "puzzletune/datagen.hpp"
#include "puzzletune/error.hpp"
#include "puzzletune/gradcheck.hpp"
#include "puzzletune/model.hpp"
#include "puzzletune/ops.hpp"
#include "puzzletune/puzzle.hpp"
#include "puzzletune/trainer.hpp"

namespace puzzletune::acceptance {

namespace {

constexpr std::size_t kPuzzleCases = 100;
constexpr double kPuzzleBudgetSeconds = 10.0;
constexpr std::size_t kEquivalenceTrials = 10;
constexpr double kRelationGradientShare = 0.99;
constexpr std::size_t kFreezeSteps = 50;
constexpr double kFreezeChangedShare = 0.99;
constexpr double kFreezeBudgetSeconds = 60.0;
constexpr std::size_t kGradCoordinates = 200;
constexpr double kGradEps = 1e-4;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 300.0;
constexpr std::size_t kOverfitSteps = 500;
constexpr double kOverfitFactor = 0.1;
constexpr std::size_t kOverfitTail = 10;
constexpr double kOverfitBudgetSeconds = 600.0;
constexpr std::size_t kProbeSeeds = 3;
// Warm-up included.
constexpr std::size_t kProbeEpochs = 30;
constexpr double kProbeGain = 0.15;
constexpr double kProbeBudgetSeconds = 1800.0;

struct PuzzleCase {
    std::size_t batch;
    std::size_t group;
    std::size_t side;
    std::size_t patch;
    double ratio;
    std::uint64_t seed;
};

template <typename T>
T pick(Rng& rng, std::initializer_list<T> values) {
    return *(values.begin() + static_cast<std::ptrdiff_t>(rng.below(values.size())));
}

// B in {4,8,16}, G in {1,2,4}, side in {32,64}, P in {4,8,16,32} with at
// least two locations, ratio in [0.2, 0.9].
std::vector<PuzzleCase> puzzle_cases(std::uint64_t seed) {
    Rng rng = Rng(seed).fork("puzzle-cases");
    std::vector<PuzzleCase> cases;
    while (cases.size() < kPuzzleCases) {
        PuzzleCase c{};
        c.batch = pick<std::size_t>(rng, {4, 8, 16});
        c.group = pick<std::size_t>(rng, {1, 2, 4});
        c.side = pick<std::size_t>(rng, {32, 64});
        c.patch = pick<std::size_t>(rng, {4, 8, 16, 32});
        c.ratio = rng.uniform(0.2, 0.9);
        c.seed = rng.next_u64();
        if (c.patch < c.side) {
            cases.push_back(c);
        }
    }
    return cases;
}

struct ShuffledCase {
    Tensor patches;
    PuzzleSpec spec;
    PuzzleResult result;
};

ShuffledCase shuffle_case(const PuzzleCase& c) {
    Rng rng(c.seed);
    std::vector<double> pixels(c.batch * 3 * c.side * c.side);
    for (auto& v : pixels) {
        v = rng.uniform();
    }
    const Tensor images({c.batch, 3, c.side, c.side}, std::move(pixels));
    auto [grid, patches] = patchify(images, c.patch);
    Rng fix = rng.fork("fix");
    auto spec = assign_fix_positions(grid, c.ratio, c.group, PuzzleMode::shuffle, fix);
    auto result = shuffle_in_place(patches, spec, rng.fork("shuffle"));
    return {patches, spec, std::move(result)};
}

std::vector<double> patch_at(const Tensor& patches, std::size_t bag, std::size_t loc) {
    const std::size_t m = patches.dim(1);
    const std::size_t len = patches.numel() / (patches.dim(0) * m);
    auto begin = patches.data().begin() + static_cast<std::ptrdiff_t>((bag * m + loc) * len);
    return {begin, begin + static_cast<std::ptrdiff_t>(len)};
}

}  // namespace

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.image_side = 16;
    cfg.token_patch = 4;
    cfg.enc_layers = 2;
    cfg.enc_dim = 16;
    cfg.enc_heads = 2;
    cfg.prompt_count = 2;
    cfg.dec_layers = 1;
    cfg.dec_dim = 16;
    cfg.dec_heads = 2;
    return cfg;
}

namespace {

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.image_side = 32;
    cfg.token_patch = 4;
    cfg.enc_layers = 2;
    cfg.enc_dim = 32;
    cfg.enc_heads = 2;
    cfg.prompt_count = 4;
    cfg.dec_layers = 1;
    cfg.dec_dim = 32;
    cfg.dec_heads = 2;
    return cfg;
}

// Moves every parameter off its structured initial value (zero head, unit
// norms) so no gradient path is trivially zero.
void perturb(Checkpoint& ckpt, std::uint64_t seed) {
    Rng rng = Rng(seed).fork("perturb");
    for (auto& [name, tensor] : ckpt.params) {
        for (auto& v : tensor.mutable_data()) {
            v += rng.uniform(-0.2, 0.2);
        }
    }
}

Tensor synthetic_images(std::size_t count, std::size_t side, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.class_count = 4;
    spec.per_class = (count + 3) / 4;
    spec.side = side;
    spec.seed = seed;
    const auto corpus = generate(spec);
    std::vector<std::size_t> idx;
    // Interleave classes so a small batch sees all of them.
    for (std::size_t i = 0; i < count; ++i) {
        idx.push_back((i % 4) * spec.per_class + i / 4);
    }
    return ops::index_select(corpus.images, 0, idx);
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::optional<std::string> first_tree_difference(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::vector<std::filesystem::path> files_a;
    std::vector<std::filesystem::path> files_b;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) {
            files_a.push_back(std::filesystem::relative(e.path(), a));
        }
    }
    for (const auto& e : std::filesystem::recursive_directory_iterator(b)) {
        if (e.is_regular_file()) {
            files_b.push_back(std::filesystem::relative(e.path(), b));
        }
    }
    std::sort(files_a.begin(), files_a.end());
    std::sort(files_b.begin(), files_b.end());
    if (files_a != files_b) {
        return "file lists differ";
    }
    for (const auto& rel : files_a) {
        if (file_bytes(a / rel) != file_bytes(b / rel)) {
            return rel.string();
        }
    }
    return std::nullopt;
}

std::filesystem::path scratch(const Options& options, const std::string& name) {
    const auto base = options.work_dir.empty() ? std::filesystem::temp_directory_path() / "puzzletune_acceptance"
                                               : options.work_dir;
    const auto dir = base / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

Result round_trip(const Options& options) {
    const auto start = std::chrono::steady_clock::now();
    std::size_t exact = 0;
    for (const auto& c : puzzle_cases(options.seed)) {
        const auto s = shuffle_case(c);
        exact += restore(s.result.puzzle, s.result.record).patches.bit_equal(s.patches) ? 1 : 0;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {"", exact == kPuzzleCases && secs < kPuzzleBudgetSeconds,
            fmt::format("{}/{} configs restored bit-exactly in {:.2f}s (budget {:.0f}s)", exact, kPuzzleCases, secs,
                        kPuzzleBudgetSeconds)};
}

Result in_place(const Options& options) {
    std::size_t good = 0;
    for (const auto& c : puzzle_cases(options.seed)) {
        const auto s = shuffle_case(c);
        const Tensor& after = s.result.puzzle;
        bool ok = true;
        const std::size_t m = s.spec.fix_mask.size();
        for (std::size_t g = 0; g < c.batch / c.group && ok; ++g) {
            for (std::size_t x = 0; x < m && ok; ++x) {
                std::vector<std::vector<double>> before_set;
                std::vector<std::vector<double>> after_set;
                for (std::size_t j = 0; j < c.group; ++j) {
                    before_set.push_back(patch_at(s.patches, g * c.group + j, x));
                    after_set.push_back(patch_at(after, g * c.group + j, x));
                    if (s.spec.fix_mask[x] && before_set.back() != after_set.back()) {
                        ok = false;
                    }
                }
                std::sort(before_set.begin(), before_set.end());
                std::sort(after_set.begin(), after_set.end());
                ok = ok && before_set == after_set;
            }
        }
        good += ok ? 1 : 0;
    }
    return {"", good == kPuzzleCases,
            fmt::format("{}/{} configs keep per-location multisets and fixed patches", good, kPuzzleCases)};
}

Result scheduler(const Options&) {
    const auto state = describe_variant("base", 180);
    bool ok = fix_ratio_at(state, 0) == 0.9 && fix_ratio_at(state, 179) == 0.2 &&
              fmt::format("{:.6f}", fix_ratio_at(state, 0)) == "0.900000" &&
              fmt::format("{:.6f}", fix_ratio_at(state, 179)) == "0.200000";
    std::size_t violations = 0;
    for (std::size_t e = 0; e < 180; ++e) {
        if (e > 0 && fix_ratio_at(state, e) > fix_ratio_at(state, e - 1)) {
            ++violations;
        }
        if (patch_size_at(state, e) != kPatchLoop[e % kPatchLoop.size()]) {
            ++violations;
        }
    }
    ok = ok && violations == 0;
    return {"", ok,
            fmt::format("f_0={:.6f} f_179={:.6f}, {} monotonicity/cycle violations", fix_ratio_at(state, 0),
                        fix_ratio_at(state, 179), violations)};
}

Result prompt_reduction(const Options& options) {
    ModelConfig cfg = small_model();
    cfg.prompt_count = 0;
    auto ckpt = init_checkpoint(cfg, options.seed, TrainMode::full);
    perturb(ckpt, options.seed);
    Rng rng = Rng(options.seed).fork("A4");
    std::size_t identical = 0;
    for (std::size_t t = 0; t < kEquivalenceTrials; ++t) {
        std::vector<double> pixels(2 * 3 * cfg.image_side * cfg.image_side);
        for (auto& v : pixels) {
            v = rng.uniform();
        }
        const Tensor images({2, 3, cfg.image_side, cfg.image_side}, std::move(pixels));
        NoGradGuard guard;
        const auto seq = embed(ckpt, images, plain_roles(cfg));
        identical += encode(ckpt, seq).tokens.bit_equal(encode_plain(ckpt, seq).tokens) ? 1 : 0;
    }
    return {"", identical == kEquivalenceTrials,
            fmt::format("{}/{} inputs bit-identical between prompted (0 prompts) and plain encoder", identical,
                        kEquivalenceTrials)};
}

Result hint_correctness(const Options& options) {
    const ModelConfig cfg = small_model();
    auto ckpt = init_checkpoint(cfg, options.seed, TrainMode::prompt);
    perturb(ckpt, options.seed);
    Rng rng = Rng(options.seed).fork("A5");
    std::size_t checked = 0;
    std::size_t mismatched = 0;
    for (std::size_t t = 0; t < kEquivalenceTrials; ++t) {
        const Tensor originals = synthetic_images(4, cfg.image_side, rng.next_u64());
        const std::size_t patch = t % 2 == 0 ? 8 : 16;
        const auto puzzle =
            make_training_puzzle(cfg, originals, patch, rng.uniform(0.2, 0.9), 2, PuzzleMode::shuffle, rng.fork("p", t));
        NoGradGuard guard;
        const auto pass = restore_forward(ckpt, puzzle.images, puzzle.roles);
        const std::size_t len = pass.hinted.tokens.dim(1);
        const std::size_t dim = pass.hinted.tokens.dim(2);
        for (std::size_t b = 0; b < 4; ++b) {
            for (std::size_t i = 0; i < len; ++i) {
                if (puzzle.roles[i] != TokenRole::position) {
                    continue;
                }
                ++checked;
                const std::size_t at = (b * len + i) * dim;
                mismatched += std::equal(pass.hinted.tokens.data().begin() + static_cast<std::ptrdiff_t>(at),
                                         pass.hinted.tokens.data().begin() + static_cast<std::ptrdiff_t>(at + dim),
                                         pass.embedded.tokens.data().begin() + static_cast<std::ptrdiff_t>(at))
                                  ? 0
                                  : 1;
            }
        }
    }
    return {"", mismatched == 0 && checked > 0,
            fmt::format("{} position tokens checked over {} passes, {} differ from stage-0 embeddings", checked,
                        kEquivalenceTrials, mismatched)};
}

Result masked_gradient(const Options& options, PuzzleMode task) {
    const ModelConfig cfg = tiny_model();
    auto ckpt = init_checkpoint(cfg, options.seed, TrainMode::full);
    perturb(ckpt, options.seed);
    const Tensor originals = synthetic_images(4, cfg.image_side, options.seed);
    const auto puzzle =
        make_training_puzzle(cfg, originals, 8, 0.5, 2, task, Rng(options.seed).fork("A6"));
    Tensor restored;
    {
        NoGradGuard guard;
        restored = restore_forward(ckpt, puzzle.images, puzzle.roles).restored;
    }
    restored.set_requires_grad(true);
    backward(restoration_loss(restored, originals, puzzle.spec, puzzle.grid));
    const Tensor grad(restored.shape(), restored.grad());
    auto [grid, patches] = patchify(grad, puzzle.grid.patch_size);
    const std::size_t m = grid.locations();
    const std::size_t len = patches.numel() / (patches.dim(0) * m);
    std::size_t position_nonzero = 0;
    std::size_t relation_total = 0;
    std::size_t relation_nonzero = 0;
    for (std::size_t b = 0; b < patches.dim(0); ++b) {
        for (std::size_t x = 0; x < m; ++x) {
            for (std::size_t e = 0; e < len; ++e) {
                const double g = patches.data()[(b * m + x) * len + e];
                if (puzzle.spec.fix_mask[x]) {
                    position_nonzero += g != 0.0 ? 1 : 0;
                } else {
                    ++relation_total;
                    relation_nonzero += g != 0.0 ? 1 : 0;
                }
            }
        }
    }
    const double share = static_cast<double>(relation_nonzero) / static_cast<double>(relation_total);
    return {"", position_nonzero == 0 && share >= kRelationGradientShare,
            fmt::format("{} nonzero position-pixel gradients, {:.4f} of relation pixels nonzero (need {:.2f})",
                        position_nonzero, share, kRelationGradientShare)};
}

Result freezing(const Options& options, PuzzleMode task) {
    const auto start = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.mode = TrainMode::prompt;
    cfg.task = task;
    cfg.epochs = kFreezeSteps;
    cfg.batch_size = 8;
    cfg.group_size = 4;
    cfg.base_lr = 1e-3;
    cfg.variant = "custom";
    cfg.patch_cycle = {8};
    cfg.checkpoint_every = 0;
    cfg.seed = options.seed;
    const Tensor images = synthetic_images(8, cfg.model.image_side, options.seed);
    const Checkpoint before = init_checkpoint(cfg.model, cfg.seed, cfg.mode);
    const auto result = train(cfg, images, "");
    std::size_t frozen_changed = 0;
    std::size_t trainable_total = 0;
    std::size_t trainable_changed = 0;
    for (const auto& [name, tensor] : result.checkpoint.params) {
        const auto now = tensor.data();
        const auto old = before.at(name).data();
        if (result.checkpoint.is_trainable(name)) {
            trainable_total += now.size();
            for (std::size_t i = 0; i < now.size(); ++i) {
                trainable_changed += now[i] != old[i] ? 1 : 0;
            }
        } else if (!std::equal(now.begin(), now.end(), old.begin())) {
            ++frozen_changed;
        }
    }
    const double share = static_cast<double>(trainable_changed) / static_cast<double>(trainable_total);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {"", frozen_changed == 0 && share >= kFreezeChangedShare && secs < kFreezeBudgetSeconds &&
                    result.reports.size() == kFreezeSteps,
            fmt::format("{} steps, {} frozen tensors changed, {:.4f} of prompt/decoder/head values changed (budget {:.0f}s)",
                        result.reports.size(), frozen_changed, share, kFreezeBudgetSeconds)};
}

Result gradient_oracle(const Options& options, PuzzleMode task) {
    const auto start = std::chrono::steady_clock::now();
    const ModelConfig cfg = tiny_model();
    auto ckpt = init_checkpoint(cfg, options.seed, TrainMode::full);
    perturb(ckpt, options.seed);
    Rng rng = Rng(options.seed).fork("A8");
    const Tensor originals = synthetic_images(4, cfg.image_side, options.seed);
    const auto puzzle = make_training_puzzle(cfg, originals, 8, 0.5, 2, task, rng.fork("puzzle"));
    const auto report =
        check_puzzle_gradient(ckpt, puzzle, originals, kGradCoordinates, kGradEps, kGradTolerance, rng);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {"", report.passed && report.checked == kGradCoordinates && secs < kGradBudgetSeconds,
            fmt::format("max relative error {:.3e} over {} coordinates (tol {:.0e}, budget {:.0f}s)",
                        report.max_relative_error, report.checked, kGradTolerance, kGradBudgetSeconds)};
}

Result overfit(const Options& options, PuzzleMode task) {
    const auto start = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.mode = TrainMode::full;
    cfg.task = task;
    cfg.epochs = kOverfitSteps;
    cfg.batch_size = 8;
    cfg.group_size = 4;
    cfg.base_lr = 1e-3;
    cfg.variant = "p16-r25";
    cfg.checkpoint_every = 0;
    cfg.seed = options.seed;
    const auto result = train(cfg, synthetic_images(8, 32, options.seed), "");
    double tail = 0.0;
    for (std::size_t i = result.reports.size() - kOverfitTail; i < result.reports.size(); ++i) {
        tail += result.reports[i].loss;
    }
    tail /= static_cast<double>(kOverfitTail);
    const double initial = result.reports.front().loss;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {"", result.reports.size() == kOverfitSteps && tail <= kOverfitFactor * initial &&
                    secs < kOverfitBudgetSeconds,
            fmt::format("{} steps, loss {:.5f} -> {:.5f} (ratio {:.4f}, need <= {:.2f}, budget {:.0f}s)",
                        result.reports.size(), initial, tail, tail / initial, kOverfitFactor,
                        kOverfitBudgetSeconds)};
}

Result probe_gain(const Options& options) {
    const auto start = std::chrono::steady_clock::now();
    double gain = 0.0;
    std::string per_seed;
    for (std::size_t k = 0; k < kProbeSeeds; ++k) {
        const std::uint64_t seed = options.seed + k;
        SyntheticSpec data;
        data.class_count = 4;
        data.per_class = 64;
        data.side = 32;
        data.seed = seed;
        data.color_jitter = 0.35;
        const auto corpus = generate(data);

        TrainConfig cfg;
        cfg.model = small_model();
        cfg.mode = TrainMode::full;
        cfg.epochs = kProbeEpochs - 3;
        cfg.warmup_epochs = 3;
        cfg.batch_size = 16;
        cfg.group_size = 4;
        cfg.base_lr = 1e-3;
        cfg.variant = "custom";
        cfg.patch_cycle = {8, 16};
        cfg.checkpoint_every = 0;
        cfg.seed = seed;
        const ProbeConfig probe;
        const auto init = init_checkpoint(cfg.model, seed, cfg.mode);
        const auto before = linear_probe(init, corpus.images, corpus.labels, probe);
        const auto trained = train(cfg, corpus.images, "", &init);
        const auto after = linear_probe(trained.checkpoint, corpus.images, corpus.labels, probe);
        gain += after.test_accuracy - before.test_accuracy;
        per_seed += fmt::format(" [{:.3f} -> {:.3f}]", before.test_accuracy, after.test_accuracy);
    }
    gain /= static_cast<double>(kProbeSeeds);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {"", gain >= kProbeGain && secs < kProbeBudgetSeconds,
            fmt::format("mean probe gain {:+.3f} (need {:+.2f}); random-init -> trained:{} (budget {:.0f}s)", gain,
                        kProbeGain, per_seed, kProbeBudgetSeconds)};
}

Result mask_parity(const Options& options) {
    std::vector<std::string> failed;
    std::string detail;
    const std::vector<std::pair<std::string, std::function<Result()>>> parts{
        {"A6", [&] { return masked_gradient(options, PuzzleMode::mask); }},
        {"A7", [&] { return freezing(options, PuzzleMode::mask); }},
        {"A8", [&] { return gradient_oracle(options, PuzzleMode::mask); }},
        {"A9", [&] { return overfit(options, PuzzleMode::mask); }},
    };
    for (const auto& [name, fn] : parts) {
        const Result r = fn();
        if (!r.passed) {
            failed.push_back(name + ": " + r.detail);
        }
    }
    // Mask mode must zero every relation input value and keep the rest.
    const ModelConfig cfg = small_model();
    const Tensor originals = synthetic_images(8, cfg.image_side, options.seed);
    const auto puzzle = make_training_puzzle(cfg, originals, 8, 0.5, 4, PuzzleMode::mask, Rng(options.seed));
    auto [g1, before] = patchify(originals, 8);
    auto [g2, after] = patchify(puzzle.images, 8);
    std::size_t wrong = 0;
    const std::vector<double> zero(3 * 8 * 8, 0.0);
    for (std::size_t b = 0; b < 8; ++b) {
        for (std::size_t x = 0; x < g1.locations(); ++x) {
            const auto expected = puzzle.spec.fix_mask[x] ? patch_at(before, b, x) : zero;
            wrong += patch_at(after, b, x) == expected ? 0 : 1;
        }
    }
    if (wrong > 0) {
        failed.push_back(fmt::format("{} patches differ from the masked expectation", wrong));
    }
    for (const auto& f : failed) {
        detail += (detail.empty() ? "" : "; ") + f;
    }
    return {"", failed.empty(),
            failed.empty() ? std::string("mask task passes A6-A9 and zeroes relation inputs byte-wise") : detail};
}

Result determinism(const Options& options) {
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.epochs = 3;
    cfg.warmup_epochs = 1;
    cfg.batch_size = 4;
    cfg.group_size = 2;
    cfg.base_lr = 1e-3;
    cfg.variant = "custom";
    cfg.patch_cycle = {4, 8};
    cfg.seed = options.seed;
    const Tensor images = synthetic_images(8, cfg.model.image_side, options.seed);
    const auto dir = scratch(options, "A12");
    train(cfg, images, dir / "run1");
    train(cfg, images, dir / "run2");
    const auto diff = first_tree_difference(dir / "run1", dir / "run2");
    std::filesystem::remove_all(dir);
    return {"", !diff.has_value(),
            diff ? "outputs differ at " + *diff : "two runs produced byte-identical checkpoints and metrics.csv"};
}

const std::map<std::string, std::pair<std::string, std::function<Result(const Options&)>>>& registry() {
    static const std::map<std::string, std::pair<std::string, std::function<Result(const Options&)>>> table{
        {"A1", {"puzzle round-trip over 100 random configs", round_trip}},
        {"A2", {"in-place shuffle keeps multisets and fixed patches", in_place}},
        {"A3", {"scheduler endpoints and patch cycle", scheduler}},
        {"A4", {"zero-prompt encoder equals plain encoder", prompt_reduction}},
        {"A5", {"positional hint equals stage-0 embeddings", hint_correctness}},
        {"A6", {"masked-loss gradient", [](const Options& o) { return masked_gradient(o, PuzzleMode::shuffle); }}},
        {"A7", {"prompt-mode freezing", [](const Options& o) { return freezing(o, PuzzleMode::shuffle); }}},
        {"A8", {"finite-difference gradient oracle", [](const Options& o) { return gradient_oracle(o, PuzzleMode::shuffle); }}},
        {"A9", {"overfit convergence", [](const Options& o) { return overfit(o, PuzzleMode::shuffle); }}},
        {"A10", {"linear-probe gain over random init", probe_gain}},
        {"A11", {"mask task runs A6-A9", mask_parity}},
        {"A12", {"training determinism", determinism}},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& criterion_ids() {
    static const std::vector<std::string> ids{"A1", "A2", "A3", "A4", "A5", "A6",
                                              "A7", "A8", "A9", "A10", "A11", "A12"};
    return ids;
}

std::string describe(const std::string& id) {
    auto it = registry().find(id);
    if (it == registry().end()) {
        fail(ErrorCode::ConfigError, "unknown criterion '" + id + "'");
    }
    return it->second.first;
}

Result run(const std::string& id, const Options& options) {
    auto it = registry().find(id);
    if (it == registry().end()) {
        fail(ErrorCode::ConfigError, "unknown criterion '" + id + "'");
    }
    const auto start = std::chrono::steady_clock::now();
    Result result = it->second.second(options);
    result.id = id;
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace puzzletune::acceptance
