#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "puzzletune/datagen.hpp"
#include "puzzletune/ops.hpp"
#include "puzzletune/trainer.hpp"
#include "test_util.hpp"

using namespace puzzletune;
using puzzletune::testing::error_code_of;
using puzzletune::testing::random_tensor;

namespace {

TrainConfig tiny_train(TrainMode mode) {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.group_size = 2;
    cfg.base_lr = 1e-3;
    cfg.mode = mode;
    cfg.variant = "custom";
    cfg.patch_cycle = {8};
    cfg.checkpoint_every = 0;
    cfg.model.image_side = 16;
    cfg.model.token_patch = 4;
    cfg.model.enc_dim = 16;
    cfg.model.dec_dim = 16;
    cfg.model.prompt_count = 2;
    return cfg;
}

Tensor tiny_images(std::size_t n, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.class_count = 2;
    spec.per_class = (n + 1) / 2;
    spec.side = 16;
    spec.seed = seed;
    auto images = generate(spec).images;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    return ops::index_select(images, 0, idx);
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::vector<double>> snapshot(const Checkpoint& ckpt) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, tensor] : ckpt.params) {
        out[name] = {tensor.data().begin(), tensor.data().end()};
    }
    return out;
}

StepPlan plan_for(double lr) {
    StepPlan plan;
    plan.patch_size = 8;
    plan.fix_ratio = 0.25;
    plan.lr = lr;
    plan.weight_decay = 0.05;
    return plan;
}

}  // namespace

TEST(RestorationLoss, Examples) {
    Rng rng(1);
    const auto original = random_tensor({2, 3, 16, 16}, rng);
    const PatchGrid grid{8, 2, 2};
    PuzzleSpec spec;
    spec.fix_mask = {true, false, true, false};
    spec.position_count = 2;
    EXPECT_EQ(restoration_loss(original, original, spec, grid).item(), 0.0);

    // Change only the pixels of position patches.
    auto [g, patches] = patchify(original, 8);
    auto edited = patches.clone();
    const std::size_t len = 3 * 8 * 8;
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t loc : {0u, 2u}) {
            for (std::size_t e = 0; e < len; ++e) {
                edited.mutable_data()[(b * 4 + loc) * len + e] += 0.3;
            }
        }
    }
    EXPECT_EQ(restoration_loss(unpatchify(edited, grid), original, spec, grid).item(), 0.0);

    // B=1, m=4, r=3: one relation patch off by 0.5 everywhere.
    const auto single = random_tensor({1, 3, 16, 16}, rng);
    PuzzleSpec one;
    one.fix_mask = {true, true, false, true};
    one.position_count = 3;
    auto [g1, p1] = patchify(single, 8);
    auto off = p1.clone();
    for (std::size_t e = 0; e < len; ++e) {
        off.mutable_data()[2 * len + e] += 0.5;
    }
    EXPECT_DOUBLE_EQ(restoration_loss(unpatchify(off, grid), single, one, grid).item(), 0.25);

    PuzzleSpec none;
    none.fix_mask = {true, true, true, true};
    EXPECT_EQ(error_code_of([&] { restoration_loss(single, single, none, grid); }), ErrorCode::EmptyRelationSet);
}

TEST(RestorationLoss, InvariantUnderBagRelabeling) {
    Rng rng(2);
    const auto a = random_tensor({4, 3, 16, 16}, rng);
    const auto b = random_tensor({4, 3, 16, 16}, rng);
    const PatchGrid grid{8, 2, 2};
    PuzzleSpec spec;
    spec.fix_mask = {false, true, false, false};
    const std::vector<std::size_t> perm{3, 1, 0, 2};
    EXPECT_NEAR(restoration_loss(a, b, spec, grid).item(),
                restoration_loss(ops::index_select(a, 0, perm), ops::index_select(b, 0, perm), spec, grid).item(),
                1e-15);
}

TEST(RestorationLoss, GradientVanishesOnPositionPixels) {
    Rng rng(3);
    Tensor restored = random_tensor({2, 3, 16, 16}, rng);
    restored.set_requires_grad(true);
    const auto original = random_tensor({2, 3, 16, 16}, rng);
    const PatchGrid grid{4, 4, 4};
    auto spec = assign_fix_positions(grid, 0.5, 2, PuzzleMode::shuffle, rng);
    backward(restoration_loss(restored, original, spec, grid));
    auto grad = Tensor(restored.shape(), restored.grad());
    auto [g, patches] = patchify(grad, 4);
    const std::size_t len = 48;
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t loc = 0; loc < 16; ++loc) {
            for (std::size_t e = 0; e < len; ++e) {
                const double v = patches.data()[(b * 16 + loc) * len + e];
                if (spec.fix_mask[loc]) {
                    EXPECT_EQ(v, 0.0);
                } else {
                    EXPECT_NE(v, 0.0);
                }
            }
        }
    }
}

TEST(LearningRate, WarmupThenCosine) {
    TrainConfig cfg;
    cfg.warmup_epochs = 20;
    cfg.epochs = 180;
    cfg.base_lr = 1e-4;
    cfg.final_lr_factor = 0.05;
    EXPECT_EQ(lr_at(cfg, 0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(lr_at(cfg, 10, 0.0), 5e-5);
    EXPECT_DOUBLE_EQ(lr_at(cfg, 20, 0.0), 1e-4);
    EXPECT_NEAR(lr_at(cfg, 19, 1.0), 1e-4, 1e-18);
    EXPECT_NEAR(lr_at(cfg, 199, 1.0), 5e-6, 1e-18);
    double previous = lr_at(cfg, 20, 0.0);
    for (std::size_t e = 20; e < 200; ++e) {
        for (double frac : {0.25, 0.5, 0.75}) {
            const double lr = lr_at(cfg, e, frac);
            EXPECT_LE(lr, previous);
            previous = lr;
        }
    }
    EXPECT_EQ(weight_decay_at(cfg, 150, 0.0), 0.05);
}

TEST(LearningRate, WeightDecayReading) {
    TrainConfig cfg;
    cfg.warmup_epochs = 2;
    cfg.epochs = 10;
    cfg.base_lr = 1e-3;
    cfg.cosine_target = CosineTarget::weight_decay;
    EXPECT_EQ(lr_at(cfg, 8, 0.5), 1e-3);
    EXPECT_NEAR(weight_decay_at(cfg, 11, 1.0), 0.05 * 0.05, 1e-15);
    EXPECT_EQ(weight_decay_at(cfg, 2, 0.0), 0.05);
}

TEST(Optimizer, DecaySelection) {
    EXPECT_TRUE(decays("enc.0.attn.qkv.weight"));
    EXPECT_TRUE(decays("prompt.1"));
    EXPECT_FALSE(decays("enc.0.attn.qkv.bias"));
    EXPECT_FALSE(decays("enc.0.norm1.weight"));
    EXPECT_FALSE(decays("dec.norm.weight"));
}

TEST(TrainStep, ZeroLearningRateLeavesCheckpoint) {
    auto cfg = tiny_train(TrainMode::full);
    auto ckpt = init_checkpoint(cfg.model, 1, cfg.mode);
    AdamW opt(cfg);
    const auto before = snapshot(ckpt);
    const auto report = train_step(ckpt, opt, tiny_images(4, 1), plan_for(0.0), cfg, Rng(1));
    EXPECT_GT(report.loss, 0.0);
    EXPECT_TRUE(std::isfinite(report.grad_norm));
    EXPECT_EQ(snapshot(ckpt), before);
}

TEST(TrainStep, FullModeChangesEveryParameterWithGradient) {
    auto cfg = tiny_train(TrainMode::full);
    auto ckpt = init_checkpoint(cfg.model, 2, cfg.mode);
    AdamW opt(cfg);
    const auto images = tiny_images(4, 2);
    // One step so the zero-initialized head opens every gradient path.
    train_step(ckpt, opt, images, plan_for(1e-3), cfg, Rng(2));
    const auto before = snapshot(ckpt);
    train_step(ckpt, opt, images, plan_for(1e-3), cfg, Rng(3));
    for (const auto& [name, tensor] : ckpt.params) {
        const auto grad = tensor.grad();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            if (grad[i] != 0.0) {
                EXPECT_NE(tensor.data()[i], before.at(name)[i]) << name << "[" << i << "]";
            }
        }
    }
}

TEST(TrainStep, PromptModeFreezesBackbone) {
    auto cfg = tiny_train(TrainMode::prompt);
    auto ckpt = init_checkpoint(cfg.model, 3, cfg.mode);
    AdamW opt(cfg);
    const auto before = snapshot(ckpt);
    const auto images = tiny_images(4, 3);
    for (int s = 0; s < 5; ++s) {
        train_step(ckpt, opt, images, plan_for(1e-3), cfg, Rng(s));
    }
    for (const auto& [name, tensor] : ckpt.params) {
        if (!ckpt.is_trainable(name)) {
            EXPECT_EQ(std::vector<double>(tensor.data().begin(), tensor.data().end()), before.at(name)) << name;
        }
    }
    EXPECT_NE(snapshot(ckpt).at("prompt.0"), before.at("prompt.0"));
}

TEST(TrainConfigTest, JsonAndValidation) {
    auto cfg = tiny_train(TrainMode::prompt);
    cfg.task = PuzzleMode::mask;
    const auto parsed = TrainConfig::from_json(nlohmann::json::parse(cfg.to_json().dump()));
    EXPECT_EQ(parsed.to_json(), cfg.to_json());
    EXPECT_EQ(error_code_of([] { TrainConfig::from_json({{"epoch", 3}}); }), ErrorCode::ConfigError);
    cfg.batch_size = 6;
    cfg.group_size = 4;
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::GroupSizeMismatch);
    cfg = tiny_train(TrainMode::prompt);
    cfg.warmup_epochs = 2;
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::ConfigError);
    cfg = tiny_train(TrainMode::prompt);
    cfg.patch_cycle = {16};
    EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::ConfigError);
}

TEST(Train, OneEpochRunsCeilingOfBatches) {
    auto cfg = tiny_train(TrainMode::prompt);
    cfg.epochs = 1;
    const auto result = train(cfg, tiny_images(10, 4), "");
    EXPECT_EQ(result.reports.size(), 3u);
    EXPECT_EQ(result.checkpoint.epoch, 1u);
    for (const auto& r : result.reports) {
        EXPECT_TRUE(std::isfinite(r.loss));
        EXPECT_GE(r.loss, 0.0);
    }
}

TEST(Train, RerunIsByteIdentical) {
    auto cfg = tiny_train(TrainMode::full);
    cfg.checkpoint_every = 1;
    cfg.seed = 9;
    const auto images = tiny_images(8, 5);
    const auto root = std::filesystem::temp_directory_path() / "puzzletune_train_rerun";
    std::filesystem::remove_all(root);
    train(cfg, images, root / "a");
    train(cfg, images, root / "b");
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "a")) {
        if (entry.is_regular_file()) {
            ++files;
            EXPECT_EQ(file_bytes(entry.path()), file_bytes(root / "b" / std::filesystem::relative(entry.path(), root / "a")))
                << entry.path();
        }
    }
    EXPECT_TRUE(std::filesystem::exists(root / "a" / "checkpoints" / "epoch_0002" / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(root / "a" / "final" / "manifest.json"));
    EXPECT_GT(files, 10u);
    std::ifstream metrics(root / "a" / "metrics.csv");
    std::string header;
    std::getline(metrics, header);
    EXPECT_EQ(header, kMetricsHeader);
    std::filesystem::remove_all(root);
}

TEST(Probe, TrivialCases) {
    const std::vector<double> features{0.1, 0.5, 0.2, 0.4, 0.9, 0.1, 0.3, 0.3};
    const auto single = fit_probe(features, 2, {0, 0, 0, 0}, ProbeConfig{});
    EXPECT_EQ(single.test_accuracy, 1.0);
    // Separable along the first coordinate.
    std::vector<double> sep;
    std::vector<int> labels;
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        const int c = i % 2;
        sep.push_back(c * 2.0 + rng.uniform(-0.5, 0.5));
        sep.push_back(rng.uniform(-1.0, 1.0));
        labels.push_back(c);
    }
    const auto result = fit_probe(sep, 2, labels, ProbeConfig{});
    EXPECT_EQ(result.train_accuracy, 1.0);
    EXPECT_EQ(result.test_accuracy, 1.0);
    EXPECT_EQ(result.test_count, 10u);
    EXPECT_EQ(result.classes, 2u);
}
