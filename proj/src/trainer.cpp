#include "puzzletune/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "puzzletune/error.hpp"
#include "puzzletune/ops.hpp"

namespace puzzletune {

namespace {

template <typename T>
T read_field(const nlohmann::json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) {
        return fallback;
    }
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, fmt::format("train config key '{}': {}", key, e.what()));
    }
}

const char* to_string(CosineTarget target) noexcept {
    return target == CosineTarget::lr ? "lr" : "weight_decay";
}

CosineTarget cosine_target_from_string(const std::string& name) {
    if (name == "lr") {
        return CosineTarget::lr;
    }
    if (name == "weight_decay") {
        return CosineTarget::weight_decay;
    }
    fail(ErrorCode::ConfigError, "unknown cosine_target '" + name + "'");
}

// 1 at the end of warm-up, 0 at the end of training.
double cosine_weight(const TrainConfig& cfg, std::size_t epoch, double step_frac) {
    const double t = static_cast<double>(epoch) + step_frac - static_cast<double>(cfg.warmup_epochs);
    const double u = std::clamp(t / static_cast<double>(cfg.epochs), 0.0, 1.0);
    return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

double warmup_weight(const TrainConfig& cfg, std::size_t epoch, double step_frac) {
    const double t = static_cast<double>(epoch) + step_frac;
    return std::min(1.0, t / static_cast<double>(cfg.warmup_epochs));
}

double decayed(double base, double factor, double weight) {
    const double floor = factor * base;
    return floor + (base - floor) * weight;
}

}  // namespace

ScheduleState TrainConfig::schedule() const {
    ScheduleState state = describe_variant(variant, total_epochs());
    state.cycle_stride = cycle_stride;
    if (state.variant == CurriculumVariant::custom) {
        if (!patch_cycle.empty()) {
            state.patch_cycle = patch_cycle;
        }
        state.ratio_start = ratio_start;
        state.ratio_end = ratio_end;
    }
    return state;
}

void TrainConfig::validate() const {
    if (epochs == 0 || warmup_epochs >= epochs) {
        fail(ErrorCode::ConfigError, "need epochs > 0 and warmup_epochs < epochs");
    }
    if (batch_size == 0 || group_size == 0 || batch_size % group_size != 0) {
        fail(ErrorCode::GroupSizeMismatch,
             fmt::format("batch_size {} is not a positive multiple of group_size {}", batch_size, group_size));
    }
    if (!(final_lr_factor > 0.0 && final_lr_factor <= 1.0)) {
        fail(ErrorCode::ConfigError, "final_lr_factor must lie in (0, 1]");
    }
    if (!(base_lr >= 0.0) || !(weight_decay >= 0.0) || !(eps > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
        !(beta2 >= 0.0 && beta2 < 1.0)) {
        fail(ErrorCode::ConfigError, "optimizer hyper-parameters out of range");
    }
    model.validate();
    puzzletune::validate(schedule(), model.image_side, model.token_patch);
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"warmup_epochs", warmup_epochs},
            {"base_lr", base_lr},
            {"final_lr_factor", final_lr_factor},
            {"batch_size", batch_size},
            {"group_size", group_size},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"weight_decay", weight_decay},
            {"cosine_target", to_string(cosine_target)},
            {"mode", to_string(mode)},
            {"task", to_string(task)},
            {"seed", seed},
            {"variant", variant},
            {"patch_cycle", patch_cycle},
            {"cycle_stride", cycle_stride},
            {"ratio_start", ratio_start},
            {"ratio_end", ratio_end},
            {"model", model.to_json()},
            {"checkpoint_every", checkpoint_every},
            {"record_wall_time", record_wall_time}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        fail(ErrorCode::ConfigError, "train config must be a JSON object");
    }
    TrainConfig cfg;
    const auto known = cfg.to_json();
    for (const auto& item : doc.items()) {
        if (!known.contains(item.key())) {
            fail(ErrorCode::ConfigError, "unknown train config key '" + item.key() + "'");
        }
    }
    cfg.epochs = read_field(doc, "epochs", cfg.epochs);
    cfg.warmup_epochs = read_field(doc, "warmup_epochs", cfg.warmup_epochs);
    cfg.base_lr = read_field(doc, "base_lr", cfg.base_lr);
    cfg.final_lr_factor = read_field(doc, "final_lr_factor", cfg.final_lr_factor);
    cfg.batch_size = read_field(doc, "batch_size", cfg.batch_size);
    cfg.group_size = read_field(doc, "group_size", cfg.group_size);
    cfg.beta1 = read_field(doc, "beta1", cfg.beta1);
    cfg.beta2 = read_field(doc, "beta2", cfg.beta2);
    cfg.eps = read_field(doc, "eps", cfg.eps);
    cfg.weight_decay = read_field(doc, "weight_decay", cfg.weight_decay);
    cfg.cosine_target = cosine_target_from_string(read_field<std::string>(doc, "cosine_target", "lr"));
    cfg.mode = train_mode_from_string(read_field<std::string>(doc, "mode", to_string(cfg.mode)));
    try {
        cfg.task = puzzle_mode_from_string(read_field<std::string>(doc, "task", to_string(cfg.task)));
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, e.what());
    }
    cfg.seed = read_field(doc, "seed", cfg.seed);
    cfg.variant = read_field(doc, "variant", cfg.variant);
    cfg.patch_cycle = read_field(doc, "patch_cycle", cfg.patch_cycle);
    cfg.cycle_stride = read_field(doc, "cycle_stride", cfg.cycle_stride);
    cfg.ratio_start = read_field(doc, "ratio_start", cfg.ratio_start);
    cfg.ratio_end = read_field(doc, "ratio_end", cfg.ratio_end);
    if (doc.contains("model")) {
        cfg.model = ModelConfig::from_json(doc.at("model"));
    }
    cfg.checkpoint_every = read_field(doc, "checkpoint_every", cfg.checkpoint_every);
    cfg.record_wall_time = read_field(doc, "record_wall_time", cfg.record_wall_time);
    return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open config " + path.string());
    }
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
}

Tensor restoration_loss(const Tensor& restored, const Tensor& original, const PuzzleSpec& spec,
                        const PatchGrid& grid) {
    if (restored.shape() != original.shape()) {
        fail(ErrorCode::ShapeMismatch, "restored " + to_string(restored.shape()) + " vs original " +
                                           to_string(original.shape()));
    }
    const auto relation = spec.relation_locations();
    if (relation.empty()) {
        fail(ErrorCode::EmptyRelationSet, "restoration loss needs at least one relation location");
    }
    if (spec.fix_mask.size() != grid.locations()) {
        fail(ErrorCode::ShapeMismatch, "fix mask does not match the patch grid");
    }
    auto [g1, predicted] = patchify(restored, grid.patch_size);
    auto [g2, target] = patchify(original, grid.patch_size);
    return ops::mse(ops::index_select(predicted, 1, relation), ops::index_select(target, 1, relation));
}

double lr_at(const TrainConfig& cfg, std::size_t epoch, double step_frac) {
    if (epoch < cfg.warmup_epochs) {
        return cfg.base_lr * warmup_weight(cfg, epoch, step_frac);
    }
    if (cfg.cosine_target == CosineTarget::weight_decay) {
        return cfg.base_lr;
    }
    return decayed(cfg.base_lr, cfg.final_lr_factor, cosine_weight(cfg, epoch, step_frac));
}

double weight_decay_at(const TrainConfig& cfg, std::size_t epoch, double step_frac) {
    if (cfg.cosine_target == CosineTarget::lr || epoch < cfg.warmup_epochs) {
        return cfg.weight_decay;
    }
    return decayed(cfg.weight_decay, cfg.final_lr_factor, cosine_weight(cfg, epoch, step_frac));
}

bool decays(const std::string& name) {
    const bool bias = name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
    return !bias && name.find("norm") == std::string::npos;
}

AdamW::AdamW(const TrainConfig& cfg) : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps) {}

void AdamW::step(Checkpoint& ckpt, double lr, double weight_decay) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& name : ckpt.trainable) {
        Tensor& param = ckpt.params.at(name);
        const std::vector<double> grad = param.grad();
        auto& m = m_[name];
        auto& v = v_[name];
        m.resize(grad.size(), 0.0);
        v.resize(grad.size(), 0.0);
        const double shrink = decays(name) ? 1.0 - lr * weight_decay : 1.0;
        auto theta = param.mutable_data();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            theta[i] = theta[i] * shrink - lr * update;
        }
    }
}

TrainingPuzzle make_training_puzzle(const ModelConfig& model, const Tensor& originals, std::size_t patch_size,
                                    double fix_ratio, std::size_t group_size, PuzzleMode task, const Rng& rng) {
    TrainingPuzzle out;
    ImageBatch batch(originals);
    out.grid = make_grid(batch.height(), batch.width(), patch_size);
    Rng fix_rng = rng.fork("fix");
    out.spec = assign_fix_positions(out.grid, fix_ratio, group_size, task, fix_rng);
    NoGradGuard guard;
    auto [grid, patches] = patchify(originals, patch_size);
    PuzzleResult result = task == PuzzleMode::shuffle ? shuffle_in_place(patches, out.spec, rng.fork("shuffle"))
                                                      : mask_in_place(patches, out.spec);
    out.record = std::move(result.record);
    out.images = unpatchify(result.puzzle, out.grid);
    out.roles = token_roles(model, out.grid, out.spec.fix_mask);
    return out;
}

Tensor puzzle_loss(const Checkpoint& ckpt, const TrainingPuzzle& puzzle, const Tensor& originals) {
    const ForwardPass pass = restore_forward(ckpt, puzzle.images, puzzle.roles);
    return restoration_loss(pass.restored, originals, puzzle.spec, puzzle.grid);
}

GradCheckReport check_puzzle_gradient(Checkpoint& ckpt, const TrainingPuzzle& puzzle, const Tensor& originals,
                                      std::size_t coordinates, double eps, double tol, Rng& rng) {
    std::vector<Tensor> params;
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (const auto& name : ckpt.trainable) {
        params.push_back(ckpt.at(name));
        sizes.push_back(params.back().numel());
        total += sizes.back();
    }
    if (total == 0) {
        fail(ErrorCode::ConfigError, "checkpoint has no trainable parameters");
    }
    std::vector<ParamCoordinate> coords;
    for (std::size_t i = 0; i < coordinates; ++i) {
        std::size_t flat = rng.below(total);
        std::size_t p = 0;
        while (flat >= sizes[p]) {
            flat -= sizes[p++];
        }
        coords.push_back({p, flat});
    }
    return finite_diff_check([&] { return puzzle_loss(ckpt, puzzle, originals); }, params, coords, eps, tol);
}

StepReport train_step(Checkpoint& ckpt, AdamW& optimizer, const Tensor& images, const StepPlan& plan,
                      const TrainConfig& cfg, const Rng& rng) {
    const TrainingPuzzle puzzle =
        make_training_puzzle(cfg.model, images, plan.patch_size, plan.fix_ratio, cfg.group_size, cfg.task, rng);
    for (auto& [name, param] : ckpt.params) {
        param.zero_grad();
    }
    const Tensor loss = puzzle_loss(ckpt, puzzle, images);
    backward(loss);

    double sq = 0.0;
    for (const auto& name : ckpt.trainable) {
        for (double g : ckpt.params.at(name).grad()) {
            sq += g * g;
        }
    }
    optimizer.step(ckpt, plan.lr, plan.weight_decay);

    StepReport report;
    report.epoch = plan.epoch;
    report.step = plan.step;
    report.loss = loss.item();
    report.lr = plan.lr;
    report.patch_size = plan.patch_size;
    report.fix_ratio = plan.fix_ratio;
    report.grad_norm = std::sqrt(sq);
    return report;
}

std::string metrics_row(const StepReport& r) {
    return fmt::format("{},{},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.3f}", r.epoch, r.step, r.loss, r.lr, r.patch_size,
                       r.fix_ratio, r.grad_norm, r.wall_ms);
}

TrainResult train(const TrainConfig& cfg, const Tensor& images, const std::filesystem::path& out_dir,
                  const Checkpoint* init) {
    cfg.validate();
    if (images.rank() != 4 || images.dim(0) == 0 || images.dim(2) != cfg.model.image_side ||
        images.dim(3) != cfg.model.image_side) {
        fail(ErrorCode::ConfigError, fmt::format("dataset {} does not match the model's {}px images",
                                                 to_string(images.shape()), cfg.model.image_side));
    }
    TrainResult result;
    if (init != nullptr) {
        if (init->config.hash() != cfg.model.hash()) {
            fail(ErrorCode::ConfigError, "initial checkpoint was built for a different model config");
        }
        result.checkpoint = init->clone();
        result.checkpoint.epoch = 0;
    } else {
        result.checkpoint = init_checkpoint(cfg.model, cfg.seed, cfg.mode);
    }
    Checkpoint& ckpt = result.checkpoint;
    ckpt.seed = cfg.seed;
    ckpt.set_mode(cfg.mode);

    const ScheduleState schedule = cfg.schedule();
    AdamW optimizer(cfg);
    const Rng root(cfg.seed);
    const Rng data_rng = root.fork("data");
    const Rng step_rng = root.fork("steps");
    const std::size_t count = images.dim(0);
    const std::size_t steps = (count + cfg.batch_size - 1) / cfg.batch_size;

    std::ofstream metrics;
    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        metrics.open(out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
        if (ec || !metrics) {
            fail(ErrorCode::IoError, "cannot write into " + out_dir.string());
        }
        metrics << kMetricsHeader << '\n';
    }

    std::size_t global = 0;
    for (std::size_t epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
        StepPlan plan;
        plan.epoch = epoch;
        plan.patch_size = patch_size_at(schedule, epoch);
        plan.fix_ratio = fix_ratio_at(schedule, epoch);
        const auto order = data_rng.fork("epoch", epoch).permutation(count);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < steps; ++s, ++global) {
            // The last batch wraps around to stay a multiple of the group size.
            std::vector<std::size_t> index(cfg.batch_size);
            for (std::size_t j = 0; j < cfg.batch_size; ++j) {
                index[j] = order[(s * cfg.batch_size + j) % count];
            }
            const Tensor batch = ops::index_select(images, 0, index);
            const double frac = static_cast<double>(s) / static_cast<double>(steps);
            plan.step = global;
            plan.lr = lr_at(cfg, epoch, frac);
            plan.weight_decay = weight_decay_at(cfg, epoch, frac);

            const auto start = std::chrono::steady_clock::now();
            StepReport report = train_step(ckpt, optimizer, batch, plan, cfg, step_rng.fork("step", global));
            if (cfg.record_wall_time) {
                report.wall_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            }
            epoch_loss += report.loss;
            if (metrics.is_open()) {
                metrics << metrics_row(report) << '\n';
            }
            result.reports.push_back(report);
        }
        ckpt.epoch = epoch + 1;
        spdlog::info("epoch {}/{} patch {} ratio {:.4f} loss {:.6f}", epoch + 1, cfg.total_epochs(), plan.patch_size,
                     plan.fix_ratio, epoch_loss / static_cast<double>(steps));
        if (!out_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(ckpt, out_dir / "checkpoints" / fmt::format("epoch_{:04d}", epoch + 1));
        }
    }
    if (!out_dir.empty()) {
        metrics.flush();
        if (!metrics) {
            fail(ErrorCode::IoError, "cannot write metrics.csv");
        }
        save_checkpoint(ckpt, out_dir / "final");
    }
    return result;
}

ProbeResult fit_probe(const std::vector<double>& features, std::size_t dim, const std::vector<int>& labels,
                      const ProbeConfig& cfg) {
    const std::size_t n = labels.size();
    if (n == 0 || dim == 0 || features.size() != n * dim) {
        fail(ErrorCode::ShapeMismatch, "probe features do not match the label count");
    }
    if (*std::min_element(labels.begin(), labels.end()) < 0) {
        fail(ErrorCode::ConfigError, "class labels must be non-negative");
    }
    const std::size_t classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;

    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < n; ++i) {
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (const auto& members : by_class) {
        const auto held = static_cast<std::size_t>(std::floor(static_cast<double>(members.size()) * cfg.test_fraction));
        const std::size_t cut = members.size() - held;
        train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
        test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
    }

    // Standardize with training statistics.
    std::vector<double> mu(dim, 0.0);
    std::vector<double> sd(dim, 0.0);
    for (auto i : train_idx) {
        for (std::size_t d = 0; d < dim; ++d) {
            mu[d] += features[i * dim + d];
        }
    }
    for (auto& v : mu) {
        v /= static_cast<double>(train_idx.size());
    }
    for (auto i : train_idx) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double c = features[i * dim + d] - mu[d];
            sd[d] += c * c;
        }
    }
    for (auto& v : sd) {
        v = std::sqrt(v / static_cast<double>(train_idx.size()));
        v = v > 1e-12 ? v : 1.0;
    }
    auto feature = [&](std::size_t i, std::size_t d) { return (features[i * dim + d] - mu[d]) / sd[d]; };

    std::vector<double> w(dim * classes, 0.0);
    std::vector<double> b(classes, 0.0);
    std::vector<double> logits(classes);
    auto scores = [&](std::size_t i) {
        for (std::size_t c = 0; c < classes; ++c) {
            double z = b[c];
            for (std::size_t d = 0; d < dim; ++d) {
                z += feature(i, d) * w[d * classes + c];
            }
            logits[c] = z;
        }
    };

    std::vector<double> gw(w.size());
    std::vector<double> gb(classes);
    const double inv = 1.0 / static_cast<double>(train_idx.size());
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (auto i : train_idx) {
            scores(i);
            const double top = *std::max_element(logits.begin(), logits.end());
            double total = 0.0;
            for (auto& z : logits) {
                z = std::exp(z - top);
                total += z;
            }
            for (std::size_t c = 0; c < classes; ++c) {
                const double delta = (logits[c] / total - (labels[i] == static_cast<int>(c) ? 1.0 : 0.0)) * inv;
                gb[c] += delta;
                for (std::size_t d = 0; d < dim; ++d) {
                    gw[d * classes + c] += delta * feature(i, d);
                }
            }
        }
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= cfg.lr * (gw[j] + cfg.l2 * w[j]);
        }
        for (std::size_t c = 0; c < classes; ++c) {
            b[c] -= cfg.lr * gb[c];
        }
    }

    auto accuracy = [&](const std::vector<std::size_t>& idx) {
        std::size_t hits = 0;
        for (auto i : idx) {
            scores(i);
            const auto best = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
            hits += best == labels[i] ? 1 : 0;
        }
        return idx.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(idx.size());
    };
    ProbeResult result;
    result.classes = classes;
    result.train_count = train_idx.size();
    result.test_count = test_idx.size();
    result.train_accuracy = accuracy(train_idx);
    result.test_accuracy = test_idx.empty() ? result.train_accuracy : accuracy(test_idx);
    return result;
}

ProbeResult linear_probe(const Checkpoint& ckpt, const Tensor& images, const std::vector<int>& labels,
                         const ProbeConfig& cfg) {
    if (images.rank() != 4 || images.dim(0) != labels.size()) {
        fail(ErrorCode::ShapeMismatch, "probe needs one label per image");
    }
    constexpr std::size_t kChunk = 32;
    const std::size_t n = images.dim(0);
    const std::size_t dim = ckpt.config.enc_dim;
    std::vector<double> features;
    features.reserve(n * dim);
    for (std::size_t start = 0; start < n; start += kChunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(n, start + kChunk); ++i) {
            idx.push_back(i);
        }
        const Tensor f = cls_features(ckpt, ops::index_select(images, 0, idx));
        features.insert(features.end(), f.data().begin(), f.data().end());
    }
    return fit_probe(features, dim, labels, cfg);
}

}  // namespace puzzletune
