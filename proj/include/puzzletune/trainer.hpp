#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "puzzletune/curriculum.hpp"
#include "puzzletune/gradcheck.hpp"
#include "puzzletune/model.hpp"
#include "puzzletune/puzzle.hpp"
#include "puzzletune/rng.hpp"

namespace puzzletune {

// Which quantity the post-warm-up cosine decays toward final_lr_factor times
// its base value. The other one stays constant.
enum class CosineTarget { lr, weight_decay };

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t warmup_epochs = 0;
    double base_lr = 1e-4;
    double final_lr_factor = 0.05;
    std::size_t batch_size = 8;
    std::size_t group_size = 4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
    CosineTarget cosine_target = CosineTarget::lr;
    TrainMode mode = TrainMode::prompt;
    PuzzleMode task = PuzzleMode::shuffle;
    std::uint64_t seed = 0;

    std::string variant = "base";
    // Overrides for the "custom" variant; empty means the variant default.
    std::vector<std::size_t> patch_cycle;
    std::size_t cycle_stride = 1;
    double ratio_start = 0.9;
    double ratio_end = 0.2;

    ModelConfig model;
    // Save a checkpoint every N epochs (0 = final only).
    std::size_t checkpoint_every = 1;
    // Wall-clock column of metrics.csv; zero when off so reruns are byte-identical.
    bool record_wall_time = false;

    std::size_t total_epochs() const noexcept { return warmup_epochs + epochs; }
    // Curriculum indexed by absolute epoch, warm-up included.
    ScheduleState schedule() const;
    void validate() const;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& doc);
    static TrainConfig load(const std::filesystem::path& path);
};

struct StepReport {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::size_t patch_size = 0;
    double fix_ratio = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;
};

// Mean squared error over relation-patch pixels, against the original images.
Tensor restoration_loss(const Tensor& restored, const Tensor& original, const PuzzleSpec& spec,
                        const PatchGrid& grid);

// Linear warm-up from 0, then cosine from base_lr to final_lr_factor * base_lr.
double lr_at(const TrainConfig& cfg, std::size_t epoch, double step_frac);
double weight_decay_at(const TrainConfig& cfg, std::size_t epoch, double step_frac);

// Biases and normalization parameters are not decayed.
bool decays(const std::string& name);

// Adaptive moments with decoupled weight decay over a checkpoint's trainable set.
class AdamW {
public:
    explicit AdamW(const TrainConfig& cfg);

    void step(Checkpoint& ckpt, double lr, double weight_decay);
    std::size_t steps() const noexcept { return t_; }

private:
    double beta1_;
    double beta2_;
    double eps_;
    std::size_t t_ = 0;
    std::map<std::string, std::vector<double>> m_;
    std::map<std::string, std::vector<double>> v_;
};

struct TrainingPuzzle {
    PatchGrid grid;
    PuzzleSpec spec;
    PermutationRecord record;
    Tensor images;  // [B, 3, h, w] puzzle state
    std::vector<TokenRole> roles;
};

// assign_fix_positions -> shuffle or mask, reassembled into images.
TrainingPuzzle make_training_puzzle(const ModelConfig& model, const Tensor& originals, std::size_t patch_size,
                                    double fix_ratio, std::size_t group_size, PuzzleMode task, const Rng& rng);

// Forward pass plus restoration loss; records onto the tape.
Tensor puzzle_loss(const Checkpoint& ckpt, const TrainingPuzzle& puzzle, const Tensor& originals);

// Central differences of puzzle_loss at `coordinates` scalars drawn uniformly
// over every trainable parameter.
GradCheckReport check_puzzle_gradient(Checkpoint& ckpt, const TrainingPuzzle& puzzle, const Tensor& originals,
                                      std::size_t coordinates, double eps, double tol, Rng& rng);

struct StepPlan {
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::size_t patch_size = 0;
    double fix_ratio = 0.0;
    double lr = 0.0;
    double weight_decay = 0.0;
};

StepReport train_step(Checkpoint& ckpt, AdamW& optimizer, const Tensor& images, const StepPlan& plan,
                      const TrainConfig& cfg, const Rng& rng);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<StepReport> reports;
};

inline constexpr const char* kMetricsHeader = "epoch,step,loss,lr,patch_size,fix_ratio,grad_norm,wall_ms";

std::string metrics_row(const StepReport& report);

// Runs every epoch over `images` ([N, 3, h, w]). When out_dir is non-empty it
// receives checkpoints/epoch_NNNN, final/ and metrics.csv. `init` replaces the
// seeded initialization when given.
TrainResult train(const TrainConfig& cfg, const Tensor& images, const std::filesystem::path& out_dir,
                  const Checkpoint* init = nullptr);

struct ProbeConfig {
    std::size_t iterations = 300;
    double lr = 0.5;
    double l2 = 1e-3;
    double test_fraction = 0.25;
};

struct ProbeResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::size_t classes = 0;
};

// Softmax regression on standardized features [N, D]. The last test_fraction
// of each class (in index order) is held out.
ProbeResult fit_probe(const std::vector<double>& features, std::size_t dim, const std::vector<int>& labels,
                      const ProbeConfig& cfg);
// Probe on the frozen encoder's cls output.
ProbeResult linear_probe(const Checkpoint& ckpt, const Tensor& images, const std::vector<int>& labels,
                         const ProbeConfig& cfg);

}  // namespace puzzletune
