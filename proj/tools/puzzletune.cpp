// puzzletune command-line driver. One subcommand per pipeline stage.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "puzzletune/acceptance.hpp"
#include "puzzletune/curriculum.hpp"
#include "puzzletune/datagen.hpp"
#include "puzzletune/error.hpp"
#include "puzzletune/kernels.hpp"
#include "puzzletune/model.hpp"
#include "puzzletune/ops.hpp"
#include "puzzletune/puzzle.hpp"
#include "puzzletune/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace puzzletune;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised after the command has already printed its own report.
struct CheckFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void error_line(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::FileFormatError, path.string() + ": " + e.what());
    }
}

// Prints to stdout, and to `out` when given.
void emit(const json& doc, const std::string& out) {
    std::cout << doc.dump(2) << '\n';
    if (!out.empty()) {
        write_text(out, doc.dump(2) + "\n");
    }
}

Tensor image_at(const Tensor& batch, std::size_t i) {
    return ops::index_select(batch, 0, {i});
}

std::vector<fs::path> sorted_ppms(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        fail(ErrorCode::IoError, "no such directory " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".ppm") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

Tensor stack_images(const std::vector<Tensor>& images) {
    if (images.empty()) {
        fail(ErrorCode::FileFormatError, "no images to stack");
    }
    const Shape one = images.front().shape();
    std::vector<double> pixels;
    for (const auto& img : images) {
        if (img.shape() != one) {
            fail(ErrorCode::FileFormatError, "images differ in size");
        }
        pixels.insert(pixels.end(), img.data().begin(), img.data().end());
    }
    return Tensor({images.size(), one[0], one[1], one[2]}, std::move(pixels));
}

void write_batch(const Tensor& batch, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
        ppm::write_file(dir / fmt::format("{:04d}.ppm", i), image_at(batch, i));
    }
}

// First `count` images of the corpus, or all of them when count is 0.
Corpus load_data(const std::string& dir, std::size_t count) {
    Corpus corpus = read_corpus(dir);
    const std::size_t n = corpus.images.dim(0);
    if (count > n) {
        throw UsageError(fmt::format("--count {} exceeds the {} images in {}", count, n, dir));
    }
    if (count > 0 && count < n) {
        std::vector<std::size_t> idx(count);
        for (std::size_t i = 0; i < count; ++i) {
            idx[i] = i;
        }
        corpus.images = ops::index_select(corpus.images, 0, idx);
        corpus.labels.resize(count);
    }
    return corpus;
}

void perturb(Checkpoint& ckpt, double amount, std::uint64_t seed) {
    Rng rng = Rng(seed).fork("perturb");
    for (auto& [name, tensor] : ckpt.params) {
        for (auto& v : tensor.mutable_data()) {
            v += rng.uniform(-amount, amount);
        }
    }
}

// --- options -----------------------------------------------------------

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
};

struct PuzzleFlags {
    std::size_t patch = 8;
    double fix_ratio = 0.5;
    std::size_t group = 2;
    std::string task = "shuffle";
};

void add_puzzle_flags(CLI::App* cmd, PuzzleFlags& f) {
    cmd->add_option("--patch", f.patch, "Puzzle patch size in pixels")->capture_default_str();
    cmd->add_option("--fix-ratio", f.fix_ratio, "Share of position patches")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--group", f.group, "Bags per shuffle group")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--task", f.task, "Puzzle task")
        ->check(CLI::IsMember({"shuffle", "mask"}))
        ->capture_default_str();
}

CLI::Option* add_seed(CLI::App* cmd, Common& c, bool required) {
    auto* opt = cmd->add_option("--seed", c.seed, "Random seed");
    if (required) {
        opt->required();
    }
    return opt;
}

// --- commands ----------------------------------------------------------

struct GenData {
    Common c;
    std::size_t classes = 4;
    std::size_t per_class = 64;
    std::size_t side = 32;
    double jitter = 0.0;

    void run() const {
        SyntheticSpec spec;
        spec.class_count = classes;
        spec.per_class = per_class;
        spec.side = side;
        spec.seed = c.seed;
        spec.color_jitter = jitter;
        const Corpus corpus = generate(spec);
        write_corpus(corpus, c.out);
        const auto report = histogram_distances(corpus);
        spdlog::info("wrote {} images to {}", corpus.labels.size(), c.out);
        std::cout << json{{"images", corpus.labels.size()},
                          {"classes", classes},
                          {"side", side},
                          {"within_class_distance", report.within_class},
                          {"between_class_distance", report.between_class}}
                         .dump(2)
                  << '\n';
    }
};

struct MakePuzzle {
    Common c;
    PuzzleFlags p;
    std::string data;
    std::size_t count = 0;

    void run() const {
        const Corpus corpus = load_data(data, count);
        const Tensor& images = corpus.images;
        if (images.dim(0) % p.group != 0) {
            throw UsageError(fmt::format("{} images do not split into groups of {}", images.dim(0), p.group));
        }
        const PuzzleMode task = puzzle_mode_from_string(p.task);
        Rng rng(c.seed);
        auto [grid, patches] = patchify(images, p.patch);
        Rng fix = rng.fork("fix");
        const PuzzleSpec spec = assign_fix_positions(grid, p.fix_ratio, p.group, task, fix);
        const PuzzleResult result =
            task == PuzzleMode::shuffle ? shuffle_in_place(patches, spec, rng.fork("shuffle")) : mask_in_place(patches, spec);
        write_batch(unpatchify(result.puzzle, grid), fs::path(c.out) / "images");
        const json doc{{"seed", c.seed},
                       {"fix_ratio", p.fix_ratio},
                       {"image_count", images.dim(0)},
                       {"height", images.dim(2)},
                       {"width", images.dim(3)},
                       {"record", result.record.to_json()}};
        write_text(fs::path(c.out) / "record.json", doc.dump(2) + "\n");
        spdlog::info("puzzle with {} of {} locations fixed written to {}", spec.position_count, grid.locations(), c.out);
    }
};

struct RestorePuzzle {
    Common c;
    std::string puzzle;

    void run() const {
        const json doc = read_json(fs::path(puzzle) / "record.json");
        PermutationRecord record;
        try {
            record = PermutationRecord::from_json(doc.at("record"));
        } catch (const json::exception& e) {
            fail(ErrorCode::FileFormatError, std::string("record.json: ") + e.what());
        }
        std::vector<Tensor> images;
        for (const auto& path : sorted_ppms(fs::path(puzzle) / "images")) {
            images.push_back(ppm::read_file(path));
        }
        const Tensor batch = stack_images(images);
        auto [grid, patches] = patchify(batch, record.patch_size);
        const Restoration restored = restore(patches, record);
        if (!restored.unrecoverable.empty()) {
            fail(ErrorCode::RecordMismatch, fmt::format("{} masked locations cannot be restored",
                                                        restored.unrecoverable.size()));
        }
        write_batch(unpatchify(restored.patches, grid), fs::path(c.out) / "images");
        spdlog::info("restored {} images to {}", batch.dim(0), c.out);
    }
};

struct Schedule {
    Common c;
    std::string variant = "base";
    std::size_t epochs = 0;

    void run() const {
        ScheduleState state;
        if (!c.config.empty()) {
            TrainConfig cfg = TrainConfig::load(c.config);
            if (epochs > 0) {
                cfg.epochs = epochs;
            }
            state = cfg.schedule();
        } else {
            if (epochs == 0) {
                throw UsageError("schedule needs --epochs or --config");
            }
            state = describe_variant(variant, epochs);
        }
        validate(state);
        const std::string csv = schedule_csv(state);
        std::cout << csv;
        if (!c.out.empty()) {
            write_text(c.out, csv);
        }
    }
};

TrainConfig base_config(const Common& c) {
    TrainConfig cfg = c.config.empty() ? TrainConfig{} : TrainConfig::load(c.config);
    cfg.seed = c.seed;
    return cfg;
}

struct Train {
    Common c;
    std::string data;
    std::string init;
    std::string variant;
    std::string mode;
    std::string task;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> group;
    std::optional<std::size_t> batch;
    std::optional<double> lr;

    void run() const {
        TrainConfig cfg = base_config(c);
        if (!variant.empty()) {
            cfg.variant = variant;
        }
        if (!mode.empty()) {
            cfg.mode = train_mode_from_string(mode);
        }
        if (!task.empty()) {
            cfg.task = puzzle_mode_from_string(task);
        }
        cfg.epochs = epochs.value_or(cfg.epochs);
        cfg.group_size = group.value_or(cfg.group_size);
        cfg.batch_size = batch.value_or(cfg.batch_size);
        cfg.base_lr = lr.value_or(cfg.base_lr);
        cfg.validate();
        const Corpus corpus = read_corpus(data);
        std::optional<Checkpoint> start;
        if (!init.empty()) {
            start = load_checkpoint(init);
            if (start->config.hash() != cfg.model.hash()) {
                fail(ErrorCode::ConfigError, "--init checkpoint architecture differs from the model config");
            }
            start->set_mode(cfg.mode);
        }
        fs::create_directories(c.out);
        write_text(fs::path(c.out) / "config.json", cfg.to_json().dump(2) + "\n");
        const TrainResult result = train(cfg, corpus.images, c.out, start ? &*start : nullptr);
        std::cout << json{{"steps", result.reports.size()},
                          {"initial_loss", result.reports.front().loss},
                          {"final_loss", result.reports.back().loss},
                          {"checkpoint", (fs::path(c.out) / "final").string()}}
                         .dump(2)
                  << '\n';
    }
};

// [3, h, 3w + 2*gap] with white separators.
Tensor triptych(const std::vector<Tensor>& panels, std::size_t gap) {
    const std::size_t h = panels.front().dim(2);
    const std::size_t w = panels.front().dim(3);
    const std::size_t width = panels.size() * w + (panels.size() - 1) * gap;
    std::vector<double> out(3 * h * width, 1.0);
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const auto src = panels[k].data();
        for (std::size_t ch = 0; ch < 3; ++ch) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    out[(ch * h + y) * width + k * (w + gap) + x] = std::clamp(src[(ch * h + y) * w + x], 0.0, 1.0);
                }
            }
        }
    }
    return Tensor({3, h, width}, std::move(out));
}

struct Reconstruct {
    Common c;
    PuzzleFlags p;
    std::string checkpoint;
    std::string data;
    std::size_t count = 0;

    void run() const {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        const Corpus corpus = load_data(data, count == 0 ? p.group : count);
        if (corpus.images.dim(0) % p.group != 0) {
            throw UsageError(fmt::format("{} images do not split into groups of {}", corpus.images.dim(0), p.group));
        }
        const auto puzzle = make_training_puzzle(ckpt.config, corpus.images, p.patch, p.fix_ratio, p.group,
                                                 puzzle_mode_from_string(p.task), Rng(c.seed));
        NoGradGuard guard;
        const ForwardPass pass = restore_forward(ckpt, puzzle.images, puzzle.roles);
        const double loss = restoration_loss(pass.restored, corpus.images, puzzle.spec, puzzle.grid).item();
        fs::create_directories(c.out);
        for (std::size_t i = 0; i < corpus.images.dim(0); ++i) {
            const Tensor panel = triptych(
                {image_at(corpus.images, i), image_at(puzzle.images, i), image_at(pass.restored, i)}, 2);
            ppm::write_file(fs::path(c.out) / fmt::format("{:04d}.ppm", i), panel);
        }
        std::cout << json{{"images", corpus.images.dim(0)}, {"loss", loss}, {"out", c.out}}.dump(2) << '\n';
    }
};

struct Probe {
    Common c;
    CLI::Option* seed_opt = nullptr;
    std::string checkpoint;
    std::string data;
    ProbeConfig probe;

    void run() const {
        Checkpoint ckpt;
        if (!checkpoint.empty()) {
            ckpt = load_checkpoint(checkpoint);
        } else {
            if (seed_opt->count() == 0) {
                throw UsageError("probe without --checkpoint needs --seed for the random-init encoder");
            }
            const TrainConfig cfg = base_config(c);
            ckpt = init_checkpoint(cfg.model, c.seed, cfg.mode);
        }
        const Corpus corpus = read_corpus(data);
        const ProbeResult r = linear_probe(ckpt, corpus.images, corpus.labels, probe);
        emit(json{{"source", checkpoint.empty() ? "random-init" : checkpoint},
                  {"train_accuracy", r.train_accuracy},
                  {"test_accuracy", r.test_accuracy},
                  {"train_count", r.train_count},
                  {"test_count", r.test_count},
                  {"classes", r.classes}},
             c.out);
    }
};

struct CheckGrad {
    Common c;
    PuzzleFlags p;
    std::size_t coords = 200;
    double eps = 1e-4;
    double tol = 1e-4;
    double jitter = 0.2;
    std::size_t images = 4;

    void run() const {
        const ModelConfig model = c.config.empty() ? acceptance::tiny_model() : TrainConfig::load(c.config).model;
        model.validate();
        if (images % p.group != 0) {
            throw UsageError(fmt::format("--images {} is not a multiple of --group {}", images, p.group));
        }
        Checkpoint ckpt = init_checkpoint(model, c.seed, TrainMode::full);
        perturb(ckpt, jitter, c.seed);
        SyntheticSpec data;
        data.class_count = 1;
        data.per_class = images;
        data.side = model.image_side;
        data.seed = c.seed;
        const Tensor originals = generate(data).images;
        Rng rng = Rng(c.seed).fork("check-grad");
        const auto puzzle = make_training_puzzle(model, originals, p.patch, p.fix_ratio, p.group,
                                                 puzzle_mode_from_string(p.task), rng.fork("puzzle"));
        const auto report = check_puzzle_gradient(ckpt, puzzle, originals, coords, eps, tol, rng);
        emit(json{{"passed", report.passed},
                  {"max_relative_error", report.max_relative_error},
                  {"worst_coordinate", report.worst_coordinate},
                  {"checked", report.checked},
                  {"eps", eps},
                  {"tol", tol}},
             c.out);
        if (!report.passed) {
            throw CheckFailed(fmt::format("max relative error {:.3e} exceeds {:.1e}", report.max_relative_error, tol));
        }
    }
};

struct Verify {
    Common c;
    std::vector<std::string> criteria;
    std::string work_dir;

    void run() const {
        acceptance::Options options;
        options.seed = c.seed;
        options.work_dir = work_dir;
        const auto& ids = criteria.empty() ? acceptance::criterion_ids() : criteria;
        std::size_t failures = 0;
        json results = json::array();
        for (const auto& id : ids) {
            const auto r = acceptance::run(id, options);
            failures += r.passed ? 0 : 1;
            std::printf("%-4s %s  %s (%.1fs)\n", r.id.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str(), r.seconds);
            std::fflush(stdout);
            results.push_back({{"id", r.id}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
        }
        if (!c.out.empty()) {
            write_text(c.out, results.dump(2) + "\n");
        }
        if (failures > 0) {
            throw CheckFailed(fmt::format("{} of {} criteria failed", failures, ids.size()));
        }
    }
};

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("puzzletune");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("PUZZLETUNE_LOG");
    const std::string level = env ? env : "info";
    if (level == "error") {
        spdlog::set_level(spdlog::level::err);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        throw UsageError("PUZZLETUNE_LOG must be error, info or debug");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised puzzle pre-training with prompt tuning"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads for parallel kernels")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    GenData gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic labeled texture corpus");
    add_seed(gen_cmd, gen.c, true);
    gen_cmd->add_option("--out", gen.c.out, "Corpus directory")->required();
    gen_cmd->add_option("--classes", gen.classes)->check(CLI::PositiveNumber)->capture_default_str();
    gen_cmd->add_option("--per-class", gen.per_class)->check(CLI::PositiveNumber)->capture_default_str();
    gen_cmd->add_option("--side", gen.side)->capture_default_str();
    gen_cmd->add_option("--jitter", gen.jitter, "Per-image base color shift")->check(CLI::Range(0.0, 1.0));

    MakePuzzle make;
    auto* make_cmd = app.add_subcommand("make-puzzle", "Shuffle or mask a corpus into puzzle images");
    add_seed(make_cmd, make.c, true);
    add_puzzle_flags(make_cmd, make.p);
    make_cmd->add_option("--data", make.data, "Corpus directory")->required();
    make_cmd->add_option("--count", make.count, "Use only the first N images");
    make_cmd->add_option("--out", make.c.out, "Output directory")->required();

    RestorePuzzle rest;
    auto* rest_cmd = app.add_subcommand("restore-puzzle", "Invert make-puzzle");
    rest_cmd->add_option("--puzzle", rest.puzzle, "make-puzzle output directory")->required();
    rest_cmd->add_option("--out", rest.c.out, "Output directory")->required();

    Schedule sched;
    auto* sched_cmd = app.add_subcommand("schedule", "Print the curriculum as epoch,patch_size,fix_ratio");
    sched_cmd->add_option("--variant", sched.variant)
        ->check(CLI::IsMember({"base", "p16-rd", "p16-r25", "custom"}))
        ->capture_default_str();
    sched_cmd->add_option("--epochs", sched.epochs);
    sched_cmd->add_option("--config", sched.c.config, "Train config; its full schedule is printed");
    sched_cmd->add_option("--out", sched.c.out, "Also write the CSV here");

    Train tr;
    auto* train_cmd = app.add_subcommand("train", "Pre-train on a corpus");
    add_seed(train_cmd, tr.c, true);
    train_cmd->add_option("--config", tr.c.config, "Train config JSON");
    train_cmd->add_option("--data", tr.data, "Corpus directory")->required();
    train_cmd->add_option("--out", tr.c.out, "Run directory")->required();
    train_cmd->add_option("--init", tr.init, "Start from this checkpoint");
    train_cmd->add_option("--variant", tr.variant)->check(CLI::IsMember({"base", "p16-rd", "p16-r25", "custom"}));
    train_cmd->add_option("--mode", tr.mode)->check(CLI::IsMember({"prompt", "full"}));
    train_cmd->add_option("--task", tr.task)->check(CLI::IsMember({"shuffle", "mask"}));
    train_cmd->add_option("--epochs", tr.epochs);
    train_cmd->add_option("--group", tr.group);
    train_cmd->add_option("--batch", tr.batch);
    train_cmd->add_option("--lr", tr.lr);

    Reconstruct recon;
    auto* recon_cmd = app.add_subcommand("reconstruct", "Write original|puzzle|restored panels");
    add_seed(recon_cmd, recon.c, true);
    add_puzzle_flags(recon_cmd, recon.p);
    recon_cmd->add_option("--checkpoint", recon.checkpoint)->required();
    recon_cmd->add_option("--data", recon.data, "Corpus directory")->required();
    recon_cmd->add_option("--count", recon.count, "Images to reconstruct (default: one group)");
    recon_cmd->add_option("--out", recon.c.out, "Output directory")->required();

    Probe probe;
    auto* probe_cmd = app.add_subcommand("probe", "Linear probe on frozen cls features");
    probe.seed_opt = add_seed(probe_cmd, probe.c, false);
    probe_cmd->add_option("--checkpoint", probe.checkpoint, "Checkpoint directory (random init when omitted)");
    probe_cmd->add_option("--config", probe.c.config, "Train config for the random-init model");
    probe_cmd->add_option("--data", probe.data, "Labeled corpus directory")->required();
    probe_cmd->add_option("--iterations", probe.probe.iterations)->capture_default_str();
    probe_cmd->add_option("--test-fraction", probe.probe.test_fraction)->check(CLI::Range(0.0, 1.0));
    probe_cmd->add_option("--out", probe.c.out, "Also write the JSON here");

    CheckGrad grad;
    grad.p.fix_ratio = 0.5;
    auto* grad_cmd = app.add_subcommand("check-grad", "Finite-difference check of the full training loss");
    add_seed(grad_cmd, grad.c, true);
    add_puzzle_flags(grad_cmd, grad.p);
    grad_cmd->add_option("--config", grad.c.config, "Train config whose model is checked (default: tiny model)");
    grad_cmd->add_option("--coords", grad.coords)->capture_default_str();
    grad_cmd->add_option("--eps", grad.eps)->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--tol", grad.tol)->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--jitter", grad.jitter, "Uniform parameter perturbation")->capture_default_str();
    grad_cmd->add_option("--images", grad.images)->check(CLI::PositiveNumber)->capture_default_str();
    grad_cmd->add_option("--out", grad.c.out, "Also write the JSON here");

    Verify verify;
    verify.c.seed = 2024;
    auto* verify_cmd = app.add_subcommand("verify", "Run acceptance criteria");
    verify_cmd->add_option("--criterion", verify.criteria, "Criterion id, repeatable (default: all)")
        ->check(CLI::IsMember(acceptance::criterion_ids()));
    verify_cmd->add_option("--seed", verify.c.seed)->capture_default_str();
    verify_cmd->add_option("--work-dir", verify.work_dir, "Scratch directory");
    verify_cmd->add_option("--out", verify.c.out, "Write results as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_line("UsageError", e.what());
        return 2;
    }

    try {
        configure_logging();
        kernels::set_num_threads(threads);
        if (*gen_cmd) {
            gen.run();
        } else if (*make_cmd) {
            make.run();
        } else if (*rest_cmd) {
            rest.run();
        } else if (*sched_cmd) {
            sched.run();
        } else if (*train_cmd) {
            tr.run();
        } else if (*recon_cmd) {
            recon.run();
        } else if (*probe_cmd) {
            probe.run();
        } else if (*grad_cmd) {
            grad.run();
        } else if (*verify_cmd) {
            verify.run();
        }
    } catch (const UsageError& e) {
        error_line("UsageError", e.what());
        return 2;
    } catch (const CheckFailed& e) {
        error_line("CheckFailed", e.what());
        return 1;
    } catch (const Error& e) {
        error_line(std::string(to_string(e.code())), e.what());
        return 1;
    } catch (const std::exception& e) {
        error_line("InternalError", e.what());
        return 1;
    }
    return 0;
}
