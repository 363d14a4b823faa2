#include "puzzletune/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>

#include <fmt/core.h>

#include "puzzletune/error.hpp"
#include "puzzletune/kernels.hpp"
#include "puzzletune/rng.hpp"

namespace puzzletune {

namespace {

constexpr std::size_t kHistogramBins = 8;

double chebyshev(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double d = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        d = std::max(d, std::abs(a[c] - b[c]));
    }
    return d;
}

void render(const ClassTexture& tex, std::size_t side, double jitter, Rng& rng, std::span<double> out) {
    const std::size_t plane = side * side;
    std::array<double, 3> base = tex.base;
    for (auto& v : base) {
        v += rng.uniform(-jitter, jitter);
    }
    // Faint linear shading across the field.
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle) * 0.05;
    const double gy = std::sin(angle) * 0.05;
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const double shade = gx * (static_cast<double>(x) / side - 0.5) + gy * (static_cast<double>(y) / side - 0.5);
            for (std::size_t c = 0; c < 3; ++c) {
                out[c * plane + y * side + x] = base[c] + shade;
            }
        }
    }

    const double area = static_cast<double>(plane) / 256.0;
    const double expected = tex.blob_density * area;
    const auto blobs = static_cast<std::size_t>(std::floor(expected + rng.uniform()));
    const double s = static_cast<double>(side);
    for (std::size_t k = 0; k < blobs; ++k) {
        const double cx = rng.uniform(0.0, s);
        const double cy = rng.uniform(0.0, s);
        const double rx = rng.uniform(tex.radius_min, tex.radius_max) * s;
        const double ry = rng.uniform(tex.radius_min, tex.radius_max) * s;
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const double ct = std::cos(theta);
        const double st = std::sin(theta);
        const double shade = rng.uniform(0.85, 1.15);
        for (std::size_t y = 0; y < side; ++y) {
            for (std::size_t x = 0; x < side; ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx;
                const double dy = static_cast<double>(y) + 0.5 - cy;
                const double u = (dx * ct + dy * st) / rx;
                const double v = (-dx * st + dy * ct) / ry;
                if (u * u + v * v <= 1.0) {
                    for (std::size_t c = 0; c < 3; ++c) {
                        out[c * plane + y * side + x] = tex.blob_color[c] * shade;
                    }
                }
            }
        }
    }
    for (auto& v : out) {
        v = std::clamp(v + rng.uniform(-tex.noise, tex.noise), 0.0, 1.0);
    }
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
}

std::vector<double> histogram(std::span<const double> image, std::size_t plane) {
    std::vector<double> h(3 * kHistogramBins, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const auto bin = std::min(kHistogramBins - 1,
                                      static_cast<std::size_t>(image[c * plane + i] * static_cast<double>(kHistogramBins)));
            h[c * kHistogramBins + bin] += 1.0 / static_cast<double>(plane);
        }
    }
    return h;
}

}  // namespace

std::vector<ClassTexture> default_textures(std::size_t class_count, std::uint64_t seed) {
    Rng rng = Rng(seed).fork("textures");
    std::vector<ClassTexture> out;
    std::size_t attempts = 0;
    while (out.size() < class_count) {
        if (++attempts > 100000) {
            fail(ErrorCode::ConfigError, fmt::format("cannot place {} classes with distinct base colors", class_count));
        }
        ClassTexture tex;
        for (auto& v : tex.base) {
            v = rng.uniform(0.35, 0.95);
        }
        const bool distinct = std::all_of(out.begin(), out.end(), [&](const ClassTexture& other) {
            return chebyshev(other.base, tex.base) >= kMinBaseDistance;
        });
        if (!distinct) {
            continue;
        }
        // Dark stained nuclei on a lighter field.
        for (std::size_t c = 0; c < 3; ++c) {
            tex.blob_color[c] = tex.base[c] * rng.uniform(0.2, 0.5);
        }
        tex.blob_density = rng.uniform(0.5, 3.0);
        tex.radius_min = rng.uniform(0.03, 0.08);
        tex.radius_max = tex.radius_min + rng.uniform(0.02, 0.10);
        tex.noise = rng.uniform(0.02, 0.06);
        out.push_back(tex);
    }
    return out;
}

Corpus generate(const SyntheticSpec& spec) {
    if (spec.side < 16) {
        fail(ErrorCode::ConfigError, "synthetic images need a side of at least 16 pixels");
    }
    if (spec.class_count == 0 || spec.per_class == 0) {
        fail(ErrorCode::ConfigError, "synthetic corpus needs at least one class and one image per class");
    }
    const auto textures = spec.textures.empty() ? default_textures(spec.class_count, spec.seed) : spec.textures;
    if (textures.size() != spec.class_count) {
        fail(ErrorCode::ConfigError, "texture list does not match class_count");
    }
    for (std::size_t a = 0; a < textures.size(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            if (chebyshev(textures[a].base, textures[b].base) < kMinBaseDistance) {
                fail(ErrorCode::ConfigError, fmt::format("classes {} and {} have base colors closer than {}", b, a,
                                                         kMinBaseDistance));
            }
        }
    }
    const std::size_t n = spec.class_count * spec.per_class;
    const std::size_t per_image = 3 * spec.side * spec.side;
    std::vector<double> pixels(n * per_image);
    Corpus corpus;
    corpus.labels.resize(n);
    const Rng root = Rng(spec.seed).fork("images");
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (kernels::num_threads() > 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::size_t label = idx / spec.per_class;
        Rng rng = root.fork("image", idx);
        render(textures[label], spec.side, spec.color_jitter, rng,
               std::span<double>(pixels).subspan(idx * per_image, per_image));
        corpus.labels[idx] = static_cast<int>(label);
    }
    corpus.images = Tensor({n, 3, spec.side, spec.side}, std::move(pixels));
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) {
        fail(ErrorCode::IoError, "cannot create " + (dir / "images").string());
    }
    const std::size_t n = corpus.images.dim(0);
    const std::size_t per_image = corpus.images.numel() / n;
    const Shape shape{3, corpus.images.dim(2), corpus.images.dim(3)};
    std::string labels = "filename,class\n";
    for (std::size_t i = 0; i < n; ++i) {
        auto begin = corpus.images.data().begin() + static_cast<std::ptrdiff_t>(i * per_image);
        const Tensor image(shape, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(per_image)));
        const std::string name = fmt::format("{:04d}.ppm", i);
        ppm::write_file(dir / "images" / name, image);
        labels += fmt::format("{},{}\n", name, corpus.labels[i]);
    }
    write_bytes(dir / "labels.csv", std::vector<std::uint8_t>(labels.begin(), labels.end()));
}

Corpus read_corpus(const std::filesystem::path& dir) {
    std::ifstream in(dir / "labels.csv");
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + (dir / "labels.csv").string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "filename,class") {
        fail(ErrorCode::FileFormatError, "labels.csv must start with 'filename,class'");
    }
    Corpus corpus;
    std::vector<double> pixels;
    Shape shape;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            fail(ErrorCode::FileFormatError, "labels.csv row without a comma: " + line);
        }
        int label = 0;
        try {
            label = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            fail(ErrorCode::FileFormatError, "labels.csv row with a bad class: " + line);
        }
        const Tensor image = ppm::read_file(dir / "images" / line.substr(0, comma));
        if (shape.empty()) {
            shape = image.shape();
        } else if (image.shape() != shape) {
            fail(ErrorCode::FileFormatError, "corpus images differ in size");
        }
        pixels.insert(pixels.end(), image.data().begin(), image.data().end());
        corpus.labels.push_back(label);
    }
    if (corpus.labels.empty()) {
        fail(ErrorCode::FileFormatError, "corpus has no images");
    }
    corpus.images = Tensor({corpus.labels.size(), 3, shape[1], shape[2]}, std::move(pixels));
    return corpus;
}

Learnability histogram_distances(const Corpus& corpus) {
    const std::size_t n = corpus.images.dim(0);
    const std::size_t plane = corpus.images.dim(2) * corpus.images.dim(3);
    std::vector<std::vector<double>> hists;
    for (std::size_t i = 0; i < n; ++i) {
        hists.push_back(histogram(corpus.images.data().subspan(i * 3 * plane, 3 * plane), plane));
    }
    double within = 0.0;
    double between = 0.0;
    std::size_t within_count = 0;
    std::size_t between_count = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            double d = 0.0;
            for (std::size_t k = 0; k < hists[a].size(); ++k) {
                d += std::abs(hists[a][k] - hists[b][k]);
            }
            if (corpus.labels[a] == corpus.labels[b]) {
                within += d;
                ++within_count;
            } else {
                between += d;
                ++between_count;
            }
        }
    }
    return {within_count ? within / static_cast<double>(within_count) : 0.0,
            between_count ? between / static_cast<double>(between_count) : 0.0};
}

namespace ppm {

std::uint8_t quantize(double value) {
    const double scaled = std::floor(std::clamp(value, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(scaled);
}

Tensor quantize8(const Tensor& image) {
    std::vector<double> out(image.numel());
    std::transform(image.data().begin(), image.data().end(), out.begin(),
                   [](double v) { return static_cast<double>(quantize(v)) / 255.0; });
    return Tensor(image.shape(), std::move(out));
}

std::vector<std::uint8_t> encode(const Tensor& image) {
    const bool batched = image.rank() == 4 && image.dim(0) == 1;
    if (!(image.rank() == 3 || batched) || image.dim(batched ? 1 : 0) != 3) {
        fail(ErrorCode::ShapeMismatch, "PPM expects [3,h,w] or [1,3,h,w], got " + to_string(image.shape()));
    }
    const std::size_t h = image.dim(batched ? 2 : 1);
    const std::size_t w = image.dim(batched ? 3 : 2);
    const std::string header = fmt::format("P6\n{} {}\n255\n", w, h);
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + 3 * h * w);
    const auto data = image.data();
    for (std::size_t i = 0; i < h * w; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            out.push_back(quantize(data[c * h * w + i]));
        }
    }
    return out;
}

Tensor decode(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&]() -> std::size_t {
        skip_space();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
            value = value * 10 + (bytes[pos++] - '0');
            ++digits;
        }
        if (digits == 0) {
            fail(ErrorCode::MalformedHeader, "PPM header field is not a number");
        }
        return value;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        fail(ErrorCode::MalformedHeader, "PPM must start with P6");
    }
    pos = 2;
    const std::size_t w = number();
    const std::size_t h = number();
    const std::size_t maxval = number();
    if (w == 0 || h == 0 || maxval != 255) {
        fail(ErrorCode::MalformedHeader, fmt::format("unsupported PPM geometry {}x{} maxval {}", w, h, maxval));
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        fail(ErrorCode::MalformedHeader, "PPM header must end with one whitespace byte");
    }
    ++pos;
    if (bytes.size() - pos < 3 * w * h) {
        fail(ErrorCode::TruncatedPayload, fmt::format("PPM payload holds {} of {} bytes", bytes.size() - pos, 3 * w * h));
    }
    std::vector<double> data(3 * w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            data[c * w * h + i] = static_cast<double>(bytes[pos + 3 * i + c]) / 255.0;
        }
    }
    return Tensor({3, h, w}, std::move(data));
}

void write_file(const std::filesystem::path& path, const Tensor& image) { write_bytes(path, encode(image)); }

Tensor read_file(const std::filesystem::path& path) { return decode(read_bytes(path)); }

}  // namespace ppm

}  // namespace puzzletune
