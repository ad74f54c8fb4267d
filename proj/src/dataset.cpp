#include "finrad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "finrad/errors.hpp"
#include "finrad/image_io.hpp"
#include "finrad/rng.hpp"

namespace finrad::harness {

namespace {

// Smooth random field: white noise on a coarse grid, bilinearly upsampled,
// then standardized. corr_len controls the grid spacing.
imaging::GrayImage smooth_field(Pcg64& rng, int size, double corr_len) {
    const int g = std::max(2, static_cast<int>(std::lround(size / corr_len)) + 1);
    imaging::GrayImage coarse(g, g);
    for (auto& v : coarse.data) v = rng.normal();
    imaging::GrayImage field = imaging::resize(coarse, size, size);

    double mean = 0.0;
    for (double v : field.data) mean += v;
    mean /= static_cast<double>(field.data.size());
    double var = 0.0;
    for (double v : field.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(field.data.size());
    const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    for (auto& v : field.data) v = (v - mean) * scale;
    return field;
}

void add_gaussian_blob(imaging::GrayImage& img, double cx, double cy, double r,
                       double amp) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            img.at(y, x) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
        }
    }
}

void clamp01(imaging::GrayImage& img) {
    for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

std::string csv_field(const std::string& line, size_t& pos) {
    const size_t comma = line.find(',', pos);
    std::string field = comma == std::string::npos
                            ? line.substr(pos)
                            : line.substr(pos, comma - pos);
    pos = comma == std::string::npos ? line.size() : comma + 1;
    return field;
}

} // namespace

Dataset gen_texture_dataset(int n, int classes, uint64_t seed, double imbalance) {
    if (classes < 2) throw InvalidArgument("gen_texture_dataset: need >= 2 classes");
    if (n < classes * 20)
        throw InvalidArgument("gen_texture_dataset: n must be >= 20 per class, got " +
                              std::to_string(n));
    if (imbalance < 1.0)
        throw InvalidArgument("gen_texture_dataset: imbalance must be >= 1");

    constexpr int kSize = 64;
    Dataset d;
    d.task = TaskKind::classification;
    d.classes = classes;
    d.images.reserve(static_cast<size_t>(n));
    d.labels.reserve(static_cast<size_t>(n));

    const int minority_period =
        classes == 2 ? static_cast<int>(std::lround(imbalance)) + 1 : 0;

    for (int idx = 0; idx < n; ++idx) {
        const int label = classes == 2 ? (idx % minority_period == 0 ? 0 : 1)
                                       : idx % classes;
        Pcg64 rng = derive_rng(seed, rng_domain::texture_item, static_cast<uint64_t>(idx));

        // Class-dependent texture process, jittered per image.
        const double corr_len =
            (3.0 + 2.5 * label) * std::exp(rng.uniform(-0.35, 0.35));
        const double speckle =
            (0.040 + 0.035 * label) * std::exp(rng.uniform(-0.40, 0.40));
        const double blob_amp = 0.22 + 0.10 * label + rng.uniform(-0.05, 0.05);

        imaging::GrayImage img = smooth_field(rng, kSize, corr_len);
        for (auto& v : img.data) v = 0.45 + 0.16 * v;

        // Odd classes concentrate blobs toward the center: a spatial cue the
        // aggregate texture features cannot see but a CNN can.
        const int blobs = static_cast<int>(rng.below(4));
        for (int b = 0; b < blobs; ++b) {
            double cx, cy;
            if (label % 2 == 1) {
                cx = kSize / 2.0 + rng.uniform(-10.0, 10.0);
                cy = kSize / 2.0 + rng.uniform(-10.0, 10.0);
            } else {
                cx = rng.uniform(6.0, kSize - 6.0);
                cy = rng.uniform(6.0, kSize - 6.0);
            }
            add_gaussian_blob(img, cx, cy, rng.uniform(5.0, 9.0), blob_amp);
        }

        for (auto& v : img.data) v += speckle * rng.uniform(-1.0, 1.0);
        clamp01(img);

        d.images.push_back(std::move(img));
        d.labels.push_back(label);
    }
    return d;
}

Dataset gen_blob_dataset(int n, uint64_t seed) {
    if (n < 50) throw InvalidArgument("gen_blob_dataset: n must be >= 50");

    constexpr int kSize = 128;
    Dataset d;
    d.task = TaskKind::segmentation;
    d.images.reserve(static_cast<size_t>(n));
    d.masks.reserve(static_cast<size_t>(n));
    d.tags.reserve(static_cast<size_t>(n));

    for (int idx = 0; idx < n; ++idx) {
        Pcg64 rng = derive_rng(seed, rng_domain::blob_item, static_cast<uint64_t>(idx));

        const double corr_len = 7.0 * std::exp(rng.uniform(-0.3, 0.3));
        imaging::GrayImage img = smooth_field(rng, kSize, corr_len);
        for (auto& v : img.data) v = 0.35 + 0.07 * v;
        imaging::GrayImage mask(kSize, kSize, 0.0);

        const int blobs = static_cast<int>(rng.below(4));
        for (int b = 0; b < blobs; ++b) {
            const double cx = rng.uniform(18.0, kSize - 18.0);
            const double cy = rng.uniform(18.0, kSize - 18.0);
            const double r1 = rng.uniform(8.0, 18.0);
            const double r2 = r1 * rng.uniform(0.7, 1.3);
            const double angle = rng.uniform(0.0, 3.14159265358979323846);
            const double amp = rng.uniform(0.30, 0.50);
            const double ca = std::cos(angle), sa = std::sin(angle);
            for (int y = 0; y < kSize; ++y) {
                for (int x = 0; x < kSize; ++x) {
                    const double dx = x - cx;
                    const double dy = y - cy;
                    const double u = (dx * ca + dy * sa) / r1;
                    const double v = (-dx * sa + dy * ca) / r2;
                    const double dist2 = u * u + v * v;
                    img.at(y, x) += amp * std::exp(-1.5 * dist2);
                    if (dist2 <= 1.0) mask.at(y, x) = 1.0;
                }
            }
        }

        for (auto& v : img.data) v += 0.02 * rng.uniform(-1.0, 1.0);
        clamp01(img);

        const int phase = idx % 20;
        d.tags.push_back(phase < 14 ? SplitTag::train
                                    : (phase < 17 ? SplitTag::val : SplitTag::test));
        d.images.push_back(std::move(img));
        d.masks.push_back(std::move(mask));
    }
    return d;
}

FoldSplit kfold_split(const Dataset& d, int k, uint64_t seed) {
    const int n = static_cast<int>(d.size());
    if (k < 2) throw InvalidArgument("kfold_split: k must be >= 2");
    if (k > n)
        throw InvalidArgument("kfold_split: k = " + std::to_string(k) +
                              " exceeds dataset size " + std::to_string(n));

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Pcg64 rng = derive_rng(seed, rng_domain::kfold, 0);
    rng.shuffle(order);

    FoldSplit split;
    split.k = k;
    split.seed = seed;
    split.folds.resize(static_cast<size_t>(k));
    const int base = n / k;
    const int extra = n % k;
    int pos = 0;
    for (int f = 0; f < k; ++f) {
        const int len = base + (f < extra ? 1 : 0);
        split.folds[static_cast<size_t>(f)].assign(order.begin() + pos,
                                                   order.begin() + pos + len);
        pos += len;
    }
    return split;
}

FoldIndices fold_indices(const FoldSplit& split, int fold) {
    if (fold < 0 || fold >= split.k)
        throw InvalidArgument("fold_indices: fold out of range");
    FoldIndices out;
    out.test = split.folds[static_cast<size_t>(fold)];
    std::vector<int> rest;
    for (int f = 0; f < split.k; ++f)
        if (f != fold)
            rest.insert(rest.end(), split.folds[static_cast<size_t>(f)].begin(),
                        split.folds[static_cast<size_t>(f)].end());
    const size_t n_val = std::max<size_t>(1, rest.size() / 9);
    out.val.assign(rest.end() - static_cast<long>(n_val), rest.end());
    out.train.assign(rest.begin(), rest.end() - static_cast<long>(n_val));
    return out;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw IoError("cannot open manifest " + path.string());
    std::vector<std::string> lines;
    std::string row;
    while (std::getline(file, row)) {
        while (!row.empty() && (row.back() == '\r' || row.back() == '\n'))
            row.pop_back();
        if (!row.empty()) lines.push_back(row);
    }
    return lines;
}

} // namespace

Dataset load_manifest(const std::filesystem::path& manifest_path) {
    const std::vector<std::string> lines = read_lines(manifest_path);
    if (lines.empty())
        throw CorruptFileError("empty manifest " + manifest_path.string());
    const std::filesystem::path base = manifest_path.parent_path();

    size_t start = 0;
    bool segmentation = false;
    {
        size_t pos = 0;
        const std::string first = csv_field(lines[0], pos);
        if (first == "path") {
            start = 1;
            segmentation = lines[0].find("mask_path") != std::string::npos;
        }
    }

    Dataset d;
    d.task = segmentation ? TaskKind::segmentation : TaskKind::classification;
    int max_label = -1;
    for (size_t r = start; r < lines.size(); ++r) {
        size_t pos = 0;
        const std::string img_rel = csv_field(lines[r], pos);
        const std::string second = pos < lines[r].size() ? csv_field(lines[r], pos) : "";
        d.images.push_back(imaging::load_image(base / img_rel));
        if (segmentation) {
            if (second.empty())
                throw CorruptFileError("manifest row missing mask_path: " + lines[r]);
            imaging::GrayImage mask = imaging::load_image(base / second);
            for (auto& v : mask.data) v = v >= 0.5 ? 1.0 : 0.0;
            d.masks.push_back(std::move(mask));
        } else {
            const int label = second.empty() ? 0 : std::stoi(second);
            if (label < 0)
                throw CorruptFileError("negative label in manifest: " + lines[r]);
            d.labels.push_back(label);
            max_label = std::max(max_label, label);
        }
    }
    if (d.images.empty())
        throw CorruptFileError("manifest has no rows: " + manifest_path.string());
    d.classes = d.task == TaskKind::classification ? max_label + 1 : 0;
    return d;
}

std::vector<std::string> manifest_paths(const std::filesystem::path& manifest_path) {
    const std::vector<std::string> lines = read_lines(manifest_path);
    std::vector<std::string> paths;
    for (size_t r = 0; r < lines.size(); ++r) {
        size_t pos = 0;
        const std::string p = csv_field(lines[r], pos);
        if (r == 0 && p == "path") continue;
        paths.push_back(p);
    }
    if (paths.empty())
        throw CorruptFileError("manifest has no rows: " + manifest_path.string());
    return paths;
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw IoError("cannot write manifest in " + dir.string());

    char name[64];
    if (d.task == TaskKind::classification) {
        manifest << "path,label\n";
        for (size_t i = 0; i < d.images.size(); ++i) {
            std::snprintf(name, sizeof(name), "img_%05zu.pgm", i);
            imaging::save_pgm(dir / name, d.images[i]);
            manifest << name << "," << d.labels[i] << "\n";
        }
    } else {
        manifest << "path,mask_path\n";
        for (size_t i = 0; i < d.images.size(); ++i) {
            std::snprintf(name, sizeof(name), "img_%05zu.pgm", i);
            imaging::save_pgm(dir / name, d.images[i]);
            char mask_name[64];
            std::snprintf(mask_name, sizeof(mask_name), "mask_%05zu.pgm", i);
            imaging::save_pgm(dir / mask_name, d.masks[i]);
            manifest << name << "," << mask_name << "\n";
        }
    }
}

} // namespace finrad::harness
