#include "finrad/radiomics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "finrad/errors.hpp"

namespace finrad::radiomics {

namespace {

constexpr double kLogEps = 1e-16;
constexpr int kOffsets[4][2] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}}; // (dr, dc)

void require_discretized(const imaging::DiscretizedImage& img) {
    if (img.num_levels < 2)
        throw InvalidArgument("texture matrix: need at least 2 gray levels");
    if (img.width < 1 || img.height < 1 || img.levels.empty())
        throw InvalidArgument("texture matrix: empty image");
}

} // namespace

const std::array<std::string, FeatureVector::kCount>& FeatureVector::names() {
    static const std::array<std::string, kCount> kNames = {
        "autocorrelation",     "gray_level_variance",
        "cluster_shade",       "difference_entropy",
        "size_zone_non_uniformity", "skewness"};
    return kNames;
}

int feature_index(const std::string& name) {
    const auto& names = FeatureVector::names();
    for (int i = 0; i < FeatureVector::kCount; ++i)
        if (names[static_cast<size_t>(i)] == name) return i;
    throw InvalidArgument("unknown feature name: " + name);
}

Glcm build_glcm(const imaging::DiscretizedImage& img) {
    require_discretized(img);
    const int ng = img.num_levels;
    const int w = img.width;
    const int h = img.height;

    Glcm glcm;
    glcm.ng = ng;

    for (const auto& off : kOffsets) {
        const int dr = off[0];
        const int dc = off[1];
        std::vector<double> counts(static_cast<size_t>(ng) * ng, 0.0);
        long long pairs = 0;
        for (int y = 0; y < h; ++y) {
            const int y2 = y + dr;
            if (y2 < 0 || y2 >= h) continue;
            for (int x = 0; x < w; ++x) {
                const int x2 = x + dc;
                if (x2 < 0 || x2 >= w) continue;
                const int a = img.at(y, x) - 1;
                const int b = img.at(y2, x2) - 1;
                // Count both orderings: equivalent to adding the transpose.
                counts[static_cast<size_t>(a) * ng + b] += 1.0;
                counts[static_cast<size_t>(b) * ng + a] += 1.0;
                ++pairs;
            }
        }
        if (pairs == 0) continue;

        GlcmOffset o;
        o.dr = dr;
        o.dc = dc;
        o.p.resize(counts.size());
        const double total = 2.0 * static_cast<double>(pairs);
        for (size_t i = 0; i < counts.size(); ++i) o.p[i] = counts[i] / total;

        o.p_diff.assign(static_cast<size_t>(ng), 0.0);
        for (int i = 1; i <= ng; ++i) {
            double row = 0.0;
            for (int j = 1; j <= ng; ++j) {
                const double pij = o.p[static_cast<size_t>(i - 1) * ng + (j - 1)];
                row += pij;
                o.p_diff[static_cast<size_t>(std::abs(i - j))] += pij;
            }
            o.mu_x += i * row;
        }
        o.mu_y = o.mu_x; // symmetric by construction
        glcm.offsets.push_back(std::move(o));
    }

    if (glcm.offsets.empty())
        throw InvalidArgument("build_glcm: image too small for any direction");

    glcm.p_mean.assign(static_cast<size_t>(ng) * ng, 0.0);
    for (const auto& o : glcm.offsets)
        for (size_t i = 0; i < glcm.p_mean.size(); ++i) glcm.p_mean[i] += o.p[i];
    for (auto& v : glcm.p_mean) v /= static_cast<double>(glcm.offsets.size());
    return glcm;
}

double autocorrelation(const Glcm& g) {
    double mean = 0.0;
    for (const auto& o : g.offsets) {
        double acc = 0.0;
        for (int i = 1; i <= g.ng; ++i)
            for (int j = 1; j <= g.ng; ++j)
                acc += static_cast<double>(i) * j * g.p_at(o, i, j);
        mean += acc;
    }
    return mean / static_cast<double>(g.offsets.size());
}

double cluster_shade(const Glcm& g) {
    double mean = 0.0;
    for (const auto& o : g.offsets) {
        const double center = o.mu_x + o.mu_y;
        double acc = 0.0;
        for (int i = 1; i <= g.ng; ++i)
            for (int j = 1; j <= g.ng; ++j) {
                const double d = i + j - center;
                acc += d * d * d * g.p_at(o, i, j);
            }
        mean += acc;
    }
    return mean / static_cast<double>(g.offsets.size());
}

double difference_entropy(const Glcm& g) {
    double mean = 0.0;
    for (const auto& o : g.offsets) {
        double acc = 0.0;
        for (double pk : o.p_diff)
            if (pk > 0.0) acc -= pk * std::log2(pk + kLogEps);
        mean += acc;
    }
    return mean / static_cast<double>(g.offsets.size());
}

Glszm build_glszm(const imaging::DiscretizedImage& img) {
    require_discretized(img);
    const int w = img.width;
    const int h = img.height;

    std::vector<char> visited(img.levels.size(), 0);
    std::vector<std::pair<int, long long>> zones; // (level, size)
    std::vector<int> stack;
    long long max_zone = 0;

    for (size_t start = 0; start < img.levels.size(); ++start) {
        if (visited[start]) continue;
        const int level = img.levels[start];
        long long size = 0;
        stack.push_back(static_cast<int>(start));
        visited[start] = 1;
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            ++size;
            const int y = idx / w;
            const int x = idx % w;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int ny = y + dy;
                    const int nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const size_t nidx = static_cast<size_t>(ny) * w + nx;
                    if (visited[nidx] || img.levels[nidx] != level) continue;
                    visited[nidx] = 1;
                    stack.push_back(static_cast<int>(nidx));
                }
            }
        }
        zones.emplace_back(level, size);
        max_zone = std::max(max_zone, size);
    }

    Glszm z;
    z.ng = img.num_levels;
    z.max_zone = static_cast<int>(max_zone);
    z.nz = static_cast<long long>(zones.size());
    z.counts.assign(static_cast<size_t>(z.ng) * z.max_zone, 0);
    for (const auto& [level, size] : zones)
        ++z.counts[static_cast<size_t>(level - 1) * z.max_zone + (size - 1)];

    double mu = 0.0;
    for (int i = 1; i <= z.ng; ++i) {
        long long row = 0;
        for (int j = 1; j <= z.max_zone; ++j) row += z.count_at(i, j);
        mu += static_cast<double>(i) * static_cast<double>(row);
    }
    z.mu = mu / static_cast<double>(z.nz);
    return z;
}

double size_zone_non_uniformity(const Glszm& z) {
    double acc = 0.0;
    for (int j = 1; j <= z.max_zone; ++j) {
        long long col = 0;
        for (int i = 1; i <= z.ng; ++i) col += z.count_at(i, j);
        acc += static_cast<double>(col) * static_cast<double>(col);
    }
    return acc / static_cast<double>(z.nz);
}

double gray_level_variance(const Glszm& z) {
    double acc = 0.0;
    for (int i = 1; i <= z.ng; ++i) {
        long long row = 0;
        for (int j = 1; j <= z.max_zone; ++j) row += z.count_at(i, j);
        const double d = static_cast<double>(i) - z.mu;
        acc += d * d * static_cast<double>(row);
    }
    return acc / static_cast<double>(z.nz);
}

double skewness(const imaging::GrayImage& img) {
    if (img.data.empty()) throw InvalidArgument("skewness: empty image");
    const double n = static_cast<double>(img.data.size());
    const double mean =
        std::accumulate(img.data.begin(), img.data.end(), 0.0) / n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : img.data) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 < 1e-12) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

FeatureVector extract_features(const imaging::GrayImage& img, int ng) {
    const imaging::DiscretizedImage disc = imaging::discretize(img, ng);
    const Glcm glcm = build_glcm(disc);
    const Glszm glszm = build_glszm(disc);

    FeatureVector fv;
    fv.autocorrelation = autocorrelation(glcm);
    fv.gray_level_variance = gray_level_variance(glszm);
    fv.cluster_shade = cluster_shade(glcm);
    fv.difference_entropy = difference_entropy(glcm);
    fv.size_zone_non_uniformity = size_zone_non_uniformity(glszm);
    fv.skewness = skewness(img);
    return fv;
}

void write_feature_csv_header(std::ostream& out) {
    out << "path";
    for (const auto& name : FeatureVector::names()) out << "," << name;
    out << "\n";
}

void write_feature_csv_row(std::ostream& out, const std::string& path,
                           const FeatureVector& fv) {
    out << path;
    char buf[64];
    for (double v : fv.values()) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        out << "," << buf;
    }
    out << "\n";
}

} // namespace finrad::radiomics
