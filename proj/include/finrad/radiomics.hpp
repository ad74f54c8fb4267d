#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "finrad/image.hpp"

namespace finrad::radiomics {

inline constexpr int kDefaultGrayLevels = 16;

/// One co-occurrence matrix at a fixed pixel offset, symmetrized and
/// normalized. Marginals and the gray-level difference distribution are kept
/// alongside because every consumer needs them.
struct GlcmOffset {
    int dr = 0;
    int dc = 0;
    std::vector<double> p;      // ng x ng, row-major, indexed by (level-1)
    double mu_x = 0.0;
    double mu_y = 0.0;
    std::vector<double> p_diff; // p_diff[k] = sum of p(i,j) over |i-j| == k
};

/// Gray-level co-occurrence matrices for the four distance-1 directions
/// {(0,1),(1,1),(1,0),(1,-1)}. Directions with no valid pixel pair (thin
/// images) are dropped; features average over the retained directions.
struct Glcm {
    int ng = 0;
    std::vector<GlcmOffset> offsets;
    std::vector<double> p_mean; // ng x ng mean over retained offsets

    double p_at(const GlcmOffset& o, int i, int j) const {
        return o.p[static_cast<size_t>(i - 1) * ng + (j - 1)];
    }
};

/// Gray-level size-zone matrix. A zone is a maximal 8-connected set of
/// pixels sharing one discretized level; counts(i,j) is the number of zones
/// of level i (1-based) and size j (1-based, up to max_zone).
struct Glszm {
    int ng = 0;
    int max_zone = 0;
    long long nz = 0;            // total zone count
    std::vector<long long> counts; // ng x max_zone, row-major
    double mu = 0.0;             // mean gray level under p = counts / nz

    long long count_at(int level, int size) const {
        return counts[static_cast<size_t>(level - 1) * max_zone + (size - 1)];
    }
};

/// The six imitated features, in the fixed order used everywhere downstream.
struct FeatureVector {
    double autocorrelation = 0.0;
    double gray_level_variance = 0.0;
    double cluster_shade = 0.0;
    double difference_entropy = 0.0;
    double size_zone_non_uniformity = 0.0;
    double skewness = 0.0;

    static constexpr int kCount = 6;
    static const std::array<std::string, kCount>& names();

    std::array<double, kCount> values() const {
        return {autocorrelation,     gray_level_variance,
                cluster_shade,       difference_entropy,
                size_zone_non_uniformity, skewness};
    }
    double operator[](int i) const { return values()[static_cast<size_t>(i)]; }
};

/// Index of a feature name in FeatureVector order; throws InvalidArgument
/// for unknown names.
int feature_index(const std::string& name);

Glcm build_glcm(const imaging::DiscretizedImage& img);

/// Mean over directions of sum_{i,j} i*j*p(i,j); range [1, ng^2].
double autocorrelation(const Glcm& g);

/// Mean over directions of sum (i + j - mu_x - mu_y)^3 * p(i,j).
double cluster_shade(const Glcm& g);

/// Mean over directions of -sum_k p_diff(k) * log2(p_diff(k) + 1e-16).
double difference_entropy(const Glcm& g);

Glszm build_glszm(const imaging::DiscretizedImage& img);

/// sum_j (sum_i counts(i,j))^2 / nz; range [1, nz].
double size_zone_non_uniformity(const Glszm& z);

/// sum_{i,j} p(i,j) * (i - mu)^2 over the normalized zone distribution.
double gray_level_variance(const Glszm& z);

/// Third standardized moment of the raw intensities (population moments).
/// Returns 0 when the variance is below 1e-12.
double skewness(const imaging::GrayImage& img);

/// Discretize with ng levels, build both texture matrices, and evaluate all
/// six features.
FeatureVector extract_features(const imaging::GrayImage& img,
                               int ng = kDefaultGrayLevels);

/// CSV emission: fixed header, one row per (path, features), 12 significant
/// digits per value.
void write_feature_csv_header(std::ostream& out);
void write_feature_csv_row(std::ostream& out, const std::string& path,
                           const FeatureVector& fv);

} // namespace finrad::radiomics
