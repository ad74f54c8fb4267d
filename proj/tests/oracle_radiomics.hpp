#pragma once

// Naive brute-force reference implementations of the six features, written
// independently of the library code paths: full dense matrices, direct
// definition-level sums, BFS flood fill. Test-only.

#include <array>

#include "finrad/image.hpp"

namespace oracle {

double autocorrelation(const finrad::imaging::DiscretizedImage& img);
double cluster_shade(const finrad::imaging::DiscretizedImage& img);
double difference_entropy(const finrad::imaging::DiscretizedImage& img);
double size_zone_non_uniformity(const finrad::imaging::DiscretizedImage& img);
double gray_level_variance(const finrad::imaging::DiscretizedImage& img);
double skewness(const finrad::imaging::GrayImage& img);

/// All six, in FeatureVector order, from a continuous image.
std::array<double, 6> features(const finrad::imaging::GrayImage& img, int ng);

} // namespace oracle
