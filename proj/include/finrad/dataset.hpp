#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "finrad/image.hpp"

namespace finrad::harness {

enum class TaskKind { classification, segmentation };

enum class SplitTag { none, train, val, test };

/// In-memory corpus. Classification items carry integer labels;
/// segmentation items carry binary masks. Blob datasets also carry
/// train/val/test split tags.
struct Dataset {
    TaskKind task = TaskKind::classification;
    int classes = 0;
    std::vector<imaging::GrayImage> images;
    std::vector<int> labels;
    std::vector<imaging::GrayImage> masks;
    std::vector<SplitTag> tags;

    size_t size() const { return images.size(); }
};

/// Synthetic texture classes for classification. Each class is a textured
/// process with its own spatial correlation length, blob intensity, blob
/// placement and speckle level, jittered per image so the texture features
/// carry signal without being individually sufficient. 64x64 geometry.
/// Binary datasets are imbalanced `imbalance`:1 in favor of class 1.
Dataset gen_texture_dataset(int n, int classes, uint64_t seed,
                            double imbalance = 8.0);

/// Synthetic segmentation corpus: 128x128 images with 0-3 smooth bright
/// elliptical blobs over textured background; masks are the exact blob
/// supports. Items carry ~70/15/15 split tags.
Dataset gen_blob_dataset(int n, uint64_t seed);

/// k disjoint folds covering the dataset, sizes within 1 of each other,
/// built from one seeded shuffle.
struct FoldSplit {
    int k = 0;
    uint64_t seed = 0;
    std::vector<std::vector<int>> folds;
};

FoldSplit kfold_split(const Dataset& d, int k, uint64_t seed);

/// For fold f: test = folds[f]; the remaining indices split 8:1 into train
/// and validation (in shuffle order).
struct FoldIndices {
    std::vector<int> train, val, test;
};
FoldIndices fold_indices(const FoldSplit& split, int fold);

/// Manifest CSV I/O. Classification manifests have header `path,label`;
/// segmentation manifests `path,mask_path`. Paths are relative to the
/// manifest file.
Dataset load_manifest(const std::filesystem::path& manifest_path);

/// Image paths only (labels/masks ignored), for feature extraction and FIN
/// corpora.
std::vector<std::string> manifest_paths(const std::filesystem::path& manifest_path);

/// Writes images (and masks) as PGM plus manifest.csv into dir. Bytes are
/// deterministic for a fixed dataset.
void write_dataset(const Dataset& d, const std::filesystem::path& dir);

} // namespace finrad::harness
