#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "saga/labels.hpp"
#include "saga/prng.hpp"
#include "saga/tensor.hpp"

namespace saga {

// One video's frame-token features, [L x l_t x d_t], plus its label record.
struct VideoEmbedding {
    Tensor<float> frames;
    LabelRecord label;
    std::string video_id;

    size_t frame_count() const { return frames.shape[0]; }
};

inline void validate_video_dims(size_t L, size_t l_t, size_t d_t) {
    if (L < 2) throw config_error("video dims: L must be >= 2, got " + std::to_string(L));
    if (l_t < 1) throw config_error("video dims: l_t must be >= 1");
    if (d_t < 8) throw config_error("video dims: d_t must be >= 8, got " + std::to_string(d_t));
}

enum class Split : uint8_t { TRAIN = 0, VAL = 1, TEST = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::TRAIN: return "TRAIN";
        case Split::VAL: return "VAL";
        case Split::TEST: return "TEST";
    }
    return "?";
}

// In-memory dataset: videos, their split tags, and the label manifest.
struct Dataset {
    GeneratorManifest manifest;
    std::vector<VideoEmbedding> videos;
    std::vector<Split> splits;  // parallel to videos
    size_t L = 0, l_t = 0, d_t = 0;

    size_t size() const { return videos.size(); }
};

using IndexList = std::vector<uint32_t>;

inline IndexList split_indices(const Dataset& ds, Split s) {
    IndexList out;
    for (uint32_t i = 0; i < ds.size(); i++) {
        if (ds.splits[i] == s) out.push_back(i);
    }
    return out;
}

inline IndexList all_indices(const Dataset& ds) {
    IndexList out(ds.size());
    std::iota(out.begin(), out.end(), 0u);
    return out;
}

// ---- synthetic generation ----------------------------------------------------

// Per-class temporal artifact recipe. Classes sharing an overlap_group copy
// the root class's motion structure and differ only in noise_scale.
struct ClassArtifact {
    double motion_freq = 1.0;  // cycles per video
    double drift_rate = 0.0;   // added per frame index
    double blend = 0.3;        // previous-frame mixing factor, [0,1)
    double noise_scale = 0.3;  // per-scalar gaussian sigma, >= 0
    int overlap_group = -1;
};

struct SyntheticSpec {
    std::vector<ClassArtifact> classes;
    size_t videos_per_class = 2000;
    size_t L = 8, l_t = 16, d_t = 64;
    uint64_t seed = 42;
};

// The shipped 6-class recipe (class 0 is Real; classes 4/5 are the overlap
// pair), extended with a frequency ladder beyond the table.
SyntheticSpec default_synthetic_spec(size_t n_classes = 6, size_t videos_per_class = 2000);

// The extra held-out recipe used for unseen-class probes.
ClassArtifact probe_class_artifact();

// Deterministic generation. Classes are separable only through temporal
// structure: a per-class direction oscillates at motion_freq with a random
// per-video phase, drifts linearly, blends with the previous frame, and is
// covered in per-item-seeded gaussian noise. Tokens are per-class scalar
// gains applied to the frame vector.
Dataset synth_generate(const SyntheticSpec& spec);

// Generate only the given class (used for probe files); video ids and noise
// streams continue from `item_index_base` so outputs match a longer run.
std::vector<VideoEmbedding> synth_generate_class(const SyntheticSpec& spec, size_t class_index,
                                                 const GeneratorManifest& manifest,
                                                 size_t item_index_base);

// ---- binary embedding file (SEMB) ---------------------------------------------

// Little-endian layout: "SEMB", u16 version=1, u16 reserved, u32 count,
// u32 L, u32 l_t, u32 d_t, then per item u16+id, u16+generator_id, and
// L*l_t*d_t f32 scalars.
void write_embedding_file(const std::string& path, const Dataset& ds);
Dataset read_embedding_file(const std::string& path, GeneratorManifest manifest);

// Optional sidecar: video_id,generator_id per line.
void write_labels_csv(const std::string& path, const Dataset& ds);

// ---- splitting / subsampling / batching ---------------------------------------

// Stratified per class, deterministic per seed. A class with fewer than 3
// items collapses to TRAIN with a warning on stderr. Non-zero fractions are
// guaranteed a non-empty slot for classes with >= 3 items.
void assign_splits(Dataset& ds, double train, double val, double test, uint64_t seed);

// Per class, keeps max(floor, round(fraction * count)) items chosen uniformly
// without replacement.
IndexList stratified_subsample(const Dataset& ds, const IndexList& items, double fraction,
                               size_t floor, uint64_t seed);

// P classes per batch, K items per class; class cycle reshuffled per epoch,
// per-class queues reshuffled on wrap. One epoch is ceil(total/(P*K)) batches.
class PkBatcher {
   public:
    PkBatcher(const Dataset& ds, IndexList items, size_t p, size_t k, uint64_t seed);

    size_t batches_per_epoch() const { return batches_per_epoch_; }
    IndexList next_batch();

   private:
    void reshuffle_class(size_t c);

    const Dataset* ds_;
    size_t p_, k_;
    uint64_t seed_;
    std::vector<std::vector<uint32_t>> class_items_;  // one pool per class
    std::vector<std::vector<uint32_t>> queues_;
    std::vector<size_t> queue_pos_;
    std::vector<uint32_t> cycle_;
    size_t cycle_pos_ = 0;
    uint64_t epoch_ = 0;
    uint64_t batch_counter_ = 0;
    size_t batches_per_epoch_ = 0;
    uint64_t refill_counter_ = 0;
};

}  // namespace saga
