#include "saga/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace saga {

namespace {

constexpr uint64_t kClassParamStream = 0x5ca1ab1e00000000ULL;
constexpr uint64_t kSplitStream = 0x511700000000ULL;

constexpr double kTau = 6.283185307179586;

// Shared-across-classes structural parameters: a motion direction and token
// gains with mean exactly 1, so classes differ only in temporal statistics.
struct StructuralParams {
    std::vector<double> direction;  // d_t
    std::vector<double> gains;      // l_t
};

StructuralParams structural_params(uint64_t seed, size_t l_t, size_t d_t) {
    StructuralParams p;
    Prng rng = Prng::child(seed, kClassParamStream);
    p.direction.resize(d_t);
    for (auto& v : p.direction) v = rng.normal();
    p.gains.resize(l_t);
    double mean = 0.0;
    for (auto& v : p.gains) {
        v = rng.uniform(0.5, 1.5);
        mean += v;
    }
    mean /= static_cast<double>(l_t);
    for (auto& v : p.gains) v /= mean;
    return p;
}

void validate_spec(const SyntheticSpec& spec) {
    validate_video_dims(spec.L, spec.l_t, spec.d_t);
    if (spec.classes.size() < 2) throw config_error("synthetic spec: need >= 2 classes");
    if (spec.videos_per_class == 0) throw config_error("synthetic spec: videos_per_class == 0");
    for (size_t c = 0; c < spec.classes.size(); c++) {
        const auto& a = spec.classes[c];
        if (a.blend < 0.0 || a.blend >= 1.0)
            throw config_error("synthetic spec: blend must be in [0,1)");
        if (a.noise_scale < 0.0) throw config_error("synthetic spec: noise_scale must be >= 0");
        if (a.overlap_group >= 0) {
            for (size_t r = 0; r < c; r++) {
                const auto& root = spec.classes[r];
                if (root.overlap_group != a.overlap_group) continue;
                if (root.motion_freq != a.motion_freq || root.drift_rate != a.drift_rate ||
                    root.blend != a.blend) {
                    throw config_error("synthetic spec: overlap group members must differ only "
                                       "by noise_scale");
                }
                const double rel = std::abs(a.noise_scale - root.noise_scale) /
                                   std::max(root.noise_scale, 1e-12);
                if (rel > 0.10 + 1e-9) {
                    throw config_error(
                        "synthetic spec: overlap noise_scale differs by more than 10%");
                }
            }
        }
    }
}

VideoEmbedding generate_item(const SyntheticSpec& spec, const StructuralParams& sp,
                             size_t class_index, size_t index_in_class, size_t item_index,
                             const GeneratorManifest& manifest) {
    const auto& art = spec.classes[class_index];
    const size_t L = spec.L, l_t = spec.l_t, d_t = spec.d_t;
    Prng rng = Prng::child(spec.seed, item_index);
    const double phase = rng.uniform(0.0, kTau);

    VideoEmbedding v;
    v.frames = Tensor<float>({L, l_t, d_t});
    const std::string& gen_id = manifest.entries()[class_index].id;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%06zu", index_in_class);
    v.video_id = gen_id + buf;
    v.label = make_label(manifest, gen_id);

    std::vector<double> prev(d_t, 0.0), cur(d_t);
    for (size_t m = 0; m < L; m++) {
        const double osc =
            std::sin(kTau * art.motion_freq * static_cast<double>(m) / static_cast<double>(L) +
                     phase);
        const double drift = art.drift_rate * static_cast<double>(m);
        for (size_t i = 0; i < d_t; i++) {
            cur[i] = sp.direction[i] * osc + drift + art.blend * prev[i] +
                     art.noise_scale * rng.normal();
        }
        float* row = v.frames.data.data() + m * l_t * d_t;
        for (size_t t = 0; t < l_t; t++) {
            const double gain = sp.gains[t];
            for (size_t i = 0; i < d_t; i++) {
                row[t * d_t + i] = static_cast<float>(gain * cur[i]);
            }
        }
        std::swap(prev, cur);
    }
    return v;
}

}  // namespace

SyntheticSpec default_synthetic_spec(size_t n_classes, size_t videos_per_class) {
    // The overlap pair's blend equals cos(2*pi*f/L) at the default L=8, which
    // pins the lag-1 autocorrelation of the pair to the same value for any
    // noise level; the sigma difference only shows at longer lags.
    static const std::vector<ClassArtifact> table = {
        {0.5, 0.00, 0.80, 0.25, -1},  // Real: slow smooth motion, least noise
        {1.0, 0.00, 0.25, 0.45, -1},
        {1.0, 0.12, 0.45, 0.40, -1},
        {2.0, 0.00, 0.60, 0.35, -1},
        {1.0, 0.02, 0.7071067811865476, 0.50, 0},
        {1.0, 0.02, 0.7071067811865476, 0.55, 0},  // overlap pair with the class above
    };
    SyntheticSpec spec;
    spec.videos_per_class = videos_per_class;
    for (size_t c = 0; c < n_classes; c++) {
        if (c < table.size()) {
            spec.classes.push_back(table[c]);
        } else {
            ClassArtifact a;
            a.motion_freq = 0.75 + 0.5 * static_cast<double>(c);
            a.drift_rate = 0.01 * static_cast<double>(c % 3);
            a.blend = 0.2 + 0.1 * static_cast<double>(c % 4);
            a.noise_scale = 0.3 + 0.02 * static_cast<double>(c % 5);
            spec.classes.push_back(a);
        }
    }
    return spec;
}

ClassArtifact probe_class_artifact() { return {3.0, -0.03, 0.20, 0.30, -1}; }

Dataset synth_generate(const SyntheticSpec& spec) {
    validate_spec(spec);
    const size_t n_classes = spec.classes.size();
    const size_t per = spec.videos_per_class;
    Dataset ds;
    ds.manifest = synthetic_manifest(n_classes);
    ds.L = spec.L;
    ds.l_t = spec.l_t;
    ds.d_t = spec.d_t;
    ds.videos.resize(n_classes * per);
    ds.splits.assign(n_classes * per, Split::TRAIN);
    const auto sp = structural_params(spec.seed, spec.l_t, spec.d_t);
#pragma omp parallel for schedule(static)
    for (size_t item = 0; item < n_classes * per; item++) {
        const size_t c = item / per, j = item % per;
        ds.videos[item] = generate_item(spec, sp, c, j, item, ds.manifest);
    }
    return ds;
}

std::vector<VideoEmbedding> synth_generate_class(const SyntheticSpec& spec, size_t class_index,
                                                 const GeneratorManifest& manifest,
                                                 size_t item_index_base) {
    validate_spec(spec);
    if (class_index >= spec.classes.size()) {
        throw config_error("synth_generate_class: class index out of range");
    }
    const auto sp = structural_params(spec.seed, spec.l_t, spec.d_t);
    std::vector<VideoEmbedding> out(spec.videos_per_class);
#pragma omp parallel for schedule(static)
    for (size_t j = 0; j < spec.videos_per_class; j++) {
        out[j] = generate_item(spec, sp, class_index, j, item_index_base + j, manifest);
    }
    return out;
}

// ---- SEMB file -----------------------------------------------------------------

namespace {

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; i++) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size()) {
            throw format_error(std::string("SEMB: truncated while reading ") + what +
                               " at byte " + std::to_string(pos) + " (need " + std::to_string(n) +
                               " more, have " + std::to_string(buf.size() - pos) + ")");
        }
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint8_t>(buf[pos]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string str(size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void write_embedding_file(const std::string& path, const Dataset& ds) {
    for (const auto& v : ds.videos) {
        if (v.frames.shape != Shape{ds.L, ds.l_t, ds.d_t}) {
            throw config_error("SEMB write: item " + v.video_id + " has shape " +
                               shape_str(v.frames.shape) + ", dataset dims are [" +
                               std::to_string(ds.L) + "x" + std::to_string(ds.l_t) + "x" +
                               std::to_string(ds.d_t) + "]");
        }
    }
    std::string out;
    out.reserve(24 + ds.size() * (32 + ds.L * ds.l_t * ds.d_t * 4));
    out += "SEMB";
    put_u16(out, 1);  // version
    put_u16(out, 0);  // reserved
    put_u32(out, static_cast<uint32_t>(ds.size()));
    put_u32(out, static_cast<uint32_t>(ds.L));
    put_u32(out, static_cast<uint32_t>(ds.l_t));
    put_u32(out, static_cast<uint32_t>(ds.d_t));
    for (const auto& v : ds.videos) {
        put_u16(out, static_cast<uint16_t>(v.video_id.size()));
        out += v.video_id;
        put_u16(out, static_cast<uint16_t>(v.label.generator_id.size()));
        out += v.label.generator_id;
        for (float f : v.frames.data) {
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(out, bits);
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("SEMB: cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw io_error("SEMB: short write to " + path);
}

Dataset read_embedding_file(const std::string& path, GeneratorManifest manifest) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("SEMB: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf};

    if (r.str(4, "magic") != "SEMB") throw format_error("SEMB: bad magic at byte 0");
    const uint16_t version = r.u16("version");
    if (version != 1) {
        throw format_error("SEMB: unsupported version " + std::to_string(version) + " at byte 4");
    }
    r.u16("reserved");
    const uint32_t count = r.u32("count");

    Dataset ds;
    ds.L = r.u32("L");
    ds.l_t = r.u32("l_t");
    ds.d_t = r.u32("d_t");
    validate_video_dims(ds.L, ds.l_t, ds.d_t);
    ds.manifest = std::move(manifest);
    ds.videos.reserve(count);
    const size_t scalars = ds.L * ds.l_t * ds.d_t;
    for (uint32_t i = 0; i < count; i++) {
        VideoEmbedding v;
        v.video_id = r.str(r.u16("id length"), "video id");
        const std::string gen = r.str(r.u16("generator id length"), "generator id");
        v.label = make_label(ds.manifest, gen);
        v.frames = Tensor<float>({ds.L, ds.l_t, ds.d_t});
        r.need(scalars * 4, "payload");
        for (size_t s = 0; s < scalars; s++) {
            uint32_t bits = 0;
            for (int b = 0; b < 4; b++)
                bits |= static_cast<uint32_t>(static_cast<uint8_t>(buf[r.pos + s * 4 + b]))
                        << (8 * b);
            float fv;
            std::memcpy(&fv, &bits, 4);
            v.frames.data[s] = fv;
        }
        r.pos += scalars * 4;
        ensure_finite(v.frames.data, "SEMB payload");
        ds.videos.push_back(std::move(v));
    }
    ds.splits.assign(ds.videos.size(), Split::TRAIN);
    return ds;
}

void write_labels_csv(const std::string& path, const Dataset& ds) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("labels csv: cannot write " + path);
    f << "video_id,generator_id\n";
    for (const auto& v : ds.videos) f << v.video_id << "," << v.label.generator_id << "\n";
}

// ---- splits / subsampling -------------------------------------------------------

void assign_splits(Dataset& ds, double train, double val, double test, uint64_t seed) {
    if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9) {
        throw config_error("split fractions must be nonnegative and sum to 1, got " +
                           std::to_string(train) + "/" + std::to_string(val) + "/" +
                           std::to_string(test));
    }
    const size_t n_classes = ds.manifest.n_classes(Level::GEN);
    std::vector<std::vector<uint32_t>> per_class(n_classes);
    for (uint32_t i = 0; i < ds.size(); i++) {
        per_class[ds.videos[i].label.at(Level::GEN)].push_back(i);
    }
    for (size_t c = 0; c < n_classes; c++) {
        auto& items = per_class[c];
        const size_t n = items.size();
        if (n == 0) continue;
        if (n < 3) {
            std::cerr << "warning: class " << ds.manifest.classes_at(Level::GEN).names[c]
                      << " has only " << n << " items; collapsing to TRAIN\n";
            for (auto i : items) ds.splits[i] = Split::TRAIN;
            continue;
        }
        Prng rng = Prng::child(seed, kSplitStream + c);
        for (size_t i = n - 1; i > 0; i--) {
            std::swap(items[i], items[rng.below(i + 1)]);
        }
        long long counts[3];
        counts[0] = std::llround(train * static_cast<double>(n));
        counts[1] = std::llround((train + val) * static_cast<double>(n)) - counts[0];
        counts[2] = static_cast<long long>(n) - counts[0] - counts[1];
        const double fracs[3] = {train, val, test};
        for (int s = 0; s < 3; s++) {
            while (fracs[s] > 0 && counts[s] == 0) {
                int donor = counts[0] >= counts[1] && counts[0] >= counts[2] ? 0
                            : counts[1] >= counts[2]                         ? 1
                                                                             : 2;
                counts[donor]--;
                counts[s]++;
            }
        }
        size_t pos = 0;
        for (int s = 0; s < 3; s++) {
            for (long long k = 0; k < counts[s]; k++) {
                ds.splits[items[pos++]] = static_cast<Split>(s);
            }
        }
    }
}

IndexList stratified_subsample(const Dataset& ds, const IndexList& items, double fraction,
                               size_t floor, uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw config_error("subsample: fraction must be in (0,1], got " + std::to_string(fraction));
    }
    if (floor < 1) throw config_error("subsample: floor must be >= 1");
    const size_t n_classes = ds.manifest.n_classes(Level::GEN);
    std::vector<std::vector<uint32_t>> per_class(n_classes);
    for (uint32_t idx : items) {
        per_class[ds.videos[idx].label.at(Level::GEN)].push_back(idx);
    }
    IndexList out;
    for (size_t c = 0; c < n_classes; c++) {
        auto& pool = per_class[c];
        if (pool.empty()) continue;
        size_t want = std::max<size_t>(
            floor, static_cast<size_t>(std::llround(fraction * static_cast<double>(pool.size()))));
        want = std::min(want, pool.size());
        Prng rng = Prng::child(seed, 0xab5a17e00000000ULL + c);
        for (size_t i = 0; i < want; i++) {
            const size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        out.insert(out.end(), pool.begin(), pool.begin() + static_cast<long>(want));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---- PK batching ------------------------------------------------------------------

PkBatcher::PkBatcher(const Dataset& ds, IndexList items, size_t p, size_t k, uint64_t seed)
    : ds_(&ds), p_(p), k_(k), seed_(seed) {
    if (k < 2) throw config_error("pk sampler: K must be >= 2 so every anchor has a positive");
    if (p < 2) throw config_error("pk sampler: P must be >= 2 so negatives exist");
    const size_t n_classes = ds.manifest.n_classes(Level::GEN);
    std::vector<std::vector<uint32_t>> per_class(n_classes);
    for (uint32_t idx : items) {
        per_class[ds.videos[idx].label.at(Level::GEN)].push_back(idx);
    }
    size_t rich = 0, total = 0;
    for (size_t c = 0; c < n_classes; c++) {
        if (per_class[c].empty()) continue;
        if (per_class[c].size() >= k) rich++;
        total += per_class[c].size();
        cycle_.push_back(static_cast<uint32_t>(class_items_.size()));
        class_items_.push_back(std::move(per_class[c]));
    }
    if (rich < p) {
        throw config_error("pk sampler: need >= " + std::to_string(p) + " classes with >= " +
                           std::to_string(k) + " items, have " + std::to_string(rich));
    }
    queues_.resize(class_items_.size());
    queue_pos_.assign(class_items_.size(), 0);
    for (size_t c = 0; c < class_items_.size(); c++) reshuffle_class(c);
    batches_per_epoch_ = (total + p * k - 1) / (p * k);

    Prng rng = Prng::child(seed_, 0xc1c1e00000000ULL + epoch_);
    for (size_t i = cycle_.size() - 1; i > 0; i--) std::swap(cycle_[i], cycle_[rng.below(i + 1)]);
}

void PkBatcher::reshuffle_class(size_t c) {
    queues_[c] = class_items_[c];
    Prng rng = Prng::child(seed_, 0xf111e00000000ULL + refill_counter_++);
    auto& q = queues_[c];
    for (size_t i = q.size() - 1; i > 0; i--) std::swap(q[i], q[rng.below(i + 1)]);
    queue_pos_[c] = 0;
}

IndexList PkBatcher::next_batch() {
    IndexList batch;
    batch.reserve(p_ * k_);
    for (size_t slot = 0; slot < p_; slot++) {
        const size_t c = cycle_[cycle_pos_];
        cycle_pos_ = (cycle_pos_ + 1) % cycle_.size();
        for (size_t j = 0; j < k_; j++) {
            if (queue_pos_[c] >= queues_[c].size()) reshuffle_class(c);
            batch.push_back(queues_[c][queue_pos_[c]++]);
        }
    }
    if (++batch_counter_ % batches_per_epoch_ == 0) {
        epoch_++;
        Prng rng = Prng::child(seed_, 0xc1c1e00000000ULL + epoch_);
        for (size_t i = cycle_.size() - 1; i > 0; i--)
            std::swap(cycle_[i], cycle_[rng.below(i + 1)]);
        cycle_pos_ = 0;
    }
    return batch;
}

}  // namespace saga
