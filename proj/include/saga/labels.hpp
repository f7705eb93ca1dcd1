#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "saga/common.hpp"

namespace saga {

// Attribution granularity, coarse to fine.
enum class Level : int { BIN = 0, TASK = 1, SD = 2, TEAM = 3, GEN = 4 };

inline constexpr std::array<Level, 5> kAllLevels = {Level::BIN, Level::TASK, Level::SD,
                                                    Level::TEAM, Level::GEN};

const char* level_name(Level level);
Level level_from_string(const std::string& s);

enum class Task : int { REAL = 0, T2V = 1, I2V = 2 };
enum class SdVersion : int { NONE = 0, SD14 = 1, SD15 = 2, SD21 = 3, SDXL = 4, UNKNOWN = 5 };

const char* task_name(Task t);
const char* sd_name(SdVersion v);

struct GeneratorEntry {
    std::string id;
    Task task = Task::T2V;
    SdVersion sd = SdVersion::UNKNOWN;
    std::string team;

    bool is_real() const { return task == Task::REAL; }
};

struct LevelClasses {
    std::vector<std::string> names;
    std::vector<bool> evaluable;  // UNKNOWN-backbone SD class is not evaluable

    size_t evaluable_count() const {
        size_t n = 0;
        for (bool e : evaluable) n += e;
        return n;
    }
};

// Immutable label hierarchy: generator id -> class index at each of the five
// levels. Class tables are rebuilt deterministically from the entry list, so
// projections can never go stale.
class GeneratorManifest {
   public:
    static GeneratorManifest from_entries(std::vector<GeneratorEntry> entries);
    static GeneratorManifest parse(const std::string& json_text);
    static GeneratorManifest load(const std::string& path);

    std::string serialize() const;
    void save(const std::string& path) const;

    const std::vector<GeneratorEntry>& entries() const { return entries_; }
    size_t generator_count() const { return entries_.size(); }

    size_t generator_index(const std::string& id) const;
    bool has_generator(const std::string& id) const { return index_.count(id) > 0; }

    const LevelClasses& classes_at(Level level) const {
        return tables_[static_cast<size_t>(level)];
    }
    size_t n_classes(Level level) const { return classes_at(level).names.size(); }

    size_t project(const std::string& generator_id, Level level) const;
    size_t project_index(size_t gen_index, Level level) const;
    std::vector<uint32_t> project_predictions(const std::vector<uint32_t>& gen_preds,
                                              Level level) const;

   private:
    std::vector<GeneratorEntry> entries_;
    std::array<LevelClasses, 5> tables_;
    std::vector<std::array<uint32_t, 5>> projections_;  // per generator, per level
    std::unordered_map<std::string, size_t> index_;
};

// A video's resolved labels, recomputed from the manifest.
struct LabelRecord {
    std::string generator_id;
    std::array<uint32_t, 5> cls{};

    uint32_t at(Level level) const { return cls[static_cast<size_t>(level)]; }
};

LabelRecord make_label(const GeneratorManifest& manifest, const std::string& generator_id);

// The 19-generators-plus-Real table shipped as data. Task/SD/team assignments
// beyond the handful that are publicly unambiguous are configurable defaults,
// not ground truth; edit the JSON to change them.
GeneratorManifest default_manifest();

// Manifest for synthetic datasets: class 0 is Real, classes 4 and 5 share a
// team and SD version so they collapse at coarser levels.
GeneratorManifest synthetic_manifest(size_t n_classes);

}  // namespace saga
