#include "saga/labels.hpp"

#include <fstream>

#include <json.hpp>

namespace saga {

using nlohmann::json;

const char* level_name(Level level) {
    switch (level) {
        case Level::BIN: return "BIN";
        case Level::TASK: return "TASK";
        case Level::SD: return "SD";
        case Level::TEAM: return "TEAM";
        case Level::GEN: return "GEN";
    }
    throw config_error("bad level value");
}

Level level_from_string(const std::string& s) {
    for (Level l : kAllLevels) {
        if (s == level_name(l)) return l;
    }
    throw config_error("unknown attribution level: " + s + " (expected BIN|TASK|SD|TEAM|GEN)");
}

const char* task_name(Task t) {
    switch (t) {
        case Task::REAL: return "REAL";
        case Task::T2V: return "T2V";
        case Task::I2V: return "I2V";
    }
    throw config_error("bad task value");
}

const char* sd_name(SdVersion v) {
    switch (v) {
        case SdVersion::NONE: return "NONE";
        case SdVersion::SD14: return "SD14";
        case SdVersion::SD15: return "SD15";
        case SdVersion::SD21: return "SD21";
        case SdVersion::SDXL: return "SDXL";
        case SdVersion::UNKNOWN: return "UNKNOWN";
    }
    throw config_error("bad sd version value");
}

namespace {

Task task_from_string(const std::string& s, const std::string& where) {
    for (Task t : {Task::REAL, Task::T2V, Task::I2V}) {
        if (s == task_name(t)) return t;
    }
    throw format_error(where + ": bad task \"" + s + "\" (expected REAL|T2V|I2V)");
}

SdVersion sd_from_string(const std::string& s, const std::string& where) {
    for (SdVersion v : {SdVersion::NONE, SdVersion::SD14, SdVersion::SD15, SdVersion::SD21,
                        SdVersion::SDXL, SdVersion::UNKNOWN}) {
        if (s == sd_name(v)) return v;
    }
    throw format_error(where + ": bad sd \"" + s +
                       "\" (expected NONE|SD14|SD15|SD21|SDXL|UNKNOWN)");
}

const char* sd_class_name(SdVersion v) {
    switch (v) {
        case SdVersion::NONE: return "Real";
        case SdVersion::SD14: return "SD 1.4";
        case SdVersion::SD15: return "SD 1.5";
        case SdVersion::SD21: return "SD 2.1";
        case SdVersion::SDXL: return "SDXL";
        case SdVersion::UNKNOWN: return "other-backbone";
    }
    return "?";
}

const char* task_class_name(Task t) {
    switch (t) {
        case Task::REAL: return "Real";
        case Task::T2V: return "T2V";
        case Task::I2V: return "I2V";
    }
    return "?";
}

}  // namespace

GeneratorManifest GeneratorManifest::from_entries(std::vector<GeneratorEntry> entries) {
    GeneratorManifest m;
    m.entries_ = std::move(entries);

    size_t real_count = 0;
    for (size_t i = 0; i < m.entries_.size(); i++) {
        const auto& e = m.entries_[i];
        if (e.id.empty()) throw config_error("manifest: empty generator id at position " +
                                             std::to_string(i));
        if (!m.index_.emplace(e.id, i).second) {
            throw config_error("manifest: duplicate generator id \"" + e.id + "\"");
        }
        const bool real = e.task == Task::REAL;
        const bool sd_none = e.sd == SdVersion::NONE;
        if (real != sd_none) {
            throw config_error("manifest: \"" + e.id +
                               "\": task REAL and sd NONE must appear together");
        }
        if (real) {
            real_count++;
            if (e.id != "Real") {
                throw config_error("manifest: the REAL entry must be named \"Real\", got \"" +
                                   e.id + "\"");
            }
        }
    }
    if (real_count != 1) {
        throw config_error("manifest: expected exactly one Real entry, found " +
                           std::to_string(real_count));
    }

    // BIN table is fixed.
    auto& bin = m.tables_[static_cast<size_t>(Level::BIN)];
    bin.names = {"real", "fake"};
    bin.evaluable = {true, true};

    // TASK and SD tables follow the enum order, restricted to present values.
    auto& task_tab = m.tables_[static_cast<size_t>(Level::TASK)];
    std::array<int, 3> task_idx;
    task_idx.fill(-1);
    for (Task t : {Task::REAL, Task::T2V, Task::I2V}) {
        for (const auto& e : m.entries_) {
            if (e.task == t) {
                task_idx[static_cast<int>(t)] = static_cast<int>(task_tab.names.size());
                task_tab.names.push_back(task_class_name(t));
                task_tab.evaluable.push_back(true);
                break;
            }
        }
    }

    auto& sd_tab = m.tables_[static_cast<size_t>(Level::SD)];
    std::array<int, 6> sd_idx;
    sd_idx.fill(-1);
    for (SdVersion v : {SdVersion::NONE, SdVersion::SD14, SdVersion::SD15, SdVersion::SD21,
                        SdVersion::SDXL, SdVersion::UNKNOWN}) {
        for (const auto& e : m.entries_) {
            if (e.sd == v) {
                sd_idx[static_cast<int>(v)] = static_cast<int>(sd_tab.names.size());
                sd_tab.names.push_back(sd_class_name(v));
                sd_tab.evaluable.push_back(v != SdVersion::UNKNOWN);
                break;
            }
        }
    }

    // TEAM and GEN tables in declaration order.
    auto& team_tab = m.tables_[static_cast<size_t>(Level::TEAM)];
    std::unordered_map<std::string, uint32_t> team_idx;
    for (const auto& e : m.entries_) {
        if (team_idx.emplace(e.team, static_cast<uint32_t>(team_tab.names.size())).second) {
            team_tab.names.push_back(e.team);
            team_tab.evaluable.push_back(true);
        }
    }

    auto& gen_tab = m.tables_[static_cast<size_t>(Level::GEN)];
    for (const auto& e : m.entries_) {
        gen_tab.names.push_back(e.id);
        gen_tab.evaluable.push_back(true);
    }

    m.projections_.resize(m.entries_.size());
    for (size_t i = 0; i < m.entries_.size(); i++) {
        const auto& e = m.entries_[i];
        auto& p = m.projections_[i];
        p[static_cast<size_t>(Level::BIN)] = e.is_real() ? 0 : 1;
        p[static_cast<size_t>(Level::TASK)] =
            static_cast<uint32_t>(task_idx[static_cast<int>(e.task)]);
        p[static_cast<size_t>(Level::SD)] = static_cast<uint32_t>(sd_idx[static_cast<int>(e.sd)]);
        p[static_cast<size_t>(Level::TEAM)] = team_idx.at(e.team);
        p[static_cast<size_t>(Level::GEN)] = static_cast<uint32_t>(i);
    }
    return m;
}

GeneratorManifest GeneratorManifest::parse(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw format_error(std::string("manifest: JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("generators")) {
        throw format_error("manifest: expected top-level object with \"generators\" array");
    }
    const auto& gens = j["generators"];
    if (!gens.is_array()) throw format_error("manifest: \"generators\" must be an array");

    std::vector<GeneratorEntry> entries;
    for (size_t i = 0; i < gens.size(); i++) {
        const auto& g = gens[i];
        const std::string where = "generators[" + std::to_string(i) + "]";
        if (!g.is_object()) throw format_error(where + ": expected object");
        GeneratorEntry e;
        for (const char* field : {"id", "task", "sd", "team"}) {
            if (!g.contains(field) || !g[field].is_string()) {
                throw format_error(where + "." + field + ": missing or not a string");
            }
        }
        e.id = g["id"].get<std::string>();
        e.task = task_from_string(g["task"].get<std::string>(), where + ".task");
        e.sd = sd_from_string(g["sd"].get<std::string>(), where + ".sd");
        e.team = g["team"].get<std::string>();
        entries.push_back(std::move(e));
    }
    return from_entries(std::move(entries));
}

GeneratorManifest GeneratorManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("manifest: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

std::string GeneratorManifest::serialize() const {
    json j;
    j["generators"] = json::array();
    for (const auto& e : entries_) {
        j["generators"].push_back(
            {{"id", e.id}, {"task", task_name(e.task)}, {"sd", sd_name(e.sd)}, {"team", e.team}});
    }
    return j.dump(2) + "\n";
}

void GeneratorManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("manifest: cannot write " + path);
    out << serialize();
}

size_t GeneratorManifest::generator_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw config_error("manifest: unknown generator id \"" + id + "\"");
    return it->second;
}

size_t GeneratorManifest::project(const std::string& generator_id, Level level) const {
    return project_index(generator_index(generator_id), level);
}

size_t GeneratorManifest::project_index(size_t gen_index, Level level) const {
    if (gen_index >= entries_.size()) {
        throw config_error("manifest: generator index " + std::to_string(gen_index) +
                           " out of range");
    }
    return projections_[gen_index][static_cast<size_t>(level)];
}

std::vector<uint32_t> GeneratorManifest::project_predictions(
    const std::vector<uint32_t>& gen_preds, Level level) const {
    std::vector<uint32_t> out(gen_preds.size());
    for (size_t i = 0; i < gen_preds.size(); i++) {
        out[i] = static_cast<uint32_t>(project_index(gen_preds[i], level));
    }
    return out;
}

LabelRecord make_label(const GeneratorManifest& manifest, const std::string& generator_id) {
    LabelRecord r;
    r.generator_id = generator_id;
    size_t gi = manifest.generator_index(generator_id);
    for (Level l : kAllLevels) {
        r.cls[static_cast<size_t>(l)] = static_cast<uint32_t>(manifest.project_index(gi, l));
    }
    return r;
}

}  // namespace saga
