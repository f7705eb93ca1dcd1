#include "saga/labels.hpp"

namespace saga {

GeneratorManifest default_manifest() {
    using T = Task;
    using V = SdVersion;
    std::vector<GeneratorEntry> e = {
        {"Real", T::REAL, V::NONE, "Real"},
        {"ModelScope", T::T2V, V::SD21, "Alibaba Group"},
        {"OpenSora", T::T2V, V::UNKNOWN, "HPC AI Tech"},
        {"MorphStudio", T::T2V, V::UNKNOWN, "MorphStudio"},
        {"SVD", T::I2V, V::UNKNOWN, "Stability AI"},
        {"DynamiCrafter", T::I2V, V::UNKNOWN, "Tencent AI Lab"},
        {"SEINE", T::I2V, V::SD21, "Shanghai AI Lab-1"},
        {"Latte", T::T2V, V::SD21, "Shanghai AI Lab-1"},
        {"Lavie", T::T2V, V::SD21, "Shanghai AI Lab-2"},
        {"SD", T::T2V, V::SD14, "Stability AI"},
        {"VideoCrafter", T::T2V, V::SD14, "Tencent AI Lab"},
        {"Crafter", T::T2V, V::SD15, "Tencent AI Lab"},
        {"ZeroScope", T::T2V, V::SD21, "Personal: Sterling"},
        {"Pika", T::T2V, V::UNKNOWN, "Pika"},
        {"Gen2", T::T2V, V::UNKNOWN, "Runway ML"},
        {"HotShot", T::T2V, V::SDXL, "Hotshot Co."},
        {"Show_1", T::T2V, V::SD21, "Show Lab"},
        {"MoonValley", T::T2V, V::UNKNOWN, "MoonValley"},
        {"Sora", T::T2V, V::UNKNOWN, "OpenAI"},
        {"I2VGen-XL", T::I2V, V::SDXL, "Alibaba Group"},
    };
    return GeneratorManifest::from_entries(std::move(e));
}

GeneratorManifest synthetic_manifest(size_t n_classes) {
    if (n_classes < 2) throw config_error("synthetic_manifest: need at least 2 classes");
    using T = Task;
    using V = SdVersion;
    std::vector<GeneratorEntry> e;
    e.push_back({"Real", T::REAL, V::NONE, "Real"});
    const std::vector<GeneratorEntry> fixed = {
        {"synth1", T::T2V, V::SD14, "TeamA"},
        {"synth2", T::T2V, V::SD15, "TeamA"},
        {"synth3", T::I2V, V::SD21, "TeamB"},
        {"synth4", T::I2V, V::SDXL, "TeamC"},
        {"synth5", T::I2V, V::SDXL, "TeamC"},
    };
    for (size_t c = 1; c < n_classes; c++) {
        if (c - 1 < fixed.size()) {
            e.push_back(fixed[c - 1]);
        } else {
            GeneratorEntry x;
            x.id = "synth" + std::to_string(c);
            x.task = (c % 2 == 0) ? T::I2V : T::T2V;
            x.sd = V::UNKNOWN;
            x.team = "TeamX" + std::to_string(c);
            e.push_back(std::move(x));
        }
    }
    return GeneratorManifest::from_entries(std::move(e));
}

}  // namespace saga
