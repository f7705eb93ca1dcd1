#include "saga/model.hpp"

namespace saga {

ModelConfig peek_checkpoint_config(const std::string& path, size_t* scalar_width) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("checkpoint: cannot open " + path);
    detail::CkptReader r;
    r.buf.resize(64);
    f.read(r.buf.data(), 64);
    r.buf.resize(static_cast<size_t>(f.gcount()));

    if (r.str(4, "magic") != "SAGA") throw format_error("checkpoint: bad magic");
    const uint16_t version = r.u16("version");
    if (version != 1) {
        throw format_error("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig c;
    c.d_t = r.u32("d_t");
    c.l_t = r.u32("l_t");
    c.L_max = r.u32("L_max");
    c.n_heads = r.u32("n_heads");
    c.depth = r.u32("depth");
    c.mlp_hidden = r.u32("mlp_hidden");
    c.dropout_rate = r.scalar<float>("dropout");
    c.n_classes = r.u32("n_classes");
    c.use_positional = r.u32("use_positional") != 0;
    const uint32_t width = r.u32("scalar width");
    if (scalar_width) *scalar_width = width;
    return c;
}

}  // namespace saga
