#include <fstream>
#include <iterator>
#include <stdexcept>

#include "ttfuse/bytes.hpp"
#include "ttfuse/model.hpp"

namespace ttfuse {

namespace bytes {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<unsigned char>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace bytes

namespace {
constexpr char kMagic[4] = {'T', 'T', 'F', 'Z'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::vector<unsigned char> save_checkpoint(FusionModel& model) {
    bytes::Writer w;
    w.raw(kMagic, 4);
    w.u16(kVersion);
    const std::string desc = spec_to_json(model.spec());
    w.u32(static_cast<std::uint32_t>(desc.size()));
    w.text(desc);
    const nn::ParamList params = model.params();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const nn::Param* p : params) {
        w.u32(static_cast<std::uint32_t>(p->name.size()));
        w.text(p->name);
        w.u8(static_cast<std::uint8_t>(p->value.rank()));
        for (std::size_t d : p->value.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : p->value.values()) w.f64(v);
    }
    return w.take();
}

FusionModel load_checkpoint(const std::vector<unsigned char>& data) {
    bytes::Reader r(data.data(), data.size(), "checkpoint");
    const unsigned char* magic = r.take(4);
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("checkpoint: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const std::string desc = r.text(r.u32());
    ModelSpec spec;
    try {
        spec = spec_from_json(desc);
    } catch (const std::exception& e) {
        throw FormatError(std::string("checkpoint: bad model descriptor: ") + e.what());
    }
    Rng rng(0);
    FusionModel model(spec, rng);
    const nn::ParamList params = model.params();
    const std::uint32_t count = r.u32();
    if (count != params.size())
        throw FormatError("checkpoint: " + std::to_string(count) + " entries, model has " + std::to_string(params.size()));
    for (nn::Param* p : params) {
        const std::string name = r.text(r.u32());
        if (name != p->name) throw FormatError("checkpoint: expected entry '" + p->name + "', found '" + name + "'");
        const std::size_t rank = r.u8();
        Shape shape(rank);
        for (auto& d : shape) d = r.u32();
        if (shape != p->value.shape())
            throw FormatError("checkpoint: entry '" + name + "' has shape " + shape_str(shape) + ", expected " +
                              shape_str(p->value.shape()));
        for (double& v : p->value.values()) v = r.f64();
    }
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
    return model;
}

void save_checkpoint_file(FusionModel& model, const std::string& path) { bytes::write_file(path, save_checkpoint(model)); }

FusionModel load_checkpoint_file(const std::string& path) { return load_checkpoint(bytes::read_file(path)); }

}  // namespace ttfuse
