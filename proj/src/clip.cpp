#include <json.hpp>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ttfuse/bytes.hpp"
#include "ttfuse/data.hpp"

namespace ttfuse {

namespace {
constexpr char kMagic[4] = {'C', 'L', 'I', 'P'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

ClipDims ClipDims::of(const Profile& p) {
    ClipDims d;
    d.game_height = static_cast<std::uint32_t>(p.game_height);
    d.game_width = static_cast<std::uint32_t>(p.game_width);
    d.cam_height = static_cast<std::uint32_t>(p.cam_height);
    d.cam_width = static_cast<std::uint32_t>(p.cam_width);
    d.frames = static_cast<std::uint32_t>(p.frames);
    d.audio_length = static_cast<std::uint32_t>(p.audio_length);
    return d;
}

void ClipRecord::validate() const {
    if (dims.frames != 20) throw std::invalid_argument("clip must hold exactly 20 frames per view");
    if (dims.game_height == 0 || dims.game_width == 0 || dims.cam_height == 0 || dims.cam_width == 0 ||
        dims.audio_length == 0)
        throw std::invalid_argument("clip dimensions must be positive");
    if (game.size() != dims.game_bytes()) throw std::invalid_argument("game frame buffer does not match dims");
    if (cam.size() != dims.cam_bytes()) throw std::invalid_argument("cam frame buffer does not match dims");
    if (audio.size() != dims.audio_length) throw std::invalid_argument("audio length does not match dims");
    for (float a : audio)
        if (!(a >= -1.0f && a <= 1.0f)) throw std::invalid_argument("audio samples must lie in [-1, 1]");
}

std::size_t clip_container_size(const ClipDims& d) {
    return kClipHeaderBytes + d.game_bytes() + d.cam_bytes() + std::size_t{d.audio_length} * 4;
}

std::vector<unsigned char> save_clip(const ClipRecord& clip) {
    clip.validate();
    bytes::Writer w;
    w.reserve(clip_container_size(clip.dims));
    w.raw(kMagic, 4);
    w.u16(kVersion);
    const ClipDims& d = clip.dims;
    for (std::uint32_t v : {d.game_height, d.game_width, d.cam_height, d.cam_width, d.frames, d.audio_length}) w.u32(v);
    w.u8(static_cast<std::uint8_t>(clip.labels.valence));
    w.u8(static_cast<std::uint8_t>(clip.labels.arousal));
    w.u8(static_cast<std::uint8_t>(clip.labels.context));
    w.raw(clip.game.data(), clip.game.size());
    w.raw(clip.cam.data(), clip.cam.size());
    for (float a : clip.audio) w.f32(a);
    return w.take();
}

ClipRecord load_clip(std::span<const unsigned char> data) {
    bytes::Reader r(data.data(), data.size(), "clip");
    const unsigned char* magic = r.take(4);
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("clip: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kVersion) throw FormatError("clip: unsupported version " + std::to_string(version));
    ClipRecord c;
    c.dims.game_height = r.u32();
    c.dims.game_width = r.u32();
    c.dims.cam_height = r.u32();
    c.dims.cam_width = r.u32();
    c.dims.frames = r.u32();
    c.dims.audio_length = r.u32();
    const ClipDims& d = c.dims;
    if (d.frames != 20 || d.game_height == 0 || d.game_width == 0 || d.cam_height == 0 || d.cam_width == 0 ||
        d.audio_length == 0 || d.game_height > 4096 || d.game_width > 4096 || d.cam_height > 4096 ||
        d.cam_width > 4096 || d.audio_length > (1u << 26))
        throw FormatError("clip: invalid dimensions");
    const std::uint8_t v = r.u8(), a = r.u8(), x = r.u8();
    if (v >= kValenceClasses || a >= kArousalClasses || x >= kRawContextClasses)
        throw FormatError("clip: invalid label code");
    c.labels = {static_cast<Valence>(v), static_cast<Arousal>(a), static_cast<Context>(x)};
    if (r.remaining() != d.game_bytes() + d.cam_bytes() + std::size_t{d.audio_length} * 4)
        throw FormatError("clip: payload length does not match dimensions");
    const unsigned char* g = r.take(d.game_bytes());
    c.game.assign(g, g + d.game_bytes());
    const unsigned char* m = r.take(d.cam_bytes());
    c.cam.assign(m, m + d.cam_bytes());
    c.audio.resize(d.audio_length);
    for (float& s : c.audio) {
        s = r.f32();
        if (!(s >= -1.0f && s <= 1.0f)) throw FormatError("clip: audio sample out of range");
    }
    return c;
}

ClipBatch make_batch(std::span<const ClipRecord* const> clips, const Profile& p) {
    const ClipDims want = ClipDims::of(p);
    const std::size_t b = clips.size();
    const std::size_t n = b * p.frames;
    const std::size_t win = p.audio_window();
    ClipBatch batch;
    batch.clips = b;
    batch.game = Tensor({n, p.game_height, p.game_width, 3});
    batch.cam = Tensor({n, p.cam_height, p.cam_width, 3});
    batch.audio = Tensor({n, win, 1});
    for (std::size_t i = 0; i < b; ++i) {
        const ClipRecord& c = *clips[i];
        if (!(c.dims == want))
            throw std::invalid_argument("clip '" + c.clip_id + "' does not match the model profile dimensions");
        const std::size_t gs = c.game.size(), cs = c.cam.size();
        for (std::size_t k = 0; k < gs; ++k) batch.game[i * gs + k] = c.game[k] / 127.5 - 1.0;
        for (std::size_t k = 0; k < cs; ++k) batch.cam[i * cs + k] = c.cam[k] / 127.5 - 1.0;
        for (std::size_t t = 0; t < p.frames; ++t)
            for (std::size_t s = 0; s < win; ++s) batch.audio[((i * p.frames) + t) * win + s] = c.audio[t * win + s];
    }
    return batch;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

constexpr const char* kValenceNames[] = {"negative", "neutral", "positive"};
constexpr const char* kArousalNames[] = {"neutral", "positive"};
constexpr const char* kContextNames[] = {"in_lane", "shopping", "returning_to_lane", "roaming", "fighting",
                                         "pushing", "defending", "dead", "miscellaneous"};

template <std::size_t N>
std::uint8_t lookup(const char* const (&names)[N], const std::string& value, const char* field) {
    for (std::size_t i = 0; i < N; ++i)
        if (value == names[i]) return static_cast<std::uint8_t>(i);
    throw std::invalid_argument(std::string("manifest: unknown ") + field + " '" + value + "'");
}

}  // namespace

std::string manifest_to_jsonl(const Manifest& m) {
    std::ostringstream os;
    for (const ManifestEntry& e : m) {
        json j{{"clip_id", e.clip_id},
               {"file", e.file},
               {"streamer_id", e.streamer_id},
               {"valence", kValenceNames[static_cast<int>(e.labels.valence)]},
               {"arousal", kArousalNames[static_cast<int>(e.labels.arousal)]},
               {"context", kContextNames[static_cast<int>(e.labels.context)]},
               {"origin", e.origin == Origin::Original ? "original" : "clone"}};
        os << j.dump() << '\n';
    }
    return os.str();
}

Manifest manifest_from_jsonl(const std::string& text) {
    Manifest m;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            ManifestEntry e;
            e.clip_id = j.at("clip_id").get<std::string>();
            e.file = j.at("file").get<std::string>();
            e.streamer_id = j.at("streamer_id").get<std::uint32_t>();
            e.labels.valence = static_cast<Valence>(lookup(kValenceNames, j.at("valence").get<std::string>(), "valence"));
            e.labels.arousal = static_cast<Arousal>(lookup(kArousalNames, j.at("arousal").get<std::string>(), "arousal"));
            e.labels.context = static_cast<Context>(lookup(kContextNames, j.at("context").get<std::string>(), "context"));
            const std::string origin = j.at("origin").get<std::string>();
            if (origin == "original")
                e.origin = Origin::Original;
            else if (origin == "clone")
                e.origin = Origin::Clone;
            else
                throw std::invalid_argument("manifest: unknown origin '" + origin + "'");
            m.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return m;
}

void validate_manifest(const Manifest& m) {
    std::set<std::string> originals;
    for (const auto& e : m)
        if (e.origin == Origin::Original && !originals.insert(e.clip_id).second)
            throw std::invalid_argument("manifest: duplicate clip id '" + e.clip_id + "'");
    for (const auto& e : m)
        if (e.origin == Origin::Clone && !originals.contains(e.clip_id))
            throw std::invalid_argument("manifest: clone of unknown clip '" + e.clip_id + "'");
}

const ClipRecord& Dataset::get(const std::string& clip_id) const {
    for (const auto& c : originals)
        if (c.clip_id == clip_id) return c;
    throw std::invalid_argument("dataset: no clip '" + clip_id + "'");
}

Dataset load_dataset(const std::string& manifest_path) {
    Dataset d;
    const auto text = bytes::read_file(manifest_path);
    d.manifest = manifest_from_jsonl(std::string(text.begin(), text.end()));
    validate_manifest(d.manifest);
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    for (const auto& e : d.manifest) {
        if (e.origin != Origin::Original) continue;
        ClipRecord c = load_clip(bytes::read_file((base / e.file).string()));
        c.clip_id = e.clip_id;
        c.streamer_id = e.streamer_id;
        if (!(c.labels == e.labels)) throw FormatError("clip '" + e.clip_id + "': labels disagree with the manifest");
        d.originals.push_back(std::move(c));
    }
    return d;
}

}  // namespace ttfuse
