#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ttfuse/labels.hpp"
#include "ttfuse/model.hpp"

namespace ttfuse {

// ---------------------------------------------------------------------------
// Clips and the binary container
// ---------------------------------------------------------------------------

struct ClipDims {
    std::uint32_t game_height = 0, game_width = 0;
    std::uint32_t cam_height = 0, cam_width = 0;
    std::uint32_t frames = 20;
    std::uint32_t audio_length = 0;

    std::size_t game_bytes() const { return std::size_t{frames} * game_height * game_width * 3; }
    std::size_t cam_bytes() const { return std::size_t{frames} * cam_height * cam_width * 3; }

    static ClipDims of(const Profile& p);
    friend bool operator==(const ClipDims&, const ClipDims&) = default;
};

struct ClipRecord {
    std::string clip_id;
    std::uint32_t streamer_id = 0;
    ClipDims dims;
    std::vector<std::uint8_t> game;  // frames x H x W x 3, RGB
    std::vector<std::uint8_t> cam;   // frames x h x w x 3, RGB
    std::vector<float> audio;        // in [-1, 1]
    Labels labels;

    // Throws std::invalid_argument on size or range violations.
    void validate() const;
};

// "CLIP", u16 version, 6 x u32 dims (H, W, h, w, frames, audio_len),
// 3 x u8 label codes, game bytes, cam bytes, audio as little-endian f32.
// Identifiers are not part of the container; they live in the manifest.
inline constexpr std::size_t kClipHeaderBytes = 4 + 2 + 6 * 4 + 3;
std::size_t clip_container_size(const ClipDims& dims);

std::vector<unsigned char> save_clip(const ClipRecord& clip);
// Throws FormatError on bad magic, version, dims, label codes or length.
ClipRecord load_clip(std::span<const unsigned char> bytes);

// Scales pixels to [-1, 1] and slices audio into one window per frame.
ClipBatch make_batch(std::span<const ClipRecord* const> clips, const Profile& profile);

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

enum class Origin { Original, Clone };

struct ManifestEntry {
    std::string clip_id;
    std::string file;
    std::uint32_t streamer_id = 0;
    Labels labels;
    Origin origin = Origin::Original;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using Manifest = std::vector<ManifestEntry>;

// One JSON object per line: clip_id, file, streamer_id, valence, arousal,
// context, origin.
std::string manifest_to_jsonl(const Manifest& m);
Manifest manifest_from_jsonl(const std::string& text);
// Throws std::invalid_argument on duplicate original ids or clones of unknown ids.
void validate_manifest(const Manifest& m);

// Reads a manifest and the containers of its originals; file paths are
// relative to the manifest. Clip labels must agree with the manifest.
struct Dataset {
    Manifest manifest;
    std::vector<ClipRecord> originals;  // manifest order
    const ClipRecord& get(const std::string& clip_id) const;
};
Dataset load_dataset(const std::string& manifest_path);

// ---------------------------------------------------------------------------
// Pre-processing and balancing
// ---------------------------------------------------------------------------

Manifest filter_misc(const Manifest& data);

struct Split {
    Manifest train, test;
};
// Test size is floor(n * f + 0.5); both parts keep the input order.
Split split(const Manifest& data, double test_fraction, std::uint64_t seed);

// w_c = T_c / (T_d * N_c)
double rep_weight(double class_count, double total, std::size_t n_classes);

struct ClassRef {
    Output output;
    std::size_t cls;
    friend bool operator==(const ClassRef&, const ClassRef&) = default;
};

// Per-output class counts; Miscellaneous contexts are not counted.
struct LabelCounts {
    std::array<std::vector<std::size_t>, 3> counts{
        std::vector<std::size_t>(kValenceClasses), std::vector<std::size_t>(kArousalClasses),
        std::vector<std::size_t>(kContextClasses)};
    std::size_t total = 0;

    void add(const Labels& l);
    const std::vector<std::size_t>& of(Output o) const { return counts[static_cast<std::size_t>(o)]; }
    double share(Output o, std::size_t cls) const;
};

LabelCounts count_labels(const Manifest& data);

struct OversampleStep {
    std::size_t source;  // index into the dataset at selection time
    ClassRef least, most;
};

struct OversampleResult {
    Manifest data;
    std::vector<OversampleStep> trace;
    bool exhausted = false;  // stopped because no record qualified
};

// Repeatedly clones a uniformly chosen record that belongs to the globally
// least represented class and not to the most represented one, recomputing
// representation weights after every clone. Stops after `threshold` clones or
// when no record qualifies.
OversampleResult oversample(const Manifest& train, std::size_t threshold, std::uint64_t seed);

// i_x = T_d / (T_x K), normalized to sum to one.
std::vector<double> class_weights(std::span<const std::size_t> counts, std::size_t total);

// ---------------------------------------------------------------------------
// Synthetic clips
// ---------------------------------------------------------------------------

struct Marginals {
    std::vector<double> valence, arousal, context;  // context has 8 or 9 entries

    void validate() const;
    // Raw annotation distribution, Miscellaneous included unless dropped.
    static Marginals table_i(bool include_misc = true);
    static Marginals uniform();
    static Marginals from_json(const std::string& text);
    std::string to_json() const;
};

// Labels only; identical to the labels synth_generate assigns.
std::vector<Labels> synth_labels(std::uint64_t seed, std::size_t n, const Marginals& marginals);

// Context selects the game-frame stripe pattern, base colour and audio
// carrier; arousal scales audio amplitude and per-frame webcam brightness
// jitter; valence selects the webcam pattern.
ClipRecord synth_clip(std::uint64_t seed, std::size_t index, const Profile& profile, const Marginals& marginals);
std::vector<ClipRecord> synth_generate(std::uint64_t seed, std::size_t n, const Profile& profile,
                                       const Marginals& marginals);

}  // namespace ttfuse
