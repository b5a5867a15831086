#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "ttfuse/data.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {

namespace {

// Raw annotation counts of the original stream data set.
constexpr double kValenceCounts[] = {246, 6227, 727};
constexpr double kArousalCounts[] = {6755, 445};
constexpr double kContextCounts[] = {2418, 294, 591, 1422, 892, 213, 233, 831, 308};

std::vector<double> normalized(const double* c, std::size_t n) {
    std::vector<double> p(c, c + n);
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& x : p) x /= s;
    return p;
}

void check_distribution(const std::vector<double>& p, const char* what) {
    double s = 0.0;
    for (double x : p) {
        if (!(x >= 0.0 && std::isfinite(x)))
            throw std::invalid_argument(std::string("marginals: ") + what + " has a negative or non-finite entry");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-6)
        throw std::invalid_argument(std::string("marginals: ") + what + " does not sum to 1");
}

std::size_t draw(Rng& rng, const std::vector<double>& p) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    // last class with nonzero mass absorbs rounding
    for (std::size_t i = p.size(); i-- > 0;)
        if (p[i] > 0.0) return i;
    return 0;
}

Rng clip_stream(std::uint64_t seed, std::size_t index) {
    Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1)));
    return Rng(mix.next_u64());
}

Labels draw_labels(Rng& rng, const Marginals& m) {
    Labels l;
    l.valence = static_cast<Valence>(draw(rng, m.valence));
    l.arousal = static_cast<Arousal>(draw(rng, m.arousal));
    l.context = static_cast<Context>(draw(rng, m.context));
    return l;
}

constexpr double kGameColours[9][3] = {
    {200, 60, 60},  {60, 200, 60},  {60, 60, 200},   {200, 200, 60}, {200, 60, 200},
    {60, 200, 200}, {150, 150, 150}, {80, 80, 80},   {230, 140, 70},
};

std::uint8_t to_pixel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void Marginals::validate() const {
    if (valence.size() != kValenceClasses) throw std::invalid_argument("marginals: valence needs 3 entries");
    if (arousal.size() != kArousalClasses) throw std::invalid_argument("marginals: arousal needs 2 entries");
    if (context.size() != kContextClasses && context.size() != kRawContextClasses)
        throw std::invalid_argument("marginals: context needs 8 or 9 entries");
    check_distribution(valence, "valence");
    check_distribution(arousal, "arousal");
    check_distribution(context, "context");
}

Marginals Marginals::table_i(bool include_misc) {
    Marginals m;
    m.valence = normalized(kValenceCounts, 3);
    m.arousal = normalized(kArousalCounts, 2);
    m.context = normalized(kContextCounts, include_misc ? 9 : 8);
    return m;
}

Marginals Marginals::uniform() {
    Marginals m;
    m.valence.assign(kValenceClasses, 1.0 / kValenceClasses);
    m.arousal.assign(kArousalClasses, 1.0 / kArousalClasses);
    m.context.assign(kContextClasses, 1.0 / kContextClasses);
    return m;
}

Marginals Marginals::from_json(const std::string& text) {
    Marginals m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.valence = j.at("valence").get<std::vector<double>>();
        m.arousal = j.at("arousal").get<std::vector<double>>();
        m.context = j.at("context").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("marginals: ") + e.what());
    }
    m.validate();
    return m;
}

std::string Marginals::to_json() const {
    return nlohmann::json{{"valence", valence}, {"arousal", arousal}, {"context", context}}.dump(2);
}

std::vector<Labels> synth_labels(std::uint64_t seed, std::size_t n, const Marginals& marginals) {
    marginals.validate();
    std::vector<Labels> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = clip_stream(seed, i);
        out[i] = draw_labels(rng, marginals);
    }
    return out;
}

ClipRecord synth_clip(std::uint64_t seed, std::size_t index, const Profile& profile, const Marginals& marginals) {
    marginals.validate();
    Rng rng = clip_stream(seed, index);
    ClipRecord c;
    c.labels = draw_labels(rng, marginals);
    char id[32];
    std::snprintf(id, sizeof id, "clip-%06zu", index);
    c.clip_id = id;
    c.streamer_id = static_cast<std::uint32_t>(rng.below(16));
    c.dims = ClipDims::of(profile);
    const ClipDims& d = c.dims;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    // Game view: oriented stripes over a context-specific base colour.
    const auto ctx = static_cast<std::size_t>(c.labels.context);
    const double theta = static_cast<double>(ctx) * std::numbers::pi / 9.0;
    const double freq = 2.0 + static_cast<double>(ctx % 3);
    const double phase0 = rng.uniform(0.0, two_pi);
    c.game.resize(d.game_bytes());
    std::size_t at = 0;
    for (std::uint32_t t = 0; t < d.frames; ++t)
        for (std::uint32_t y = 0; y < d.game_height; ++y)
            for (std::uint32_t x = 0; x < d.game_width; ++x) {
                const double u = static_cast<double>(x) / d.game_width, v = static_cast<double>(y) / d.game_height;
                const double s =
                    std::sin(two_pi * freq * (u * std::cos(theta) + v * std::sin(theta)) + phase0 + 0.35 * t);
                for (int ch = 0; ch < 3; ++ch) c.game[at++] = to_pixel(kGameColours[ctx][ch] + 45.0 * s + rng.normal(0.0, 10.0));
            }

    // Webcam view: valence picks the pattern, arousal the frame-to-frame
    // brightness jitter.
    const auto val = static_cast<std::size_t>(c.labels.valence);
    const double jitter = c.labels.arousal == Arousal::Positive ? 35.0 : 4.0;
    c.cam.resize(d.cam_bytes());
    at = 0;
    for (std::uint32_t t = 0; t < d.frames; ++t) {
        const double offset = rng.normal(0.0, jitter);
        for (std::uint32_t y = 0; y < d.cam_height; ++y)
            for (std::uint32_t x = 0; x < d.cam_width; ++x) {
                double base;
                switch (val) {
                    case 0: base = 40.0 + 80.0 * y / d.cam_height; break;                    // dark gradient
                    case 1: base = 128.0; break;                                              // flat
                    default: base = ((x / 4 + y / 4) % 2) ? 230.0 : 150.0; break;             // bright checks
                }
                const double skin[3] = {1.0, 0.85, 0.7};
                for (int ch = 0; ch < 3; ++ch) c.cam[at++] = to_pixel(base * skin[ch] + offset + rng.normal(0.0, 8.0));
            }
    }

    // Audio: context-specific carrier, arousal-dependent amplitude.
    const double amp = c.labels.arousal == Arousal::Positive ? 0.75 : 0.25;
    const double carrier = 0.02 + 0.035 * static_cast<double>(ctx);
    const double phase1 = rng.uniform(0.0, two_pi);
    c.audio.resize(d.audio_length);
    for (std::uint32_t i = 0; i < d.audio_length; ++i) {
        const double s = amp * std::sin(two_pi * carrier * i + phase1) + rng.normal(0.0, 0.03);
        c.audio[i] = static_cast<float>(std::clamp(s, -1.0, 1.0));
    }
    return c;
}

std::vector<ClipRecord> synth_generate(std::uint64_t seed, std::size_t n, const Profile& profile,
                                       const Marginals& marginals) {
    std::vector<ClipRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(synth_clip(seed, i, profile, marginals));
    return out;
}

}  // namespace ttfuse
