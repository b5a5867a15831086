#include "ttfuse/model.hpp"

#include <json.hpp>
#include <stdexcept>

#include "ttfuse/simd.hpp"

namespace ttfuse {

using nn::Mode;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Names, profiles, specs
// ---------------------------------------------------------------------------

std::string_view fusion_name(FusionKind k) {
    switch (k) {
        case FusionKind::Early: return "early";
        case FusionKind::Late: return "late";
        case FusionKind::TensorTrain: return "tt";
    }
    return "?";
}

FusionKind parse_fusion(std::string_view name) {
    if (name == "early") return FusionKind::Early;
    if (name == "late") return FusionKind::Late;
    if (name == "tt" || name == "tensortrain") return FusionKind::TensorTrain;
    throw std::invalid_argument("unknown fusion kind '" + std::string(name) + "' (expected early|late|tt)");
}

void Profile::validate() const {
    auto fail = [&](const std::string& msg) { throw std::invalid_argument("profile '" + name + "': " + msg); };
    if (frames == 0) fail("frames must be positive");
    if (game_height == 0 || game_width == 0 || cam_height == 0 || cam_width == 0) fail("image sizes must be positive");
    if (game_channels.empty() || cam_channels.empty()) fail("image extractors need at least one stage");
    if (audio_channels.empty()) fail("audio extractor needs at least one conv layer");
    if (audio_length < frames) fail("audio must hold at least one sample per frame");
    if (feature_width == 0 || view_lstm_width == 0 || early_lstm_width == 0 || head_hidden == 0)
        fail("layer widths must be positive");
    if (lstm_layers == 0) fail("at least one LSTM layer is required");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
    for (std::size_t c : game_channels)
        if (c == 0) fail("channel counts must be positive");
    for (std::size_t c : cam_channels)
        if (c == 0) fail("channel counts must be positive");
    for (std::size_t c : audio_channels)
        if (c == 0) fail("channel counts must be positive");
    tt.validate();
    const std::size_t side = view_lstm_width + 1;
    if (tt.input_size() != side * side * side)
        fail("TT input modes multiply to " + std::to_string(tt.input_size()) + ", expected (" +
             std::to_string(view_lstm_width) + "+1)^3 = " + std::to_string(side * side * side));
}

Profile Profile::full() {
    Profile p;
    p.name = "full";
    p.game_height = p.game_width = 128;
    p.game_channels = {32, 64, 128, 256};
    p.cam_height = p.cam_width = 64;
    p.cam_channels = {32, 64, 128};
    p.audio_length = 5512;
    p.audio_channels = {32, 64, 128};
    p.audio_kernel = 9;
    p.audio_stride = 4;
    p.feature_width = 512;
    p.early_lstm_width = 384;
    p.view_lstm_width = 128;
    p.head_hidden = 128;
    p.tt = TTLayerSpec::fusion_full(true);
    return p;
}

Profile Profile::desk() {
    Profile p;
    p.name = "desk";
    p.game_height = p.game_width = 32;
    p.game_channels = {8, 16};
    p.cam_height = p.cam_width = 16;
    p.cam_channels = {8, 16};
    p.audio_length = 1024;
    p.audio_channels = {8, 16, 32};
    p.audio_kernel = 5;
    p.audio_stride = 2;
    p.feature_width = 32;
    p.early_lstm_width = 96;
    p.view_lstm_width = 32;
    p.head_hidden = 32;
    p.tt = TTLayerSpec{{3, 11, 33, 11, 3}, {4, 2, 3, 2, 2}, {1, 2, 4, 4, 2, 1}, true};
    return p;
}

Profile Profile::named(std::string_view name) {
    if (name == "full") return full();
    if (name == "desk") return desk();
    throw std::invalid_argument("unknown profile '" + std::string(name) + "' (expected full|desk)");
}

std::size_t ModelSpec::fused_width() const {
    switch (fusion) {
        case FusionKind::Early: return profile.early_lstm_width;
        case FusionKind::Late: return 3 * profile.view_lstm_width;
        case FusionKind::TensorTrain: return profile.tt.output_size();
    }
    return 0;
}

void ModelSpec::validate() const { profile.validate(); }

namespace {

json tt_to_json(const TTLayerSpec& s) {
    return {{"input_modes", s.input_modes}, {"output_modes", s.output_modes}, {"ranks", s.ranks}, {"bias", s.has_bias}};
}

TTLayerSpec tt_from_json(const json& j) {
    TTLayerSpec s;
    s.input_modes = j.at("input_modes").get<std::vector<std::size_t>>();
    s.output_modes = j.at("output_modes").get<std::vector<std::size_t>>();
    s.ranks = j.at("ranks").get<std::vector<std::size_t>>();
    s.has_bias = j.at("bias").get<bool>();
    return s;
}

json profile_to_json(const Profile& p) {
    return {{"name", p.name},
            {"frames", p.frames},
            {"game", {{"height", p.game_height}, {"width", p.game_width}, {"channels", p.game_channels}}},
            {"cam", {{"height", p.cam_height}, {"width", p.cam_width}, {"channels", p.cam_channels}}},
            {"conv_kernel", p.conv_kernel},
            {"audio",
             {{"length", p.audio_length},
              {"channels", p.audio_channels},
              {"kernel", p.audio_kernel},
              {"stride", p.audio_stride}}},
            {"feature_width", p.feature_width},
            {"early_lstm_width", p.early_lstm_width},
            {"view_lstm_width", p.view_lstm_width},
            {"lstm_layers", p.lstm_layers},
            {"head_hidden", p.head_hidden},
            {"dropout", p.dropout},
            {"tt", tt_to_json(p.tt)}};
}

Profile profile_from_json(const json& j) {
    if (j.is_string()) return Profile::named(j.get<std::string>());
    Profile p;
    p.name = j.value("name", std::string("custom"));
    p.frames = j.at("frames").get<std::size_t>();
    p.game_height = j.at("game").at("height").get<std::size_t>();
    p.game_width = j.at("game").at("width").get<std::size_t>();
    p.game_channels = j.at("game").at("channels").get<std::vector<std::size_t>>();
    p.cam_height = j.at("cam").at("height").get<std::size_t>();
    p.cam_width = j.at("cam").at("width").get<std::size_t>();
    p.cam_channels = j.at("cam").at("channels").get<std::vector<std::size_t>>();
    p.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    p.audio_length = j.at("audio").at("length").get<std::size_t>();
    p.audio_channels = j.at("audio").at("channels").get<std::vector<std::size_t>>();
    p.audio_kernel = j.at("audio").at("kernel").get<std::size_t>();
    p.audio_stride = j.at("audio").at("stride").get<std::size_t>();
    p.feature_width = j.at("feature_width").get<std::size_t>();
    p.early_lstm_width = j.at("early_lstm_width").get<std::size_t>();
    p.view_lstm_width = j.at("view_lstm_width").get<std::size_t>();
    p.lstm_layers = j.at("lstm_layers").get<std::size_t>();
    p.head_hidden = j.at("head_hidden").get<std::size_t>();
    p.dropout = j.at("dropout").get<double>();
    p.tt = tt_from_json(j.at("tt"));
    return p;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) {
    json j{{"fusion", fusion_name(spec.fusion)}, {"tasks", task_name(spec.tasks)}, {"profile", profile_to_json(spec.profile)}};
    return j.dump();
}

ModelSpec spec_from_json(const std::string& text) {
    const json j = json::parse(text);
    ModelSpec s;
    s.fusion = parse_fusion(j.at("fusion").get<std::string>());
    s.tasks = parse_task(j.at("tasks").get<std::string>());
    s.profile = profile_from_json(j.at("profile"));
    return s;
}

std::size_t ParamBreakdown::of(const std::string& part) const {
    for (const auto& [name, n] : parts)
        if (name == part) return n;
    return 0;
}

// ---------------------------------------------------------------------------
// Sub-networks
// ---------------------------------------------------------------------------

namespace {

// Strided conv block + residual block per stage, then global pooling and a
// dense ReLU projection to the per-frame feature width.
struct ImageExtractor {
    std::vector<nn::ConvBlock> downs;
    std::vector<nn::ResidualBlock> blocks;
    nn::GlobalAvgPool pool;
    nn::Dense proj;
    nn::Relu relu;

    ImageExtractor() = default;
    ImageExtractor(const std::string& name, const std::vector<std::size_t>& channels, std::size_t kernel,
                   std::size_t features, Rng& rng) {
        std::size_t in = 3;
        for (std::size_t i = 0; i < channels.size(); ++i) {
            const std::string stage = name + "/stage" + std::to_string(i);
            downs.emplace_back(nn::Conv::conv2d(stage + "/conv", kernel, in, channels[i], 2, nn::Padding::Same, rng),
                               stage + "/bn");
            blocks.emplace_back(stage + "/res", channels[i], kernel, false, rng);
            in = channels[i];
        }
        proj = nn::Dense(name + "/proj", in, features, rng);
    }

    Tensor forward(const Tensor& x, Mode mode) {
        Tensor h = x;
        for (std::size_t i = 0; i < downs.size(); ++i) h = blocks[i].forward(downs[i].forward(h, mode), mode);
        return relu.forward(proj.forward(pool.forward(h)));
    }

    Tensor backward(const Tensor& g) {
        Tensor h = pool.backward(proj.backward(relu.backward(g)));
        for (std::size_t i = downs.size(); i-- > 0;) h = downs[i].backward(blocks[i].backward(h));
        return h;
    }

    void collect(nn::ParamList& out) {
        for (std::size_t i = 0; i < downs.size(); ++i) {
            downs[i].collect(out);
            blocks[i].collect(out);
        }
        proj.collect(out);
    }
};

// Three strided 1-D conv blocks over each frame's audio window, then pooling
// and a dense ReLU projection.
struct AudioExtractor {
    std::vector<nn::ConvBlock> convs;
    nn::GlobalAvgPool pool;
    nn::Dense proj;
    nn::Relu relu;

    AudioExtractor() = default;
    AudioExtractor(const std::string& name, const Profile& p, Rng& rng) {
        std::size_t in = 1;
        for (std::size_t i = 0; i < p.audio_channels.size(); ++i) {
            const std::string stage = name + "/conv" + std::to_string(i);
            convs.emplace_back(nn::Conv::conv1d(stage, p.audio_kernel, in, p.audio_channels[i], p.audio_stride,
                                                nn::Padding::Same, rng),
                               stage + "/bn");
            in = p.audio_channels[i];
        }
        proj = nn::Dense(name + "/proj", in, p.feature_width, rng);
    }

    Tensor forward(const Tensor& x, Mode mode) {
        Tensor h = x;
        for (auto& c : convs) h = c.forward(h, mode);
        return relu.forward(proj.forward(pool.forward(h)));
    }

    Tensor backward(const Tensor& g) {
        Tensor h = pool.backward(proj.backward(relu.backward(g)));
        for (std::size_t i = convs.size(); i-- > 0;) h = convs[i].backward(h);
        return h;
    }

    void collect(nn::ParamList& out) {
        for (auto& c : convs) c.collect(out);
        proj.collect(out);
    }
};

// BN -> dropout -> stacked LSTMs (last hidden state) -> BN -> dropout.
struct TemporalStack {
    nn::BatchNorm bn_in;
    nn::Dropout drop_in;
    std::vector<nn::Lstm> lstms;
    nn::BatchNorm bn_out;
    nn::Dropout drop_out;

    TemporalStack() = default;
    TemporalStack(const std::string& name, std::size_t in, std::size_t width, std::size_t layers, double dropout,
                  Rng& rng)
        : bn_in(name + "/bn_in", in), drop_in(dropout), bn_out(name + "/bn_out", width), drop_out(dropout) {
        for (std::size_t l = 0; l < layers; ++l)
            lstms.emplace_back(name + "/lstm" + std::to_string(l), l == 0 ? in : width, width, rng);
    }

    Tensor forward(const Tensor& x, Mode mode, Rng& rng) {
        Tensor h = drop_in.forward(bn_in.forward(x, mode), mode, rng);
        for (std::size_t l = 0; l < lstms.size(); ++l) h = lstms[l].forward(h, l + 1 < lstms.size());
        return drop_out.forward(bn_out.forward(h, mode), mode, rng);
    }

    Tensor backward(const Tensor& g) {
        Tensor h = bn_out.backward(drop_out.backward(g));
        for (std::size_t l = lstms.size(); l-- > 0;) h = lstms[l].backward(h);
        return bn_in.backward(drop_in.backward(h));
    }

    void collect(nn::ParamList& out) {
        bn_in.collect(out);
        for (auto& l : lstms) l.collect(out);
        bn_out.collect(out);
    }
};

struct TTFusion {
    TTLayerSpec spec;
    std::vector<nn::Param> cores;
    nn::Param bias;
    std::vector<TTTrace> traces;
    Tensor vx, vy, vz;

    TTFusion() = default;
    TTFusion(const std::string& name, const TTLayerSpec& s, Rng& rng) : spec(s) {
        TTCores init = tt_init(spec, rng);
        for (std::size_t k = 0; k < init.cores.size(); ++k)
            cores.emplace_back(name + "/core" + std::to_string(k), std::move(init.cores[k]));
        if (spec.has_bias) bias = nn::Param(name + "/bias", std::move(init.bias));
    }

    TTCores snapshot() const {
        TTCores c;
        for (const auto& p : cores) c.cores.push_back(p.value);
        if (spec.has_bias) c.bias = bias.value;
        return c;
    }

    Tensor forward(const Tensor& a, const Tensor& b, const Tensor& c) {
        const std::size_t n = a.dim(0), h = a.dim(1);
        const TTCores tc = snapshot();
        const std::size_t out = spec.output_size();
        Tensor y({n, out});
        traces.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor z = outer_fuse(std::span<const double>(a.data() + i * h, h),
                                        std::span<const double>(b.data() + i * h, h),
                                        std::span<const double>(c.data() + i * h, h));
            const std::vector<double> yi = tt_forward(spec, tc, z.values(), &traces[i]);
            std::copy(yi.begin(), yi.end(), y.data() + i * out);
        }
        vx = a;
        vy = b;
        vz = c;
        return y;
    }

    std::array<Tensor, 3> backward(const Tensor& g) {
        const std::size_t n = vx.dim(0), h = vx.dim(1), out = spec.output_size();
        const TTCores tc = snapshot();
        std::array<Tensor, 3> grads{Tensor(vx.shape()), Tensor(vy.shape()), Tensor(vz.shape())};
        const auto& K = simd::active();
        for (std::size_t i = 0; i < n; ++i) {
            TTGradients tg = tt_backward(spec, tc, traces[i], std::span<const double>(g.data() + i * out, out));
            for (std::size_t k = 0; k < cores.size(); ++k)
                K.add(cores[k].grad.size(), tg.grad_cores.cores[k].data(), cores[k].grad.data());
            if (spec.has_bias) K.add(out, tg.grad_cores.bias.data(), bias.grad.data());
            const OuterFuseGrad og = outer_fuse_backward(std::span<const double>(vx.data() + i * h, h),
                                                         std::span<const double>(vy.data() + i * h, h),
                                                         std::span<const double>(vz.data() + i * h, h), tg.grad_x);
            std::copy(og.gx.begin(), og.gx.end(), grads[0].data() + i * h);
            std::copy(og.gy.begin(), og.gy.end(), grads[1].data() + i * h);
            std::copy(og.gz.begin(), og.gz.end(), grads[2].data() + i * h);
        }
        return grads;
    }

    void collect(nn::ParamList& out) {
        for (auto& c : cores) out.push_back(&c);
        if (spec.has_bias) out.push_back(&bias);
    }
};

// Dense(hidden) + ReLU -> Dense(classes); softmax is applied by the caller.
struct Head {
    nn::Dense hidden;
    nn::Relu relu;
    nn::Dense out;

    Head() = default;
    Head(const std::string& name, std::size_t in, std::size_t width, std::size_t classes, Rng& rng)
        : hidden(name + "/hidden", in, width, rng), out(name + "/out", width, classes, rng) {}

    Tensor forward(const Tensor& x) { return out.forward(relu.forward(hidden.forward(x))); }
    Tensor backward(const Tensor& g) { return hidden.backward(relu.backward(out.backward(g))); }
    void collect(nn::ParamList& p) {
        hidden.collect(p);
        out.collect(p);
    }
};

// [B*T, F] -> [B, T, F] and back are pure reshapes; frames of one clip are
// contiguous.
Tensor to_sequence(Tensor x, std::size_t clips, std::size_t frames) {
    const std::size_t f = x.dim(1);
    return std::move(x).reshaped({clips, frames, f});
}

Tensor concat_last(const std::vector<const Tensor*>& parts) {
    Shape shape = parts.front()->shape();
    const std::size_t rows = parts.front()->size() / shape.back();
    std::size_t width = 0;
    for (const Tensor* p : parts) width += p->shape().back();
    shape.back() = width;
    Tensor out(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (const Tensor* p : parts) {
            const std::size_t w = p->shape().back();
            std::copy_n(p->data() + r * w, w, out.data() + r * width + off);
            off += w;
        }
    }
    return out;
}

std::vector<Tensor> split_last(const Tensor& x, const std::vector<std::size_t>& widths) {
    Shape shape = x.shape();
    const std::size_t total = shape.back();
    const std::size_t rows = x.size() / total;
    std::vector<Tensor> out;
    std::size_t off = 0;
    for (std::size_t w : widths) {
        shape.back() = w;
        Tensor t(shape);
        for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * total + off, w, t.data() + r * w);
        out.push_back(std::move(t));
        off += w;
    }
    return out;
}

}  // namespace

struct FusionModel::Impl {
    ImageExtractor game, cam;
    AudioExtractor audio;
    TemporalStack early;
    std::array<TemporalStack, 3> views;
    TTFusion tt;
    std::vector<Head> heads;
    std::size_t clips = 0;
};

FusionModel::FusionModel(ModelSpec spec, Rng& rng) : spec_(std::move(spec)), impl_(std::make_unique<Impl>()) {
    spec_.validate();
    const Profile& p = spec_.profile;
    outputs_ = outputs_for(spec_.tasks);
    impl_->game = ImageExtractor("game", p.game_channels, p.conv_kernel, p.feature_width, rng);
    impl_->cam = ImageExtractor("cam", p.cam_channels, p.conv_kernel, p.feature_width, rng);
    impl_->audio = AudioExtractor("audio", p, rng);
    if (spec_.fusion == FusionKind::Early) {
        impl_->early = TemporalStack("temporal", 3 * p.feature_width, p.early_lstm_width, p.lstm_layers, p.dropout, rng);
    } else {
        const char* names[] = {"temporal/game", "temporal/cam", "temporal/audio"};
        for (std::size_t v = 0; v < 3; ++v)
            impl_->views[v] = TemporalStack(names[v], p.feature_width, p.view_lstm_width, p.lstm_layers, p.dropout, rng);
    }
    if (spec_.fusion == FusionKind::TensorTrain) impl_->tt = TTFusion("fusion_tt", p.tt, rng);
    const std::size_t fused = spec_.fused_width();
    for (Output o : outputs_)
        impl_->heads.emplace_back("head/" + std::string(output_name(o)), fused, p.head_hidden, class_count(o), rng);
}

FusionModel::~FusionModel() = default;
FusionModel::FusionModel(FusionModel&&) noexcept = default;
FusionModel& FusionModel::operator=(FusionModel&&) noexcept = default;

nn::ParamList FusionModel::params() {
    nn::ParamList out;
    impl_->game.collect(out);
    impl_->cam.collect(out);
    impl_->audio.collect(out);
    if (spec_.fusion == FusionKind::Early)
        impl_->early.collect(out);
    else
        for (auto& v : impl_->views) v.collect(out);
    if (spec_.fusion == FusionKind::TensorTrain) impl_->tt.collect(out);
    for (auto& h : impl_->heads) h.collect(out);
    return out;
}

ParamBreakdown FusionModel::count_params() {
    ParamBreakdown b;
    auto add = [&](const std::string& name, auto& module) {
        nn::ParamList ps;
        module.collect(ps);
        const std::size_t n = nn::count_trainable(ps);
        b.parts.emplace_back(name, n);
        b.total += n;
    };
    add("extractor.game", impl_->game);
    add("extractor.cam", impl_->cam);
    add("extractor.audio", impl_->audio);
    if (spec_.fusion == FusionKind::Early) {
        add("temporal", impl_->early);
    } else {
        std::size_t n = 0;
        for (auto& v : impl_->views) {
            nn::ParamList ps;
            v.collect(ps);
            n += nn::count_trainable(ps);
        }
        b.parts.emplace_back("temporal", n);
        b.total += n;
    }
    if (spec_.fusion == FusionKind::TensorTrain) add("fusion.tt", impl_->tt);
    for (std::size_t i = 0; i < outputs_.size(); ++i) add("head." + std::string(output_name(outputs_[i])), impl_->heads[i]);
    return b;
}

Features FusionModel::extract_features(const ClipBatch& batch, Mode mode) {
    const Profile& p = spec_.profile;
    const std::size_t n = batch.clips * p.frames;
    const Shape game_shape{n, p.game_height, p.game_width, 3};
    const Shape cam_shape{n, p.cam_height, p.cam_width, 3};
    const Shape audio_shape{n, p.audio_window(), 1};
    require_shape(batch.game, game_shape, "game frames");
    require_shape(batch.cam, cam_shape, "cam frames");
    require_shape(batch.audio, audio_shape, "audio windows");
    impl_->clips = batch.clips;
    Features f;
    f.game = to_sequence(impl_->game.forward(batch.game, mode), batch.clips, p.frames);
    f.cam = to_sequence(impl_->cam.forward(batch.cam, mode), batch.clips, p.frames);
    f.audio = to_sequence(impl_->audio.forward(batch.audio, mode), batch.clips, p.frames);
    return f;
}

ClipBatch FusionModel::extract_backward(const Features& grad) {
    const Profile& p = spec_.profile;
    const std::size_t n = impl_->clips * p.frames;
    ClipBatch g;
    g.clips = impl_->clips;
    g.game = impl_->game.backward(grad.game.reshaped({n, p.feature_width}));
    g.cam = impl_->cam.backward(grad.cam.reshaped({n, p.feature_width}));
    g.audio = impl_->audio.backward(grad.audio.reshaped({n, p.feature_width}));
    return g;
}

Tensor FusionModel::fuse(const Features& f, Mode mode, Rng& rng) {
    if (spec_.fusion == FusionKind::Early) {
        const Tensor x = concat_last({&f.game, &f.cam, &f.audio});
        return impl_->early.forward(x, mode, rng);
    }
    Tensor s0 = impl_->views[0].forward(f.game, mode, rng);
    Tensor s1 = impl_->views[1].forward(f.cam, mode, rng);
    Tensor s2 = impl_->views[2].forward(f.audio, mode, rng);
    if (spec_.fusion == FusionKind::Late) return concat_last({&s0, &s1, &s2});
    return impl_->tt.forward(s0, s1, s2);
}

Features FusionModel::fuse_backward(const Tensor& grad_fused) {
    const std::size_t fw = spec_.profile.feature_width;
    Features g;
    if (spec_.fusion == FusionKind::Early) {
        auto parts = split_last(impl_->early.backward(grad_fused), {fw, fw, fw});
        g.game = std::move(parts[0]);
        g.cam = std::move(parts[1]);
        g.audio = std::move(parts[2]);
        return g;
    }
    std::array<Tensor, 3> sg;
    if (spec_.fusion == FusionKind::Late) {
        const std::size_t h = spec_.profile.view_lstm_width;
        auto parts = split_last(grad_fused, {h, h, h});
        for (std::size_t v = 0; v < 3; ++v) sg[v] = std::move(parts[v]);
    } else {
        sg = impl_->tt.backward(grad_fused);
    }
    g.game = impl_->views[0].backward(sg[0]);
    g.cam = impl_->views[1].backward(sg[1]);
    g.audio = impl_->views[2].backward(sg[2]);
    return g;
}

std::vector<Tensor> FusionModel::head_logits(const Tensor& fused, Mode) {
    const Shape expected{fused.dim(0), spec_.fused_width()};
    require_shape(fused, expected, "fused clip vector");
    std::vector<Tensor> out;
    for (auto& h : impl_->heads) out.push_back(h.forward(fused));
    return out;
}

Tensor FusionModel::heads_backward(const std::vector<Tensor>& grad_logits) {
    if (grad_logits.size() != impl_->heads.size()) throw std::invalid_argument("one logit gradient per head expected");
    Tensor g;
    for (std::size_t i = 0; i < impl_->heads.size(); ++i) {
        Tensor gi = impl_->heads[i].backward(grad_logits[i]);
        if (g.empty())
            g = std::move(gi);
        else
            simd::active().add(g.size(), gi.data(), g.data());
    }
    return g;
}

std::vector<Tensor> FusionModel::forward(const ClipBatch& batch, Mode mode, Rng& rng) {
    return head_logits(fuse(extract_features(batch, mode), mode, rng), mode);
}

ClipBatch FusionModel::backward(const std::vector<Tensor>& grad_logits) {
    return extract_backward(fuse_backward(heads_backward(grad_logits)));
}

std::vector<Prediction> FusionModel::classify(const Tensor& fused) {
    const std::vector<Tensor> logits = head_logits(fused, Mode::Infer);
    const std::size_t n = fused.dim(0);
    std::vector<Prediction> preds(n);
    for (std::size_t h = 0; h < outputs_.size(); ++h) {
        const std::size_t k = logits[h].dim(1);
        for (std::size_t i = 0; i < n; ++i)
            preds[i].distributions[static_cast<std::size_t>(outputs_[h])] =
                nn::softmax(std::span<const double>(logits[h].data() + i * k, k));
    }
    return preds;
}

std::vector<Prediction> FusionModel::predict(const ClipBatch& batch) {
    Rng unused(0);
    return classify(fuse(extract_features(batch, Mode::Infer), Mode::Infer, unused));
}

}  // namespace ttfuse
