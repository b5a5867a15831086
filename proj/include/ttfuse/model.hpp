#pragma once

// The three fusion architectures. All share per-view feature extractors and
// task heads; they differ only in how the 20 per-frame feature triples are
// turned into one clip vector:
//
//   Early        concat(game, cam, audio) per frame -> BN -> dropout -> LSTM x2 -> BN -> dropout
//   Late         per view: BN -> dropout -> LSTM x2 -> BN -> dropout; concat the three summaries
//   TensorTrain  per-view stage as Late, then outer_fuse(vx, vy, vz) -> TT layer

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ttfuse/labels.hpp"
#include "ttfuse/nn.hpp"
#include "ttfuse/tt.hpp"

namespace ttfuse {

enum class FusionKind { Early, Late, TensorTrain };

std::string_view fusion_name(FusionKind k);  // "early", "late", "tt"
FusionKind parse_fusion(std::string_view name);

struct Profile {
    std::string name = "custom";
    std::size_t frames = 20;

    std::size_t game_height = 0, game_width = 0;
    std::vector<std::size_t> game_channels;
    std::size_t cam_height = 0, cam_width = 0;
    std::vector<std::size_t> cam_channels;
    std::size_t conv_kernel = 3;

    std::size_t audio_length = 0;
    std::vector<std::size_t> audio_channels;
    std::size_t audio_kernel = 5, audio_stride = 2;

    std::size_t feature_width = 0;  // per view, per frame
    std::size_t early_lstm_width = 0;
    std::size_t view_lstm_width = 0;
    std::size_t lstm_layers = 2;
    std::size_t head_hidden = 0;
    double dropout = 0.2;

    TTLayerSpec tt;

    // Samples of the clip audio assigned to each frame.
    std::size_t audio_window() const { return audio_length / frames; }

    void validate() const;

    static Profile full();
    static Profile desk();
    static Profile named(std::string_view name);

    friend bool operator==(const Profile&, const Profile&) = default;
};

struct ModelSpec {
    FusionKind fusion = FusionKind::TensorTrain;
    TaskSet tasks = TaskSet::Joint;
    Profile profile = Profile::desk();

    std::size_t fused_width() const;
    void validate() const;
    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

// Model inputs for B clips, frames flattened into the batch axis:
// game [B*T, H, W, 3], cam [B*T, h, w, 3], audio [B*T, window, 1], all scaled
// to roughly [-1, 1].
struct ClipBatch {
    std::size_t clips = 0;
    Tensor game, cam, audio;
};

// Per-frame features, each [B, T, F].
struct Features {
    Tensor game, cam, audio;
};

struct Prediction {
    // Indexed by Output; empty when the head is absent.
    std::array<std::vector<double>, 3> distributions;
    bool has(Output o) const { return !distributions[static_cast<std::size_t>(o)].empty(); }
    const std::vector<double>& operator[](Output o) const { return distributions[static_cast<std::size_t>(o)]; }
};

struct ParamBreakdown {
    std::vector<std::pair<std::string, std::size_t>> parts;  // in model order
    std::size_t total = 0;
    std::size_t of(const std::string& part) const;
};

class FusionModel {
public:
    FusionModel(ModelSpec spec, Rng& rng);
    ~FusionModel();
    FusionModel(FusionModel&&) noexcept;
    FusionModel& operator=(FusionModel&&) noexcept;

    const ModelSpec& spec() const { return spec_; }
    const std::vector<Output>& outputs() const { return outputs_; }

    // Every parameter (trainable and running statistics) in a fixed order.
    nn::ParamList params();
    ParamBreakdown count_params();

    Features extract_features(const ClipBatch& batch, nn::Mode mode);
    Tensor fuse(const Features& features, nn::Mode mode, Rng& rng);
    // One logits tensor [B, n] per output in outputs() order.
    std::vector<Tensor> head_logits(const Tensor& fused, nn::Mode mode);

    std::vector<Tensor> forward(const ClipBatch& batch, nn::Mode mode, Rng& rng);
    // Back-propagates logit gradients through the last forward() call.
    // Returns the gradient w.r.t. the model inputs (game, cam, audio).
    ClipBatch backward(const std::vector<Tensor>& grad_logits);

    // Per-stage backward passes, matching extract_features / fuse / head_logits.
    Tensor heads_backward(const std::vector<Tensor>& grad_logits);
    Features fuse_backward(const Tensor& grad_fused);
    ClipBatch extract_backward(const Features& grad);

    std::vector<Prediction> classify(const Tensor& fused);
    std::vector<Prediction> predict(const ClipBatch& batch);

private:
    struct Impl;
    ModelSpec spec_;
    std::vector<Output> outputs_;
    std::unique_ptr<Impl> impl_;
};

// Checkpoint file: "TTFZ", u16 version, u32 descriptor length + JSON model spec,
// u32 entry count, then per parameter: u32 name length, name, u8 rank,
// rank x u32 extents, little-endian f64 data.
std::vector<unsigned char> save_checkpoint(FusionModel& model);
FusionModel load_checkpoint(const std::vector<unsigned char>& bytes);
void save_checkpoint_file(FusionModel& model, const std::string& path);
FusionModel load_checkpoint_file(const std::string& path);

}  // namespace ttfuse
