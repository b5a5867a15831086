#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ttfuse/bytes.hpp"
#include "ttfuse/errors.hpp"
#include "ttfuse/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ttfuse {

ModelSpec RunConfig::model_spec() const {
    ModelSpec s;
    s.fusion = parse_fusion(fusion);
    s.tasks = parse_task(task);
    s.profile = Profile::named(profile);
    return s;
}

Marginals RunConfig::load_marginals() const {
    if (marginals == "table_i") return Marginals::table_i(true);
    if (marginals == "uniform") return Marginals::uniform();
    std::ifstream in(marginals);
    if (!in) throw std::invalid_argument("cannot read marginals file '" + marginals + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return Marginals::from_json(ss.str());
}

void RunConfig::validate() const {
    model_spec().validate();
    if (!(lr > 0.0 && std::isfinite(lr))) throw std::invalid_argument("lr must be positive");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in [0, 1)");
    if (!(stop_at_f1 >= 0.0 && stop_at_f1 <= 1.0)) throw std::invalid_argument("stop_at_f1 must lie in [0, 1]");
    if (data.empty()) {
        if (synth_n < 2) throw std::invalid_argument("synth_n must be at least 2");
        load_marginals();
    }
}

std::string RunConfig::to_json() const {
    json j{{"fusion", fusion},         {"task", task},
           {"profile", profile},       {"lr", lr},
           {"epochs", epochs},         {"batch_size", batch_size},
           {"seed", seed},             {"data", data},
           {"synth_n", synth_n},       {"marginals", marginals},
           {"test_fraction", test_fraction}, {"oversample", oversample},
           {"stop_at_f1", stop_at_f1}, {"out", out}};
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
    RunConfig c;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            const json& v = it.value();
            if (k == "fusion") c.fusion = v.get<std::string>();
            else if (k == "task") c.task = v.get<std::string>();
            else if (k == "profile") c.profile = v.get<std::string>();
            else if (k == "lr") c.lr = v.get<double>();
            else if (k == "epochs") c.epochs = v.get<std::size_t>();
            else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else if (k == "data") c.data = v.get<std::string>();
            else if (k == "synth_n") c.synth_n = v.get<std::size_t>();
            else if (k == "marginals") c.marginals = v.get<std::string>();
            else if (k == "test_fraction") c.test_fraction = v.get<double>();
            else if (k == "oversample") c.oversample = v.get<bool>();
            else if (k == "stop_at_f1") c.stop_at_f1 = v.get<double>();
            else if (k == "out") c.out = v.get<std::string>();
            else throw std::invalid_argument("config: unknown key '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------

std::vector<double> head_f1(const MetricsReport& report, const std::vector<Output>& outputs) {
    std::vector<double> out;
    for (Output o : outputs) {
        double sum = 0;
        std::size_t n = 0;
        for (std::size_t c = 0; c < class_count(o); ++c)
            if (const ClassMetrics* m = report.find(o, c); m && m->support > 0) {
                sum += m->f1;
                ++n;
            }
        out.push_back(n ? sum / static_cast<double>(n) : 0.0);
    }
    return out;
}

namespace {

std::string column_name(Output o, std::size_t c) {
    std::string s(class_name(o, c));
    for (char& ch : s) ch = ch == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

// Loads every clip a manifest refers to once; clones share the record of
// their original.
struct ClipStore {
    std::map<std::string, ClipRecord> clips;
    const ClipRecord& get(const ManifestEntry& e) const { return clips.at(e.clip_id); }
};

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data() + i * k;
        out[i] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    }
    return out;
}

MetricsReport evaluate_refs(FusionModel& model, const std::vector<const ClipRecord*>& clips, std::size_t batch_size) {
    const auto& outputs = model.outputs();
    std::vector<std::vector<std::size_t>> preds(outputs.size()), truth(outputs.size());
    Rng unused(0);
    for (std::size_t b = 0; b < clips.size(); b += batch_size) {
        const std::size_t e = std::min(clips.size(), b + batch_size);
        std::span<const ClipRecord* const> part(clips.data() + b, e - b);
        const ClipBatch batch = make_batch(part, model.spec().profile);
        const auto logits = model.forward(batch, nn::Mode::Infer, unused);
        for (std::size_t h = 0; h < outputs.size(); ++h) {
            const auto p = argmax_rows(logits[h]);
            preds[h].insert(preds[h].end(), p.begin(), p.end());
            for (const ClipRecord* c : part) truth[h].push_back(c->labels.index(outputs[h]));
        }
    }
    MetricsReport r;
    r.model = std::string(fusion_name(model.spec().fusion));
    r.task = std::string(task_name(model.spec().tasks));
    for (std::size_t h = 0; h < outputs.size(); ++h)
        r.add_output(outputs[h], confusion(preds[h], truth[h], class_count(outputs[h])));
    r.samples = clips.size();
    return r;
}

}  // namespace

MetricsReport evaluate(FusionModel& model, const std::vector<ClipRecord>& clips, std::size_t batch_size) {
    std::vector<const ClipRecord*> refs;
    for (const auto& c : clips) refs.push_back(&c);
    return evaluate_refs(model, refs, batch_size);
}

std::string metrics_csv_header(const std::vector<Output>& outputs) {
    std::string s = "epoch,loss_total";
    for (Output o : outputs) s += ",loss_" + std::string(output_name(o));
    for (Output o : outputs)
        for (std::size_t c = 0; c < class_count(o); ++c) s += ",f1_" + column_name(o, c);
    return s + "\n";
}

std::string metrics_csv_row(const EpochLog& row) {
    std::string s = std::to_string(row.epoch) + "," + format_double(row.loss_total);
    for (double v : row.head_loss) s += "," + format_double(v);
    for (double v : row.f1) s += "," + format_double(v);
    return s + "\n";
}

RunResult run_training(const RunConfig& config, std::ostream* progress) {
    config.validate();
    const ModelSpec spec = config.model_spec();
    const Profile& profile = spec.profile;
    Rng master(config.seed);
    const std::uint64_t data_seed = master.next_u64();
    const std::uint64_t split_seed = master.next_u64();
    const std::uint64_t oversample_seed = master.next_u64();
    Rng init_rng = master.fork();
    Rng order_rng = master.fork();
    Rng dropout_rng = master.fork();

    // Data
    ClipStore store;
    Manifest manifest;
    if (config.data.empty()) {
        const Marginals m = config.load_marginals();
        for (std::size_t i = 0; i < config.synth_n; ++i) {
            ClipRecord c = synth_clip(data_seed, i, profile, m);
            manifest.push_back({c.clip_id, "", c.streamer_id, c.labels, Origin::Original});
            store.clips.emplace(c.clip_id, std::move(c));
        }
    } else {
        Dataset d = load_dataset(config.data);
        manifest = std::move(d.manifest);
        for (auto& c : d.originals) {
            std::string id = c.clip_id;
            store.clips.emplace(std::move(id), std::move(c));
        }
    }

    Manifest data = filter_misc(manifest);
    Manifest train, validation;
    if (config.test_fraction > 0.0) {
        Split s = split(data, config.test_fraction, split_seed);
        train = std::move(s.train);
        validation = std::move(s.test);
    } else {
        train = data;
        validation = data;
    }
    if (train.size() < 2) throw std::invalid_argument("training set needs at least two clips");
    if (validation.empty()) validation = train;
    if (config.oversample) train = oversample(train, train.size(), oversample_seed).data;

    RunResult result;
    result.model = std::make_unique<FusionModel>(spec, init_rng);
    FusionModel& model = *result.model;
    const auto& outputs = model.outputs();
    result.train_size = train.size();
    result.validation_size = validation.size();

    // Class weights per head; classes absent from the training set get one
    // pseudo-count so the weights stay finite.
    const LabelCounts counts = count_labels(train);
    std::vector<std::vector<double>> weights;
    for (Output o : outputs) {
        std::vector<std::size_t> c = counts.of(o);
        std::size_t total = 0;
        for (std::size_t v : c) total += v;
        if (std::find(c.begin(), c.end(), std::size_t{0}) != c.end()) {
            for (auto& v : c) ++v;
            total += c.size();
        }
        weights.push_back(class_weights(c, total));
    }

    std::vector<const ClipRecord*> val_refs;
    for (const auto& e : validation) val_refs.push_back(&store.get(e));

    nn::AdamState adam;
    adam.alpha = config.lr;
    const nn::ParamList params = model.params();
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        order_rng.shuffle(std::span<std::size_t>(order));
        // Batches of batch_size; a trailing single clip joins the previous
        // batch since batch normalization needs two rows.
        std::vector<std::pair<std::size_t, std::size_t>> batches;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size)
            batches.push_back({b, std::min(order.size(), b + config.batch_size)});
        if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
            batches[batches.size() - 2].second = batches.back().second;
            batches.pop_back();
        }

        EpochLog row;
        row.epoch = epoch;
        row.head_loss.assign(outputs.size(), 0.0);
        for (const auto& [b, e] : batches) {
            std::vector<const ClipRecord*> refs;
            for (std::size_t i = b; i < e; ++i) refs.push_back(&store.get(train[order[i]]));
            const ClipBatch batch = make_batch(refs, profile);
            nn::zero_grads(params);
            const auto logits = model.forward(batch, nn::Mode::Train, dropout_rng);
            std::vector<Tensor> grads;
            for (std::size_t h = 0; h < outputs.size(); ++h) {
                std::vector<std::size_t> targets;
                for (const ClipRecord* c : refs) targets.push_back(c->labels.index(outputs[h]));
                nn::BatchLoss l = nn::weighted_softmax_xent(logits[h], targets, weights[h]);
                if (!std::isfinite(l.loss))
                    throw NumericError("non-finite " + std::string(output_name(outputs[h])) + " loss at epoch " +
                                       std::to_string(epoch));
                row.head_loss[h] += l.loss * static_cast<double>(e - b);
                grads.push_back(std::move(l.grad));
            }
            model.backward(grads);
            nn::adam_step(adam, params);
        }
        for (double& l : row.head_loss) l /= static_cast<double>(train.size());
        row.loss_total = std::accumulate(row.head_loss.begin(), row.head_loss.end(), 0.0);

        result.report = evaluate_refs(model, val_refs, config.batch_size);
        for (Output o : outputs)
            for (std::size_t c = 0; c < class_count(o); ++c) row.f1.push_back(result.report.find(o, c)->f1);
        const auto hf = head_f1(result.report, outputs);
        if (progress) {
            *progress << "epoch " << epoch << " loss " << row.loss_total;
            for (std::size_t h = 0; h < outputs.size(); ++h) *progress << ' ' << output_name(outputs[h]) << "_f1 " << hf[h];
            *progress << '\n';
        }
        result.log.push_back(std::move(row));
        if (config.stop_at_f1 > 0.0 &&
            std::all_of(hf.begin(), hf.end(), [&](double f) { return f >= config.stop_at_f1; }))
            break;
    }
    return result;
}

void write_run(const std::string& dir, const RunConfig& config, RunResult& result) {
    const fs::path d(dir);
    if (fs::exists(d / "metrics.csv") || fs::exists(d / "config.json"))
        throw std::invalid_argument("run directory '" + dir + "' already holds a run");
    fs::create_directories(d);
    auto put = [&](const char* name, const std::string& text) {
        bytes::write_file((d / name).string(), std::vector<unsigned char>(text.begin(), text.end()));
    };
    put("config.json", config.to_json());
    std::string csv = metrics_csv_header(result.model->outputs());
    for (const auto& row : result.log) csv += metrics_csv_row(row);
    put("metrics.csv", csv);
    const std::vector<MetricsReport> reports{result.report};
    put("report.csv", render_csv(reports));
    put("report.json", render_json(reports));
    save_checkpoint_file(*result.model, (d / "checkpoint.ttfz").string());
}

}  // namespace ttfuse
