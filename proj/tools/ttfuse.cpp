// ttfuse command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
// numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "ttfuse/bytes.hpp"
#include "ttfuse/errors.hpp"
#include "ttfuse/gradsuite.hpp"
#include "ttfuse/train.hpp"
#include "ttfuse/tt.hpp"

using namespace ttfuse;
namespace fs = std::filesystem;

namespace {

// Signals a failure that is not the user's fault.
struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    const auto b = bytes::read_file(path);
    return {b.begin(), b.end()};
}

void write_text(const fs::path& path, const std::string& text) {
    bytes::write_file(path.string(), std::vector<unsigned char>(text.begin(), text.end()));
}

void print_distribution(std::ostream& os, const Manifest& m) {
    LabelCounts c;
    std::size_t misc = 0;
    for (const auto& e : m) {
        c.add(e.labels);
        misc += e.labels.context == Context::Miscellaneous;
    }
    os << "clips " << m.size() << '\n';
    auto row = [&](const std::string& name, std::size_t n) {
        const double share = m.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(m.size());
        os << "  " << std::left << std::setw(16) << name << std::right << std::setw(7) << n << "  " << std::fixed
           << std::setprecision(4) << share << '\n';
        os.unsetf(std::ios::fixed);
    };
    for (Output o : kAllOutputs) {
        os << output_name(o) << '\n';
        for (std::size_t k = 0; k < class_count(o); ++k) row(std::string(class_name(o, k)), c.of(o)[k]);
        if (o == Output::Context) row("Misc.", misc);
    }
}

// Options shared by every subcommand that builds a model or trains one.
struct TrainFlags {
    std::string config;
    std::optional<std::string> fusion, task, profile, out, data, marginals;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, batch, n;
    std::optional<double> lr, test_fraction, stop_at;
    bool no_oversample = false;

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig{} : RunConfig::from_json(read_text(config));
        if (fusion) c.fusion = *fusion;
        if (task) c.task = *task;
        if (profile) c.profile = *profile;
        if (out) c.out = *out;
        if (data) c.data = *data;
        if (marginals) c.marginals = *marginals;
        if (seed) c.seed = *seed;
        if (epochs) c.epochs = *epochs;
        if (batch) c.batch_size = *batch;
        if (n) c.synth_n = *n;
        if (lr) c.lr = *lr;
        if (test_fraction) c.test_fraction = *test_fraction;
        if (stop_at) c.stop_at_f1 = *stop_at;
        if (no_oversample) c.oversample = false;
        c.validate();
        return c;
    }
};

std::vector<MetricsReport> one(MetricsReport r) { return {std::move(r)}; }

std::string render(const std::vector<MetricsReport>& reports, const std::string& format) {
    if (format == "csv") return render_csv(reports);
    if (format == "json") return render_json(reports);
    return render_text(reports);
}

// A run directory or a checkpoint file.
FusionModel load_model(const std::string& where) {
    fs::path p(where);
    if (fs::is_directory(p)) p /= "checkpoint.ttfz";
    if (!fs::exists(p)) throw RuntimeFailure("no checkpoint at '" + p.string() + "'");
    return load_checkpoint_file(p.string());
}

struct EvalData {
    std::string data, marginals = "uniform";
    std::size_t n = 64;
    std::uint64_t seed = 0;

    std::vector<ClipRecord> clips(const Profile& profile) const {
        std::vector<ClipRecord> out;
        if (!data.empty()) {
            Dataset d = load_dataset(data);
            for (auto& c : d.originals)
                if (c.labels.context != Context::Miscellaneous) out.push_back(std::move(c));
        } else {
            RunConfig tmp;
            tmp.marginals = marginals;
            const Marginals m = tmp.load_marginals();
            Rng master(seed);
            const std::uint64_t data_seed = master.next_u64();  // same clips a training run with this seed sees
            for (std::size_t i = 0; i < n; ++i) {
                ClipRecord c = synth_clip(data_seed, i, profile, m);
                if (c.labels.context != Context::Miscellaneous) out.push_back(std::move(c));
            }
        }
        if (out.empty()) throw std::invalid_argument("no clips to evaluate");
        return out;
    }

    void add_flags(CLI::App* app) {
        app->add_option("--data", data, "Manifest to score (default: synthetic clips)");
        app->add_option("--n", n, "Synthetic clip count");
        app->add_option("--seed", seed, "Seed of the synthetic clips, as passed to train");
        app->add_option("--marginals", marginals, "table_i, uniform or a JSON file");
    }
};

int cmd_generate(std::size_t n, const std::string& profile_name, std::uint64_t seed, const std::string& marginals,
                 const std::string& out) {
    const Profile profile = Profile::named(profile_name);
    RunConfig tmp;
    tmp.marginals = marginals;
    const Marginals m = tmp.load_marginals();
    const fs::path dir(out);
    if (fs::exists(dir / "manifest.jsonl")) throw std::invalid_argument("'" + out + "' already holds a dataset");
    std::error_code ec;
    fs::create_directories(dir / "clips", ec);
    if (ec) throw RuntimeFailure("cannot create '" + (dir / "clips").string() + "': " + ec.message());
    Manifest manifest;
    for (std::size_t i = 0; i < n; ++i) {
        const ClipRecord c = synth_clip(seed, i, profile, m);
        const std::string file = "clips/" + c.clip_id + ".clip";
        bytes::write_file((dir / file).string(), save_clip(c));
        manifest.push_back({c.clip_id, file, c.streamer_id, c.labels, Origin::Original});
    }
    write_text(dir / "manifest.jsonl", manifest_to_jsonl(manifest));
    print_distribution(std::cout, manifest);
    return 0;
}

int cmd_train(const TrainFlags& flags) {
    const RunConfig config = flags.resolve();
    if (!config.out.empty() && (fs::exists(fs::path(config.out) / "metrics.csv") ||
                                fs::exists(fs::path(config.out) / "config.json")))
        throw std::invalid_argument("run directory '" + config.out + "' already holds a run");
    RunResult result = run_training(config, &std::cout);
    std::cout << render_text(one(result.report));
    if (!config.out.empty()) {
        write_run(config.out, config, result);
        std::cout << "wrote " << config.out << '\n';
    }
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& fixture, EvalData data, const std::string& format) {
    if (!fixture.empty()) {
        if (fixture != "tableIV") throw std::invalid_argument("unknown fixture '" + fixture + "'");
        std::cout << render(table_iv_fixture(), format);
        return 0;
    }
    if (model_path.empty()) throw std::invalid_argument("eval needs --model or --fixture");
    FusionModel model = load_model(model_path);
    MetricsReport r = evaluate(model, data.clips(model.spec().profile));
    r.model = std::string(fusion_name(model.spec().fusion));
    r.task = std::string(task_name(model.spec().tasks));
    std::cout << render(one(std::move(r)), format);
    return 0;
}

int cmd_compare(const std::string& fixture, const std::string& model_name, const std::string& joint,
                const std::vector<std::string>& singles, EvalData data, const std::string& format) {
    PairedDeltaReport d;
    if (!fixture.empty()) {
        if (fixture != "tableIV") throw std::invalid_argument("unknown fixture '" + fixture + "'");
        const auto rows = table_iv_fixture();
        const MetricsReport *j = nullptr, *s = nullptr;
        for (const auto& r : rows) {
            if (r.model == model_name && r.task == "joint") j = &r;
            if (r.model == model_name && r.task == "single") s = &r;
        }
        if (!j || !s) throw std::invalid_argument("fixture has no model '" + model_name + "' (early|late|tt)");
        d = delta_report(*j, *s);
    } else {
        if (joint.empty() || singles.empty()) throw std::invalid_argument("compare needs --joint and --single");
        FusionModel jm = load_model(joint);
        const auto clips = data.clips(jm.spec().profile);
        MetricsReport jr = evaluate(jm, clips);
        MetricsReport sr;
        for (std::size_t i = 0; i < singles.size(); ++i) {
            FusionModel sm = load_model(singles[i]);
            if (!(sm.spec().profile == jm.spec().profile))
                throw std::invalid_argument("joint and single models use different profiles");
            MetricsReport r = evaluate(sm, clips);
            sr = i == 0 ? std::move(r) : merge_reports(sr, r, "single");
        }
        jr.model = sr.model = std::string(fusion_name(jm.spec().fusion));
        d = delta_report(jr, sr);
    }
    std::cout << (format == "csv" ? render_delta_csv(d) : render_delta_text(d));
    return 0;
}

int cmd_params(const std::string& fusion, const std::string& task, const std::string& profile_name, bool all) {
    const Profile profile = Profile::named(profile_name);
    if (all) {
        std::cout << std::left << std::setw(8) << "task" << std::right << std::setw(12) << "early" << std::setw(12)
                  << "late" << std::setw(12) << "tt" << std::setw(12) << "tt-late" << '\n';
        for (TaskSet t : {TaskSet::Joint, TaskSet::AffectOnly, TaskSet::GameOnly}) {
            std::size_t total[3];
            for (int f = 0; f < 3; ++f) {
                Rng rng(0);
                total[f] = FusionModel(ModelSpec{static_cast<FusionKind>(f), t, profile}, rng).count_params().total;
            }
            std::cout << std::left << std::setw(8) << task_name(t) << std::right;
            for (std::size_t v : total) std::cout << std::setw(12) << v;
            std::cout << std::setw(12) << static_cast<long long>(total[2]) - static_cast<long long>(total[1]) << '\n';
        }
        return 0;
    }
    const ModelSpec spec{parse_fusion(fusion), parse_task(task), profile};
    Rng rng(0);
    FusionModel model(spec, rng);
    const ParamBreakdown b = model.count_params();
    std::cout << "model " << fusion_name(spec.fusion) << ' ' << task_name(spec.tasks) << " profile " << profile.name
              << '\n';
    for (const auto& [name, count] : b.parts) std::cout << "  " << std::left << std::setw(20) << name << std::right
                                                        << std::setw(12) << count << '\n';
    std::cout << "  " << std::left << std::setw(20) << "total" << std::right << std::setw(12) << b.total << '\n';
    if (spec.fusion == FusionKind::TensorTrain) {
        const auto c = compression_report(profile.tt, profile.view_lstm_width);
        std::cout << "tt cores " << c.tt_params << ", with bias " << tt_param_count(profile.tt) << '\n'
                  << "dense equivalent " << c.dense_params << " (" << profile.tt.input_size() << " x "
                  << profile.view_lstm_width << ")\n"
                  << "ratio " << std::setprecision(4) << c.ratio << '\n';
    }
    return 0;
}

int cmd_gradcheck(const std::string& profile_name, std::uint64_t seed, std::size_t configs, bool skip_model) {
    Profile::named(profile_name);  // validates the flag; layer checks draw their own shapes
    GradSuiteOptions opt;
    opt.seed = seed;
    opt.configs = configs;
    opt.include_model = !skip_model;
    bool ok = true;
    for (const LayerCheck& c : run_grad_suite(opt)) {
        std::cout << std::left << std::setw(14) << c.layer << std::right << " configs " << std::setw(3) << c.configs
                  << " coords " << std::setw(6) << c.checked << " kinks " << std::setw(3) << c.kinks
                  << " max_rel " << std::scientific << std::setprecision(2) << c.max_rel_error << std::defaultfloat
                  << (c.pass ? "  ok" : "  FAIL") << '\n';
        if (!c.pass) {
            std::cerr << "gradient check failed in " << c.layer << ": " << c.worst << '\n';
            ok = false;
        }
    }
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-train multimodal fusion experiments"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Write synthetic clips and a manifest");
    std::size_t gen_n = 200;
    std::string gen_profile = "desk", gen_marginals = "table_i", gen_out;
    std::uint64_t gen_seed = 0;
    gen->add_option("--n", gen_n, "Number of clips");
    gen->add_option("--profile", gen_profile, "full or desk");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--marginals", gen_marginals, "table_i, uniform or a JSON file");
    gen->add_option("--out", gen_out, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train a model and write a run directory");
    TrainFlags tf;
    train->add_option("--config", tf.config, "JSON run configuration");
    train->add_option("--fusion", tf.fusion, "early, late or tt");
    train->add_option("--task", tf.task, "joint, affect or game");
    train->add_option("--profile", tf.profile, "full or desk");
    train->add_option("--seed", tf.seed, "Master seed");
    train->add_option("--epochs", tf.epochs, "Training epochs");
    train->add_option("--lr", tf.lr, "Adam step size");
    train->add_option("--batch", tf.batch, "Clips per batch");
    train->add_option("--out", tf.out, "Run directory");
    train->add_option("--data", tf.data, "Manifest (default: synthetic clips)");
    train->add_option("--n", tf.n, "Synthetic clip count");
    train->add_option("--marginals", tf.marginals, "table_i, uniform or a JSON file");
    train->add_option("--test-fraction", tf.test_fraction, "Held-out share; 0 validates on the training clips");
    train->add_flag("--no-oversample", tf.no_oversample, "Skip oversampling");
    train->add_option("--stop-at-f1", tf.stop_at, "Stop once every head reaches this macro F1");

    // eval
    auto* ev = app.add_subcommand("eval", "Score a checkpoint or print the published table");
    std::string ev_model, ev_fixture, ev_format = "text";
    EvalData ev_data;
    ev->add_option("--model", ev_model, "Run directory or checkpoint");
    ev->add_option("--fixture", ev_fixture, "tableIV");
    ev->add_option("--format", ev_format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));
    ev_data.add_flags(ev);

    // compare
    auto* cmp = app.add_subcommand("compare", "Joint versus single-task F1 deltas with a Wilcoxon test");
    std::string cmp_fixture, cmp_model = "tt", cmp_joint, cmp_format = "text";
    std::vector<std::string> cmp_single;
    EvalData cmp_data;
    cmp->add_option("--fixture", cmp_fixture, "tableIV");
    cmp->add_option("--model", cmp_model, "Fixture row: early, late or tt");
    cmp->add_option("--joint", cmp_joint, "Joint-task run directory or checkpoint");
    cmp->add_option("--single", cmp_single, "Single-task run(s); affect and game runs are merged");
    cmp->add_option("--format", cmp_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
    cmp_data.add_flags(cmp);

    // params
    auto* par = app.add_subcommand("params", "Trainable parameter counts");
    std::string par_fusion = "tt", par_task = "joint", par_profile = "full";
    bool par_all = false;
    par->add_option("--fusion", par_fusion, "early, late or tt");
    par->add_option("--task", par_task, "joint, affect or game");
    par->add_option("--profile", par_profile, "full or desk");
    par->add_flag("--all", par_all, "Totals for every fusion kind and task set");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every layer");
    std::string gc_profile = "desk";
    std::uint64_t gc_seed = 1;
    std::size_t gc_configs = 20;
    bool gc_skip_model = false;
    gc->add_option("--profile", gc_profile, "full or desk");
    gc->add_option("--seed", gc_seed, "Seed for the random configurations");
    gc->add_option("--configs", gc_configs, "Configurations per layer");
    gc->add_flag("--skip-model", gc_skip_model, "Leave out the end-to-end model check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) return cmd_generate(gen_n, gen_profile, gen_seed, gen_marginals, gen_out);
        if (*train) return cmd_train(tf);
        if (*ev) return cmd_eval(ev_model, ev_fixture, ev_data, ev_format);
        if (*cmp) return cmd_compare(cmp_fixture, cmp_model, cmp_joint, cmp_single, cmp_data, cmp_format);
        if (*par) return cmd_params(par_fusion, par_task, par_profile, par_all);
        if (*gc) return cmd_gradcheck(gc_profile, gc_seed, gc_configs, gc_skip_model);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
