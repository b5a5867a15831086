#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ttfuse/train.hpp"

using namespace ttfuse;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const std::string& fusion = "late", const std::string& task = "joint") {
    RunConfig c;
    c.fusion = fusion;
    c.task = task;
    c.epochs = 2;
    c.synth_n = 10;
    c.batch_size = 4;
    c.seed = 3;
    c.marginals = "uniform";
    c.test_fraction = 0.3;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ttfuse_test_train_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("run config json") {
    RunConfig c;
    CHECK(c.lr == 0.0005);
    CHECK(c.epochs == 100);
    c.fusion = "early";
    c.seed = 123456789012345ULL;
    c.lr = 0.1 + 0.2;
    c.stop_at_f1 = 0.95;
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back == c);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"fusoin":"tt"})"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json("[1,2"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"epochs":"ten"})"), std::invalid_argument);
    // partial documents keep the defaults for missing keys
    CHECK(RunConfig::from_json(R"({"epochs":3})").lr == 0.0005);
}

TEST_CASE("run config validation") {
    auto bad = [](auto edit) {
        RunConfig c;
        edit(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    bad([](RunConfig& c) { c.fusion = "middle"; });
    bad([](RunConfig& c) { c.task = "both"; });
    bad([](RunConfig& c) { c.profile = "huge"; });
    bad([](RunConfig& c) { c.lr = 0; });
    bad([](RunConfig& c) { c.epochs = 0; });
    bad([](RunConfig& c) { c.batch_size = 1; });
    bad([](RunConfig& c) { c.test_fraction = 1.0; });
    bad([](RunConfig& c) { c.marginals = "/no/such/marginals.json"; });
    CHECK_NOTHROW(RunConfig{}.validate());
    const ModelSpec s = tiny("tt", "affect").model_spec();
    CHECK(s.fusion == FusionKind::TensorTrain);
    CHECK(s.tasks == TaskSet::AffectOnly);
    CHECK(s.profile.name == "desk");
}

TEST_CASE("metrics log layout") {
    CHECK(metrics_csv_header({Output::Context}) ==
          "epoch,loss_total,loss_context,f1_in_lane,f1_shopping,f1_returning,f1_roaming,f1_fighting,f1_pushing,"
          "f1_defending,f1_dead\n");
    const std::string joint = metrics_csv_header(outputs_for(TaskSet::Joint));
    CHECK(joint.rfind("epoch,loss_total,loss_valence,loss_arousal,loss_context,f1_neg_v,", 0) == 0);
    EpochLog row{4, 1.5, {0.5, 1.0}, {0.25, 1.0 / 3}};
    CHECK(metrics_csv_row(row) == "4,1.5,0.5,1,0.25,0.3333333333333333\n");
}

TEST_CASE("head macro F1 skips classes without support") {
    MetricsReport r;
    const std::size_t p[] = {0, 0, 1}, t[] = {0, 0, 1};
    r.add_output(Output::Valence, confusion(p, t, 3));
    const auto f = head_f1(r, {Output::Valence});
    REQUIRE(f.size() == 1);
    CHECK(f[0] == 1.0);
}

TEST_CASE("tiny runs are reproducible") {
    const RunConfig c = tiny();
    const RunResult a = run_training(c);
    const RunResult b = run_training(c);
    REQUIRE(a.log.size() == 2);
    REQUIRE(b.log.size() == 2);
    CHECK(a.validation_size == 3);
    CHECK(a.train_size >= 7);
    CHECK(a.train_size <= 14);
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(metrics_csv_row(a.log[i]) == metrics_csv_row(b.log[i]));
    CHECK(save_checkpoint(*a.model) == save_checkpoint(*b.model));
    RunConfig other = c;
    other.seed = 4;
    CHECK(metrics_csv_row(run_training(other).log[0]) != metrics_csv_row(a.log[0]));
}

TEST_CASE("game task logs only context classes") {
    RunConfig c = tiny("tt", "game");
    c.epochs = 1;
    const RunResult r = run_training(c);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].head_loss.size() == 1);
    CHECK(r.log[0].f1.size() == 8);
    CHECK(r.model->outputs() == std::vector<Output>{Output::Context});
    for (const auto& m : r.report.classes) CHECK(m.output == Output::Context);
}

TEST_CASE("run directory artifacts") {
    const fs::path dir = scratch("artifacts");
    RunConfig c = tiny("early", "affect");
    c.epochs = 1;
    c.out = dir.string();
    RunResult r = run_training(c);
    write_run(dir.string(), c, r);
    for (const char* f : {"config.json", "metrics.csv", "report.csv", "report.json", "checkpoint.ttfz"})
        CHECK(fs::exists(dir / f));
    CHECK(RunConfig::from_json(slurp(dir / "config.json")) == c);
    const std::string metrics = slurp(dir / "metrics.csv");
    CHECK(metrics == metrics_csv_header(r.model->outputs()) + metrics_csv_row(r.log[0]));
    CHECK(metrics.find("f1_in_lane") == std::string::npos);
    const FusionModel back = load_checkpoint_file((dir / "checkpoint.ttfz").string());
    CHECK(back.spec() == r.model->spec());
    CHECK_THROWS_AS(write_run(dir.string(), c, r), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("training from a manifest on disk") {
    const fs::path dir = scratch("manifest");
    fs::create_directories(dir / "clips");
    const auto clips = synth_generate(9, 8, Profile::desk(), Marginals::uniform());
    Manifest m;
    for (const auto& c : clips) {
        const std::string file = "clips/" + c.clip_id + ".clip";
        const auto bytes = save_clip(c);
        std::ofstream(dir / file, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                          static_cast<std::streamsize>(bytes.size()));
        m.push_back({c.clip_id, file, c.streamer_id, c.labels, Origin::Original});
    }
    std::ofstream(dir / "manifest.jsonl") << manifest_to_jsonl(m);
    RunConfig c = tiny();
    c.data = (dir / "manifest.jsonl").string();
    c.epochs = 1;
    c.test_fraction = 0;
    c.oversample = false;
    const RunResult r = run_training(c);
    CHECK(r.train_size == 8);
    CHECK(r.validation_size == 8);
    CHECK(r.report.samples == 8);

    // a clip whose labels disagree with its manifest line is refused
    m[0].labels.arousal = m[0].labels.arousal == Arousal::Neutral ? Arousal::Positive : Arousal::Neutral;
    std::ofstream(dir / "manifest.jsonl", std::ios::trunc) << manifest_to_jsonl(m);
    CHECK_THROWS(run_training(c));
    fs::remove_all(dir);
}
