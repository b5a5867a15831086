// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "ttfuse/data.hpp"
#include "ttfuse/eval.hpp"
#include "ttfuse/gradsuite.hpp"
#include "ttfuse/model.hpp"
#include "ttfuse/train.hpp"
#include "ttfuse/tt.hpp"

using namespace ttfuse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

// -- 1 ------------------------------------------------------------------
Outcome fusion_tensor_size() {
    std::vector<double> v(128, 0.5);
    const Tensor z = outer_fuse(v, v, v);
    return {z.size() == 2146689 && z.shape() == Shape{129, 129, 129}, "elements " + std::to_string(z.size())};
}

// -- 2 ------------------------------------------------------------------
Outcome compression_accounting() {
    const TTLayerSpec s = TTLayerSpec::fusion_full(true);
    const auto c = compression_report(s, 128);
    const std::size_t stage = tt_param_count(s);
    const bool ok = c.dense_params == 274776192 && stage >= 10500 && stage <= 12000 && c.ratio >= 3.5e-5 &&
                    c.ratio <= 4.5e-5;
    return {ok, "dense " + std::to_string(c.dense_params) + ", tt stage " + std::to_string(stage) + " (cores " +
                    std::to_string(c.tt_params) + "), ratio " + fmt(c.ratio, 4)};
}

// -- 3 ------------------------------------------------------------------
Outcome tt_oracle() {
    Rng rng(20240601);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        TTLayerSpec s;
        const std::size_t d = 1 + rng.below(4);
        s.ranks.push_back(1);
        for (std::size_t k = 0; k < d; ++k) {
            s.input_modes.push_back(1 + rng.below(4));
            s.output_modes.push_back(1 + rng.below(4));
            s.ranks.push_back(k + 1 == d ? 1 : 1 + rng.below(4));
        }
        s.has_bias = rng.below(2) == 1;
        TTCores cores = tt_init(s, rng);
        if (s.has_bias)
            for (double& b : cores.bias.values()) b = rng.normal(0.0, 1.0);
        std::vector<double> x(s.input_size());
        for (double& v : x) v = rng.normal(0.0, 1.0);
        const std::vector<double> y = tt_forward(s, cores, x);
        const Tensor w = tt_to_dense(s, cores);
        const std::size_t n = s.output_size();
        for (std::size_t j = 0; j < n; ++j) {
            double acc = s.has_bias ? cores.bias[j] : 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * w[i * n + j];
            worst = std::max(worst, std::abs(acc - y[j]));
        }
    }
    return {worst <= 1e-10, "100 specs, max abs error " + fmt(worst, 3)};
}

// -- 4 ------------------------------------------------------------------
Outcome gradient_suite() {
    GradSuiteOptions opt;
    opt.seed = static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
    opt.configs = 20;
    opt.include_model = false;
    bool ok = true;
    std::string detail = "seed " + std::to_string(opt.seed) + ";";
    for (const LayerCheck& c : run_grad_suite(opt)) {
        const bool good = c.pass && c.configs >= 20;
        ok = ok && good;
        detail += " " + c.layer + " " + fmt(c.max_rel_error, 2) + (good ? "" : " FAIL(" + c.worst + ")");
    }
    return {ok, detail};
}

// -- 5 ------------------------------------------------------------------
Outcome published_statistics() {
    const auto rows = table_iv_fixture();
    auto pair = [&](const std::string& m) {
        const MetricsReport *j = nullptr, *s = nullptr;
        for (const auto& r : rows) {
            if (r.model == m && r.task == "joint") j = &r;
            if (r.model == m && r.task == "single") s = &r;
        }
        return delta_report(*j, *s);
    };
    const auto e = pair("early"), l = pair("late"), t = pair("tt");
    const bool ok = std::abs(e.mean + 0.036) <= 0.002 && std::abs(l.mean - 0.044) <= 0.002 &&
                    std::abs(t.mean - 0.026) <= 0.002 && std::abs(e.test.p - 0.047) <= 0.015 &&
                    std::abs(l.test.p - 0.03) <= 0.015;
    return {ok, "means " + fmt(e.mean, 4) + " / " + fmt(l.mean, 4) + " / " + fmt(t.mean, 4) + ", p early " +
                    fmt(e.test.p, 4) + ", p late " + fmt(l.test.p, 4)};
}

// -- 6 ------------------------------------------------------------------
Outcome balancing_arithmetic() {
    const double neg = rep_weight(246, 7200, 3), lane = rep_weight(2418, 7200, 9);
    const std::size_t counts[] = {9, 1};
    const auto w = class_weights(counts, 10);
    const bool ok = std::abs(neg - 0.011389) < 5e-7 && std::abs(lane - 0.037315) < 5e-7 &&
                    std::abs(w[0] - 0.1) < 1e-12 && std::abs(w[1] - 0.9) < 1e-12;
    return {ok, "w(Neg V) " + fmt(neg, 5) + ", w(In Lane) " + fmt(lane, 5) + ", (9,1) -> (" + fmt(w[0]) + ", " +
                    fmt(w[1]) + ")"};
}

// -- 7 ------------------------------------------------------------------
Outcome oversampler_properties() {
    Manifest raw;
    const auto labels = synth_labels(77, 2500, Marginals::table_i(true));
    for (std::size_t i = 0; i < labels.size(); ++i)
        raw.push_back({"c" + std::to_string(i), "", 0, labels[i], Origin::Original});
    const Manifest train = filter_misc(raw);
    const auto r = oversample(train, train.size(), 5);

    // replay every selection against weights recomputed from scratch
    bool rule = r.data.size() == train.size() + r.trace.size() && r.trace.size() <= train.size();
    std::vector<std::vector<double>> counts{std::vector<double>(3), std::vector<double>(2), std::vector<double>(8)};
    auto add = [&](const Labels& l) {
        counts[0][l.index(Output::Valence)] += 1;
        counts[1][l.index(Output::Arousal)] += 1;
        counts[2][l.index(Output::Context)] += 1;
    };
    for (const auto& e : train) add(e.labels);
    for (std::size_t s = 0; s < r.trace.size() && rule; ++s) {
        const double n = static_cast<double>(train.size() + s);
        double lo = 1e300, hi = -1e300;
        ClassRef least{}, most{};
        for (std::size_t o = 0; o < 3; ++o)
            for (std::size_t k = 0; k < counts[o].size(); ++k) {
                const double w = counts[o][k] / (n * static_cast<double>(counts[o].size()));
                if (w < lo) lo = w, least = {static_cast<Output>(o), k};
                if (w > hi) hi = w, most = {static_cast<Output>(o), k};
            }
        const Labels& src = r.data[r.trace[s].source].labels;
        rule = r.trace[s].source < train.size() + s && src.index(least.output) == least.cls &&
               src.index(most.output) != most.cls && r.data[train.size() + s].labels == src;
        add(src);
    }
    const LabelCounts before = count_labels(train), after = count_labels(r.data);
    const double b = before.share(Output::Valence, 0), a = after.share(Output::Valence, 0);
    const double nb = before.share(Output::Valence, 1), na = after.share(Output::Valence, 1);
    return {rule && a > b && na < nb,
            std::to_string(train.size()) + " clips, " + std::to_string(r.trace.size()) + " clones" +
                (r.exhausted ? " (exhausted)" : "") + ", rule " + (rule ? "held" : "broken") + ", Neg V share " +
                fmt(b, 3) + " -> " + fmt(a, 3) + ", Neut V " + fmt(nb, 3) + " -> " + fmt(na, 3)};
}

// -- 8 ------------------------------------------------------------------
RunConfig smoke_config(const std::string& fusion) {
    RunConfig c;
    c.fusion = fusion;
    c.task = "joint";
    c.profile = "desk";
    c.synth_n = 64;
    c.marginals = "uniform";
    c.test_fraction = 0;  // score the training clips
    c.oversample = false;
    c.epochs = 50;
    c.batch_size = 8;
    c.lr = 0.002;
    c.stop_at_f1 = 0.95;
    c.seed = 0;
    return c;
}

Outcome overfit_smoke() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (const char* f : {"early", "late", "tt"}) {
        const RunConfig c = smoke_config(f);
        const RunResult r = run_training(c);
        const auto hf = head_f1(r.report, r.model->outputs());
        const bool good = r.log.size() <= 50 && std::all_of(hf.begin(), hf.end(), [](double v) { return v >= 0.95; });
        ok = ok && good;
        detail += std::string(detail.empty() ? "" : "; ") + f + " " + std::to_string(r.log.size()) + " epochs F1";
        for (double v : hf) detail += " " + fmt(v, 3);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ok && secs <= 600, detail + "; " + fmt(secs, 4) + " s"};
}

// -- 9 ------------------------------------------------------------------
Outcome parameter_ordering() {
    bool ok = true;
    long long diff = -1;
    std::string detail;
    for (TaskSet t : {TaskSet::Joint, TaskSet::AffectOnly, TaskSet::GameOnly}) {
        std::size_t total[3];
        for (int f = 0; f < 3; ++f) {
            Rng rng(0);
            total[f] = FusionModel(ModelSpec{static_cast<FusionKind>(f), t, Profile::full()}, rng).count_params().total;
        }
        const std::size_t early = total[static_cast<int>(FusionKind::Early)],
                          late = total[static_cast<int>(FusionKind::Late)],
                          tt = total[static_cast<int>(FusionKind::TensorTrain)];
        const long long d = static_cast<long long>(tt) - static_cast<long long>(late);
        ok = ok && early > tt && tt > late && (diff < 0 || d == diff);
        diff = d;
        detail += std::string(detail.empty() ? "" : "; ") + std::string(task_name(t)) + " " + std::to_string(early) +
                  " > " + std::to_string(tt) + " > " + std::to_string(late);
    }
    return {ok, detail + "; tt - late = " + std::to_string(diff)};
}

// -- 10 -----------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "ttfuse_acceptance_determinism";
    fs::remove_all(root);
    const std::string args = " train --fusion tt --task joint --profile desk --n 16 --epochs 3 --seed 11"
                             " --marginals uniform --lr 0.003 --out ";
    std::string logs[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = root / ("run" + std::to_string(i));
        const std::string cmd = std::string("\"") + TTFUSE_CLI + "\"" + args + "\"" + out.string() + "\" > /dev/null";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "train exited abnormally"};
        logs[i] = slurp(out / "metrics.csv");
    }
    fs::remove_all(root);
    const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
    return {!logs[0].empty() && logs[0] == logs[1],
            std::to_string(lines) + " log lines, " + (logs[0] == logs[1] ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion all[] = {
        {"fusion tensor size", fusion_tensor_size},
        {"compression accounting", compression_accounting},
        {"tt oracle equivalence", tt_oracle},
        {"gradient suite", gradient_suite},
        {"published statistics", published_statistics},
        {"balancing arithmetic", balancing_arithmetic},
        {"oversampler properties", oversampler_properties},
        {"overfit smoke test", overfit_smoke},
        {"parameter ordering", parameter_ordering},
        {"determinism", determinism},
    };
    int failed = 0, index = 0;
    for (const auto& c : all) {
        ++index;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << index << ". " << c.name << " ["
                  << std::fixed << std::setprecision(2) << secs << " s] " << std::defaultfloat << o.detail
                  << std::endl;
    }
    std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
