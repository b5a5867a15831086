#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "ttfuse/data.hpp"
#include "ttfuse/eval.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ttfuse_test_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Run cli(const std::string& args) {
    static int counter = 0;
    const fs::path out = fs::temp_directory_path() / ("ttfuse_test_cli_out" + std::to_string(counter++));
    const std::string cmd = std::string("\"") + TTFUSE_CLI + "\" " + args + " > \"" + out.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Run r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
    fs::remove(out);
    return r;
}

}  // namespace

TEST_CASE("params") {
    const Run r = cli("params --fusion tt --profile full");
    CHECK(r.code == 0);
    CHECK(r.out.find("fusion.tt") != std::string::npos);
    CHECK(r.out.find("11084") != std::string::npos);
    CHECK(r.out.find("274776192") != std::string::npos);
    CHECK(r.out.find("3.894e-05") != std::string::npos);

    const Run all = cli("params --all");
    CHECK(all.code == 0);
    std::istringstream is(all.out);
    std::string line;
    std::getline(is, line);
    int rows = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string task;
        long long early, late, tt, diff;
        ls >> task >> early >> late >> tt >> diff;
        CHECK(early > tt);
        CHECK(tt > late);
        CHECK(diff == 11084);
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("usage and configuration errors exit with 1") {
    CHECK(cli("").code == 1);
    CHECK(cli("frobnicate").code == 1);
    CHECK(cli("params --fusion middle").code == 1);
    CHECK(cli("params --profile huge").code == 1);
    CHECK(cli("train --epochs 0").code == 1);
    CHECK(cli("train --config /no/such/config.json").code == 2);
    CHECK(cli("eval --format yaml --fixture tableIV").code == 1);
    CHECK(cli("eval --model /no/such/run").code == 2);
    CHECK(cli("--help").code == 0);

    const fs::path d = scratch("config");
    std::ofstream(d / "bad.json") << R"({"fusion":"tt","epochz":3})";
    const Run r = cli("train --config \"" + (d / "bad.json").string() + "\"");
    CHECK(r.code == 1);
    CHECK(r.out.find("epochz") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("compare on the published table") {
    const Run r = cli("compare --fixture tableIV --model late");
    CHECK(r.code == 0);
    CHECK(r.out.find("mean delta +0.0434") != std::string::npos);
    CHECK(r.out.find("wilcoxon p 0.028") != std::string::npos);
    const Run csv = cli("compare --fixture tableIV --model early --format csv");
    CHECK(csv.code == 0);
    CHECK(csv.out.find("Neg V") != std::string::npos);
    CHECK(cli("compare --fixture tableIV --model middle").code == 1);

    const Run table = cli("eval --fixture tableIV --format csv");
    CHECK(table.code == 0);
    CHECK(table.out.rfind("model,task,Neg V", 0) == 0);
}

TEST_CASE("generate is deterministic") {
    const fs::path a = scratch("gen_a"), b = scratch("gen_b");
    const Run ra = cli("generate --n 20 --profile desk --seed 7 --out \"" + (a / "ds").string() + "\"");
    const Run rb = cli("generate --n 20 --profile desk --seed 7 --out \"" + (b / "ds").string() + "\"");
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    CHECK(ra.out == rb.out);
    CHECK(ra.out.find("clips 20") != std::string::npos);
    const std::string ma = slurp(a / "ds" / "manifest.jsonl");
    CHECK(ma == slurp(b / "ds" / "manifest.jsonl"));
    CHECK(std::count(ma.begin(), ma.end(), '\n') == 20);
    const auto ds = ttfuse::load_dataset((a / "ds" / "manifest.jsonl").string());
    CHECK(ds.originals.size() == 20);
    for (const auto& e : ds.manifest) CHECK(slurp(a / "ds" / e.file) == slurp(b / "ds" / e.file));

    // refuses to overwrite; n = 0 is fine
    CHECK(cli("generate --n 5 --out \"" + (a / "ds").string() + "\"").code == 1);
    const Run empty = cli("generate --n 0 --out \"" + (a / "empty").string() + "\"");
    CHECK(empty.code == 0);
    CHECK(slurp(a / "empty" / "manifest.jsonl").empty());
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("generated shares follow the default marginals") {
    const fs::path d = scratch("gen_share");
    const Run r = cli("generate --n 3000 --profile desk --seed 1 --out \"" + (d / "ds").string() + "\"");
    REQUIRE(r.code == 0);
    // Neg V share against its raw share, 246 / 7200
    const auto at = r.out.find("Neg V");
    REQUIRE(at != std::string::npos);
    std::istringstream is(r.out.substr(at + 5));
    std::size_t count;
    double share;
    is >> count >> share;
    CHECK(std::abs(share - 246.0 / 7200) < 0.02);
    fs::remove_all(d);
}

TEST_CASE("train, eval and compare a tiny run") {
    const fs::path d = scratch("train");
    const std::string common = "--profile desk --n 10 --epochs 1 --seed 5 --marginals uniform --test-fraction 0 ";
    const Run a = cli("train --fusion late --task joint " + common + "--out \"" + (d / "a").string() + "\"");
    REQUIRE(a.code == 0);
    CHECK(a.out.find("epoch 1") != std::string::npos);
    const Run b = cli("train --fusion late --task joint " + common + "--out \"" + (d / "b").string() + "\"");
    REQUIRE(b.code == 0);
    CHECK(slurp(d / "a" / "metrics.csv") == slurp(d / "b" / "metrics.csv"));
    std::string ca = slurp(d / "a" / "config.json"), cb = slurp(d / "b" / "config.json");
    ca.replace(ca.find((d / "a").string()), (d / "a").string().size(), (d / "b").string());
    CHECK(ca == cb);  // only the output directory differs
    // the run directory is not reused
    CHECK(cli("train --fusion late " + common + "--out \"" + (d / "a").string() + "\"").code == 1);

    const Run ev = cli("eval --model \"" + (d / "a").string() + "\" --n 10 --seed 5 --marginals uniform --format csv");
    CHECK(ev.code == 0);
    CHECK(ev.out.rfind("model,task,Neg V", 0) == 0);
    // the run validated on the same ten clips
    const auto scored = ttfuse::parse_csv(ev.out), logged = ttfuse::parse_csv(slurp(d / "a" / "report.csv"));
    REQUIRE(scored.size() == 1);
    REQUIRE(logged.size() == 1);
    REQUIRE(scored[0].classes.size() == 13);
    for (std::size_t c = 0; c < 13; ++c) CHECK(scored[0].classes[c].f1 == logged[0].classes[c].f1);

    const Run same = cli("compare --joint \"" + (d / "a").string() + "\" --single \"" + (d / "b").string() +
                         "\" --n 10 --seed 5 --marginals uniform");
    CHECK(same.code == 0);
    CHECK(same.out.find("mean delta +0.0000") != std::string::npos);
    CHECK(same.out.find("wilcoxon p 1") != std::string::npos);

    // a single-task pair merges into a full row
    const Run af = cli("train --fusion late --task affect " + common + "--out \"" + (d / "af").string() + "\"");
    const Run gm = cli("train --fusion late --task game " + common + "--out \"" + (d / "gm").string() + "\"");
    REQUIRE(af.code == 0);
    REQUIRE(gm.code == 0);
    CHECK(slurp(d / "gm" / "metrics.csv").find("f1_neg_v") == std::string::npos);
    const Run pair = cli("compare --joint \"" + (d / "a").string() + "\" --single \"" + (d / "af").string() +
                         "\" --single \"" + (d / "gm").string() + "\" --n 10 --seed 5 --marginals uniform --format csv");
    CHECK(pair.code == 0);
    CHECK(pair.out.find("Dead") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("gradcheck") {
    const Run r = cli("gradcheck --profile desk --seed 7 --configs 3 --skip-model");
    CHECK(r.code == 0);
    for (const char* layer : {"dense", "conv1d", "conv2d", "batchnorm", "residual", "lstm", "weighted_xent", "tt_layer"})
        CHECK(r.out.find(layer) != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
