#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ttfuse/data.hpp"
#include "ttfuse/eval.hpp"
#include "ttfuse/model.hpp"

namespace ttfuse {

struct RunConfig {
    std::string fusion = "tt";
    std::string task = "joint";
    std::string profile = "desk";

    double lr = 0.0005;
    std::size_t epochs = 100;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;

    // Manifest path; empty means generate synth_n clips in memory.
    std::string data;
    std::size_t synth_n = 64;
    std::string marginals = "table_i";  // "table_i", "uniform" or a JSON file
    double test_fraction = 0.2;         // 0 validates on the training originals
    bool oversample = true;
    double stop_at_f1 = 0.0;  // stop once every head's macro F1 reaches this; 0 disables

    std::string out;

    ModelSpec model_spec() const;
    Marginals load_marginals() const;
    // Throws std::invalid_argument describing the first bad field.
    void validate() const;

    std::string to_json() const;
    // Unknown keys are rejected so typos do not silently fall back to defaults.
    static RunConfig from_json(const std::string& text);
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct EpochLog {
    std::size_t epoch = 0;
    double loss_total = 0;
    std::vector<double> head_loss;  // per model output
    std::vector<double> f1;         // per class of every output, flat order
};

struct RunResult {
    std::vector<EpochLog> log;
    MetricsReport report;  // validation metrics after the last epoch
    std::unique_ptr<FusionModel> model;
    std::size_t train_size = 0, validation_size = 0;
};

// Macro F1 over classes with support, per output in model order.
std::vector<double> head_f1(const MetricsReport& report, const std::vector<Output>& outputs);

std::string metrics_csv_header(const std::vector<Output>& outputs);
std::string metrics_csv_row(const EpochLog& row);

RunResult run_training(const RunConfig& config, std::ostream* progress = nullptr);

// Writes config.json, metrics.csv, report.csv, report.json and
// checkpoint.ttfz. Refuses to reuse a directory that already holds a run.
void write_run(const std::string& dir, const RunConfig& config, RunResult& result);

// Scores a model on a data set the same way training validates.
MetricsReport evaluate(FusionModel& model, const std::vector<ClipRecord>& clips, std::size_t batch_size = 8);

}  // namespace ttfuse
