#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttfuse/labels.hpp"

namespace ttfuse {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::size_t> counts;  // k x k

    explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    std::size_t total() const;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> truth, std::size_t k);

struct PRF1 {
    double precision = 0, recall = 0, f1 = 0;
};
// Zero denominators give 0 rather than NaN.
PRF1 prf1(const ConfusionMatrix& cm, std::size_t c);

struct ClassMetrics {
    Output output;
    std::size_t cls;
    double f1 = 0;
    std::optional<double> precision, recall;  // absent for published F1-only rows
    std::size_t support = 0;
};

struct MetricsReport {
    std::string model;  // e.g. "tt"
    std::string task;   // e.g. "joint", "single"
    std::size_t samples = 0;
    std::vector<ClassMetrics> classes;  // flat class order

    const ClassMetrics* find(Output o, std::size_t cls) const;
    void add_output(Output o, const ConfusionMatrix& cm);
};

// Combines disjoint outputs of two reports, e.g. the affect-only and the
// game-only runs that together form a "single" row.
MetricsReport merge_reports(const MetricsReport& a, const MetricsReport& b, std::string task);

enum class WilcoxonMode { Exact, Approx };

struct WilcoxonResult {
    double p = 1.0;
    double w_plus = 0, w_minus = 0;
    std::size_t n = 0;      // non-zero differences
    bool all_zero = false;  // every difference was zero; p is 1
};

// Two-sided signed-rank test on paired samples. Zero differences are
// dropped and tied magnitudes get average ranks. Exact mode enumerates the
// null distribution and needs n <= 25.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMode mode = WilcoxonMode::Exact);

struct PairedDelta {
    Output output;
    std::size_t cls;
    double joint, single, delta;
};

struct PairedDeltaReport {
    std::string model;
    std::vector<PairedDelta> deltas;
    double mean = 0;
    WilcoxonResult test;
};

PairedDeltaReport delta_report(const MetricsReport& joint, const MetricsReport& single);

enum class RandomScheme { Uniform, PriorMatched };
double expected_random_f1(double prior, std::size_t k, RandomScheme scheme);

// Published per-class F1 scores: early, late and tt, each joint then single.
std::vector<MetricsReport> table_iv_fixture();
extern const char* const kTableIvCsv;

// Table layout: model, task, then one column per class in flat order. Cells
// for missing classes are empty.
std::string render_csv(std::span<const MetricsReport> reports);
std::string render_text(std::span<const MetricsReport> reports);
std::string render_json(std::span<const MetricsReport> reports);
// F1-only reports. Throws FormatError on malformed input.
std::vector<MetricsReport> parse_csv(const std::string& text);

std::string render_delta_csv(const PairedDeltaReport& r);
std::string render_delta_text(const PairedDeltaReport& r);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace ttfuse
