#include <numeric>
#include <stdexcept>

#include "ttfuse/eval.hpp"

namespace ttfuse {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> truth, std::size_t k) {
    if (preds.size() != truth.size()) throw std::invalid_argument("confusion: prediction and truth lengths differ");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] >= k || truth[i] >= k) throw std::invalid_argument("confusion: class index out of range");
        ++cm.counts[truth[i] * k + preds[i]];
    }
    return cm;
}

PRF1 prf1(const ConfusionMatrix& cm, std::size_t c) {
    if (c >= cm.k) throw std::invalid_argument("prf1: class index out of range");
    const double tp = static_cast<double>(cm.at(c, c));
    double fp = 0, fn = 0;
    for (std::size_t j = 0; j < cm.k; ++j) {
        if (j == c) continue;
        fp += static_cast<double>(cm.at(j, c));
        fn += static_cast<double>(cm.at(c, j));
    }
    PRF1 r;
    r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

const ClassMetrics* MetricsReport::find(Output o, std::size_t cls) const {
    for (const auto& c : classes)
        if (c.output == o && c.cls == cls) return &c;
    return nullptr;
}

void MetricsReport::add_output(Output o, const ConfusionMatrix& cm) {
    if (cm.k != class_count(o)) throw std::invalid_argument("report: confusion size does not match output");
    samples = std::max(samples, cm.total());
    for (std::size_t c = 0; c < cm.k; ++c) {
        const PRF1 m = prf1(cm, c);
        std::size_t support = 0;
        for (std::size_t j = 0; j < cm.k; ++j) support += cm.at(c, j);
        classes.push_back({o, c, m.f1, m.precision, m.recall, support});
    }
}

MetricsReport merge_reports(const MetricsReport& a, const MetricsReport& b, std::string task) {
    MetricsReport out;
    out.model = a.model;
    out.task = std::move(task);
    out.samples = std::max(a.samples, b.samples);
    for (Output o : kAllOutputs)
        for (std::size_t c = 0; c < class_count(o); ++c) {
            const ClassMetrics* x = a.find(o, c);
            const ClassMetrics* y = b.find(o, c);
            if (x && y) throw std::invalid_argument("merge_reports: both reports cover " + std::string(class_name(o, c)));
            if (x) out.classes.push_back(*x);
            if (y) out.classes.push_back(*y);
        }
    return out;
}

PairedDeltaReport delta_report(const MetricsReport& joint, const MetricsReport& single) {
    PairedDeltaReport r;
    r.model = joint.model;
    std::vector<double> xs, ys;
    for (Output o : kAllOutputs)
        for (std::size_t c = 0; c < class_count(o); ++c) {
            const ClassMetrics* j = joint.find(o, c);
            const ClassMetrics* s = single.find(o, c);
            if (!j != !s) throw std::invalid_argument("delta_report: class sets differ");
            if (!j) continue;
            r.deltas.push_back({o, c, j->f1, s->f1, j->f1 - s->f1});
            xs.push_back(j->f1);
            ys.push_back(s->f1);
        }
    if (r.deltas.empty()) throw std::invalid_argument("delta_report: no classes in common");
    double sum = 0;
    for (const auto& d : r.deltas) sum += d.delta;
    r.mean = sum / static_cast<double>(r.deltas.size());
    r.test = wilcoxon_signed_rank(xs, ys, xs.size() <= 25 ? WilcoxonMode::Exact : WilcoxonMode::Approx);
    return r;
}

double expected_random_f1(double prior, std::size_t k, RandomScheme scheme) {
    if (!(prior > 0.0 && prior < 1.0)) throw std::invalid_argument("expected_random_f1: prior must lie in (0, 1)");
    if (k < 2) throw std::invalid_argument("expected_random_f1: need at least two classes");
    if (scheme == RandomScheme::PriorMatched) return prior;
    // Uniform guessing: precision is the prior, recall 1/K.
    const double r = 1.0 / static_cast<double>(k);
    return 2.0 * prior * r / (prior + r);
}

}  // namespace ttfuse
