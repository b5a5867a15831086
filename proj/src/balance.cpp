#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ttfuse/data.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {

Manifest filter_misc(const Manifest& data) {
    Manifest out;
    out.reserve(data.size());
    for (const auto& e : data)
        if (e.labels.context != Context::Miscellaneous) out.push_back(e);
    return out;
}

Split split(const Manifest& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    // round half up
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 0.5));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    std::vector<char> in_test(n, 0);
    for (std::size_t i = 0; i < k; ++i) in_test[idx[i]] = 1;
    Split s;
    s.test.reserve(k);
    s.train.reserve(n - k);
    for (std::size_t i = 0; i < n; ++i) (in_test[i] ? s.test : s.train).push_back(data[i]);
    return s;
}

double rep_weight(double class_count, double total, std::size_t n_classes) {
    if (!(total > 0.0)) throw std::invalid_argument("rep_weight: total must be positive");
    if (n_classes < 2) throw std::invalid_argument("rep_weight: need at least two classes");
    if (class_count < 0.0) throw std::invalid_argument("rep_weight: negative class count");
    return class_count / (total * static_cast<double>(n_classes));
}

void LabelCounts::add(const Labels& l) {
    ++total;
    ++counts[0][static_cast<std::size_t>(l.valence)];
    ++counts[1][static_cast<std::size_t>(l.arousal)];
    if (l.context != Context::Miscellaneous) ++counts[2][static_cast<std::size_t>(l.context)];
}

double LabelCounts::share(Output o, std::size_t cls) const {
    const auto& c = of(o);
    const double sum = static_cast<double>(std::accumulate(c.begin(), c.end(), std::size_t{0}));
    return sum > 0 ? static_cast<double>(c.at(cls)) / sum : 0.0;
}

LabelCounts count_labels(const Manifest& data) {
    LabelCounts c;
    for (const auto& e : data) c.add(e.labels);
    return c;
}

namespace {

// Least and most represented classes; strict comparisons keep the first
// class in (valence, arousal, context) x class-index order on ties.
std::pair<ClassRef, ClassRef> extremes(const LabelCounts& counts) {
    ClassRef lo{Output::Valence, 0}, hi{Output::Valence, 0};
    double wlo = INFINITY, whi = -INFINITY;
    for (Output o : kAllOutputs) {
        const auto& c = counts.of(o);
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double w = rep_weight(static_cast<double>(c[k]), static_cast<double>(counts.total), c.size());
            if (w < wlo) {
                wlo = w;
                lo = {o, k};
            }
            if (w > whi) {
                whi = w;
                hi = {o, k};
            }
        }
    }
    return {lo, hi};
}

bool in_class(const Labels& l, ClassRef c) {
    if (c.output == Output::Context && l.context == Context::Miscellaneous) return false;
    return l.index(c.output) == c.cls;
}

}  // namespace

OversampleResult oversample(const Manifest& train, std::size_t threshold, std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("oversample: empty training set");
    OversampleResult r;
    r.data = train;
    r.data.reserve(train.size() + threshold);
    LabelCounts counts = count_labels(train);
    Rng rng(seed);
    std::vector<std::size_t> candidates;
    while (r.trace.size() < threshold) {
        const auto [least, most] = extremes(counts);
        candidates.clear();
        for (std::size_t i = 0; i < r.data.size(); ++i) {
            const Labels& l = r.data[i].labels;
            if (in_class(l, least) && !in_class(l, most)) candidates.push_back(i);
        }
        if (candidates.empty()) {
            r.exhausted = true;
            break;
        }
        const std::size_t pick = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
        ManifestEntry clone = r.data[pick];
        clone.origin = Origin::Clone;
        counts.add(clone.labels);
        r.data.push_back(std::move(clone));
        r.trace.push_back({pick, least, most});
    }
    return r;
}

std::vector<double> class_weights(std::span<const std::size_t> counts, std::size_t total) {
    if (counts.empty()) throw std::invalid_argument("class_weights: no classes");
    if (total == 0) throw std::invalid_argument("class_weights: total must be positive");
    const double k = static_cast<double>(counts.size());
    std::vector<double> w(counts.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0)
            throw std::invalid_argument("class_weights: class " + std::to_string(i) +
                                        " has no samples; drop or smooth it first");
        w[i] = static_cast<double>(total) / (static_cast<double>(counts[i]) * k);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

}  // namespace ttfuse
