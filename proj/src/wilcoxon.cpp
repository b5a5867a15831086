#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ttfuse/eval.hpp"

namespace ttfuse {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, WilcoxonMode mode) {
    if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - y[i];
        if (!std::isfinite(v)) throw std::invalid_argument("wilcoxon: non-finite sample");
        if (v != 0.0) d.push_back(v);
    }
    WilcoxonResult r;
    r.n = d.size();
    if (d.empty()) {
        r.all_zero = true;
        return r;
    }
    const std::size_t n = d.size();
    if (mode == WilcoxonMode::Exact && n > 25) throw std::invalid_argument("wilcoxon: exact mode needs n <= 25");

    // Doubled average ranks stay integral under ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<std::size_t> rank2(n);
    double tie_term = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const std::size_t r2 = (i + 1) + (j + 1);  // 2 x mean of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    std::size_t wp2 = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (d[i] > 0) wp2 += rank2[i];
    }
    r.w_plus = wp2 / 2.0;
    r.w_minus = (total2 - wp2) / 2.0;

    if (mode == WilcoxonMode::Exact) {
        // Number of sign patterns reaching each doubled positive-rank sum.
        std::vector<double> ways(total2 + 1, 0.0);
        ways[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = total2; s >= rank2[i]; --s) {
                ways[s] += ways[s - rank2[i]];
                if (s == rank2[i]) break;
            }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double lower = 0, upper = 0;
        for (std::size_t s = 0; s <= total2; ++s) {
            if (s <= wp2) lower += ways[s];
            if (s >= wp2) upper += ways[s];
        }
        r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    } else {
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1) / 4.0;
        const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
        if (var <= 0) {
            r.p = 1.0;
        } else {
            const double z = (r.w_plus - mean) / std::sqrt(var);
            r.p = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
        }
    }
    return r;
}

}  // namespace ttfuse
