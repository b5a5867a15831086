#include <charconv>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "ttfuse/errors.hpp"
#include "ttfuse/eval.hpp"

namespace ttfuse {

// Kept byte-identical to data/table_iv_v1.csv.
const char* const kTableIvCsv =
    "model,task,Neg V,Neut V,Pos V,Neut A,Pos A,In Lane,Shopping,Returning,Roaming,Fighting,Pushing,Defending,Dead\n"
    "early,joint,0.194,0.911,0.362,0.969,0.509,0.778,0.797,0.496,0.667,0.515,0.568,0.544,0.899\n"
    "early,single,0.206,0.905,0.345,0.966,0.540,0.842,0.724,0.591,0.794,0.565,0.610,0.667,0.924\n"
    "late,joint,0.286,0.925,0.297,0.964,0.465,0.840,0.828,0.615,0.805,0.635,0.652,0.557,0.906\n"
    "late,single,0.088,0.918,0.340,0.968,0.491,0.791,0.776,0.513,0.774,0.581,0.582,0.452,0.937\n"
    "tt,joint,0.102,0.926,0.325,0.971,0.476,0.848,0.765,0.580,0.791,0.630,0.635,0.574,0.930\n"
    "tt,single,0.135,0.928,0.315,0.969,0.537,0.837,0.777,0.518,0.819,0.557,0.405,0.473,0.948\n";

std::vector<MetricsReport> table_iv_fixture() { return parse_csv(kTableIvCsv); }

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

struct Column {
    Output output;
    std::size_t cls;
};

std::vector<Column> all_columns() {
    std::vector<Column> cols;
    for (Output o : kAllOutputs)
        for (std::size_t c = 0; c < class_count(o); ++c) cols.push_back({o, c});
    return cols;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

std::string render_csv(std::span<const MetricsReport> reports) {
    std::ostringstream os;
    os << "model,task";
    const auto cols = all_columns();
    for (const auto& c : cols) os << ',' << class_name(c.output, c.cls);
    os << '\n';
    for (const auto& r : reports) {
        os << r.model << ',' << r.task;
        for (const auto& c : cols) {
            os << ',';
            if (const ClassMetrics* m = r.find(c.output, c.cls)) os << format_double(m->f1);
        }
        os << '\n';
    }
    return os.str();
}

std::string render_text(std::span<const MetricsReport> reports) {
    const auto cols = all_columns();
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-8s %-7s", "Model", "Task");
    os << buf;
    for (const auto& c : cols) {
        std::snprintf(buf, sizeof buf, " %9.9s", std::string(class_name(c.output, c.cls)).c_str());
        os << buf;
    }
    os << '\n';
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-8s %-7s", r.model.c_str(), r.task.c_str());
        os << buf;
        for (const auto& c : cols) {
            if (const ClassMetrics* m = r.find(c.output, c.cls))
                std::snprintf(buf, sizeof buf, " %9.3f", m->f1);
            else
                std::snprintf(buf, sizeof buf, " %9s", "-");
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string render_json(std::span<const MetricsReport> reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json classes = nlohmann::json::array();
        for (const auto& c : r.classes) {
            nlohmann::json j{{"output", output_name(c.output)},
                             {"class", class_name(c.output, c.cls)},
                             {"f1", c.f1},
                             {"support", c.support}};
            if (c.precision) j["precision"] = *c.precision;
            if (c.recall) j["recall"] = *c.recall;
            classes.push_back(std::move(j));
        }
        arr.push_back({{"model", r.model}, {"task", r.task}, {"samples", r.samples}, {"classes", std::move(classes)}});
    }
    return arr.dump(2) + "\n";
}

std::vector<MetricsReport> parse_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("report csv: missing header");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "model" || header[1] != "task")
        throw FormatError("report csv: header must start with model,task");
    std::vector<Column> cols;
    for (std::size_t i = 2; i < header.size(); ++i) {
        bool found = false;
        for (const auto& c : all_columns())
            if (class_name(c.output, c.cls) == header[i]) {
                cols.push_back(c);
                found = true;
            }
        if (!found) throw FormatError("report csv: unknown column '" + header[i] + "'");
    }
    std::vector<MetricsReport> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw FormatError("report csv line " + std::to_string(lineno) + ": wrong number of cells");
        MetricsReport r;
        r.model = cells[0];
        r.task = cells[1];
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const std::string& cell = cells[i + 2];
            if (cell.empty()) continue;
            double v = 0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !(v >= 0.0 && v <= 1.0))
                throw FormatError("report csv line " + std::to_string(lineno) + ": bad value '" + cell + "'");
            r.classes.push_back({cols[i].output, cols[i].cls, v, std::nullopt, std::nullopt, 0});
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string render_delta_csv(const PairedDeltaReport& r) {
    std::ostringstream os;
    os << "class,joint,single,delta\n";
    for (const auto& d : r.deltas)
        os << class_name(d.output, d.cls) << ',' << format_double(d.joint) << ',' << format_double(d.single) << ','
           << format_double(d.delta) << '\n';
    os << "mean,,," << format_double(r.mean) << '\n';
    os << "wilcoxon_p,,," << format_double(r.test.p) << '\n';
    return os.str();
}

std::string render_delta_text(const PairedDeltaReport& r) {
    std::ostringstream os;
    char buf[128];
    os << "model: " << r.model << '\n';
    for (const auto& d : r.deltas) {
        std::snprintf(buf, sizeof buf, "  %-10s joint %.3f  single %.3f  delta %+.3f\n",
                      std::string(class_name(d.output, d.cls)).c_str(), d.joint, d.single, d.delta);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "mean delta %+.4f  wilcoxon p %.4f (n=%zu%s)\n", r.mean, r.test.p, r.test.n,
                  r.test.all_zero ? ", all differences zero" : "");
    os << buf;
    return os.str();
}

}  // namespace ttfuse
