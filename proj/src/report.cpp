#include "memcom/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "memcom/config_file.hpp"
#include "memcom/error.hpp"

namespace memcom {
namespace {

std::string g6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string f6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

// Free text must not break the column layout.
std::string clean(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ' ');
    return s;
}

}  // namespace

std::string format_row(const RunReport& r) {
    std::ostringstream os;
    os << clean(r.scheme) << ',' << clean(r.kind_params) << ',' << r.m << ',' << r.e << ',' << r.h << ',' << r.seed
       << ',' << r.total_params << ',' << r.embedding_params << ',' << g6(r.compression_ratio) << ','
       << clean(r.metric) << ',' << g6(r.metric_value) << ',' << f6(r.relative_loss_pct) << ',' << g6(r.wall_s);
    return os.str();
}

void emit_report(std::ostream& out, std::vector<RunReport> reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const RunReport& a, const RunReport& b) {
        if (a.scheme != b.scheme) return a.scheme < b.scheme;
        if (a.compression_ratio != b.compression_ratio) return a.compression_ratio < b.compression_ratio;
        return a.seed < b.seed;
    });
    out << kReportHeader << '\n';
    for (const auto& r : reports) out << format_row(r) << '\n';
    if (!out) throw IoError("failed writing report");
}

void emit_report(const std::filesystem::path& path, const std::vector<RunReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    emit_report(out, reports);
}

std::vector<RunReport> parse_report(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) throw IoError("report header missing or unexpected");
    std::vector<RunReport> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 13) throw IoError("report line " + std::to_string(lineno) + ": expected 13 columns");
        RunReport r;
        r.scheme = f[0];
        r.kind_params = f[1];
        r.m = parse_uint(f[2], "m");
        r.e = parse_uint(f[3], "e");
        r.h = parse_uint(f[4], "h");
        r.seed = parse_uint(f[5], "seed");
        r.total_params = parse_uint(f[6], "total_params");
        r.embedding_params = parse_uint(f[7], "embedding_params");
        r.compression_ratio = parse_double(f[8], "compression_ratio");
        r.metric = f[9];
        r.metric_value = parse_double(f[10], "metric_value");
        r.relative_loss_pct = parse_double(f[11], "relative_loss_pct");
        r.wall_s = parse_double(f[12], "wall_s");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<RunReport> parse_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_report(in);
}

}  // namespace memcom
