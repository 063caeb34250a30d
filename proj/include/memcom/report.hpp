#pragma once
// Sweep result rows and their CSV form.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace memcom {

inline constexpr const char* kReportHeader =
    "scheme,kind_params,m,e,h,seed,total_params,embedding_params,compression_ratio,metric,metric_value,"
    "relative_loss_pct,wall_s";

struct RunReport {
    std::string scheme;       // kind name
    std::string kind_params;  // kind-specific settings, `;`-separated
    std::size_t m = 0;
    std::size_t e = 0;
    std::size_t h = 0;
    std::uint64_t seed = 0;
    std::size_t total_params = 0;
    std::size_t embedding_params = 0;
    double compression_ratio = 0.0;  // baseline total / this total
    std::string metric;              // accuracy, ndcg, or error
    double metric_value = 0.0;
    double relative_loss_pct = 0.0;  // 100 * (baseline - value) / baseline
    double wall_s = 0.0;
};

/// Rows sorted by (scheme, compression_ratio, seed); floats at 6 significant
/// digits, relative loss at 6 decimals.
void emit_report(std::ostream& out, std::vector<RunReport> reports);
void emit_report(const std::filesystem::path& path, const std::vector<RunReport>& reports);

std::vector<RunReport> parse_report(std::istream& in);
std::vector<RunReport> parse_report(const std::filesystem::path& path);

/// One CSV row, without the trailing newline.
std::string format_row(const RunReport& r);

}  // namespace memcom
