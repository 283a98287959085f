#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "entroflow/control.hpp"
#include "entroflow/entropy.hpp"
#include "entroflow/fokker_planck.hpp"
#include "entroflow/iterate.hpp"
#include "entroflow/score.hpp"
#include "entroflow/sde.hpp"

namespace entroflow::io {

using Json = nlohmann::ordered_json;

/// Shortest-safe round-trip text for a double (17 significant digits).
std::string format_double(double v);

/// RFC-4180 writer: CRLF-free (\n) lines, fields quoted only when needed.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void header(const std::vector<std::string>& names);
    CsvWriter& field(std::string_view text);
    CsvWriter& field(double value);
    CsvWriter& field(long long value);
    CsvWriter& field(std::size_t value) { return field(static_cast<long long>(value)); }
    void end_row();

private:
    std::ostream& out_;
    bool first_ = true;
};

/// Parses RFC-4180 text into rows of fields (header row included).
std::vector<std::vector<std::string>> read_csv(std::istream& in);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

Json grid_to_json(const Grid& grid);
Grid grid_from_json(const Json& j);

/// Density field as CSV (t, x, p) plus a JSON header (grid, times).
void write_density(const DensityField& field, std::ostream& csv, Json& header);
DensityField read_density(std::istream& csv, const Json& header);

/// Score field as CSV (t, x, L, dL).
void write_score(const ScoreField& score, std::ostream& csv);

/// EntropyReport as CSV (t, H, I, tv, residual, pinsker_margin).
void write_entropy_report(const EntropyReport& report, std::ostream& csv);
Json entropy_report_json(const EntropyReport& report);

Json cost_report_json(const CostReport& report);
Json gap_report_json(const GapReport& report);
Json decomposition_json(const EntropicDecomposition& d);

/// Recorded times, per-time histograms on `bins`, and weight statistics.
Json ensemble_summary(const PathEnsemble& ensemble, const Grid& bins);
/// Full paths as CSV (particle, t, x, log_weight).
void write_paths(const PathEnsemble& ensemble, std::ostream& csv);

/// Trace as CSV (k, direction, H, tv, cost, se).
void write_trace(const IterationResult& result, std::ostream& csv);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace entroflow::io
