#include "entroflow/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "entroflow/error.hpp"
#include "entroflow/parallel.hpp"

namespace entroflow::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

void CsvWriter::header(const std::vector<std::string>& names) {
    for (const auto& n : names) field(std::string_view(n));
    end_row();
}

CsvWriter& CsvWriter::field(std::string_view text) {
    if (!first_) out_ << ',';
    first_ = false;
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) {
        out_ << text;
        return *this;
    }
    out_ << '"';
    for (char c : text) {
        if (c == '"') out_ << '"';
        out_ << c;
    }
    out_ << '"';
    return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(std::string_view(format_double(value))); }

CsvWriter& CsvWriter::field(long long value) { return field(std::string_view(std::to_string(value))); }

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool any = false;
    char c = 0;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    cell += '"';
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get();
            row.push_back(std::move(cell));
            cell.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            cell += c;
        }
    }
    if (any) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json grid_to_json(const Grid& grid) {
    return Json{{"lower", grid.lower()}, {"upper", grid.upper()}, {"points", grid.size()}};
}

Grid grid_from_json(const Json& j) {
    return Grid(Interval{j.at("lower").get<double>(), j.at("upper").get<double>()}, j.at("points").get<std::size_t>());
}

void write_density(const DensityField& field, std::ostream& csv, Json& header) {
    header = Json::object();
    header["grid"] = grid_to_json(field.grid);
    header["times"] = field.times;
    CsvWriter w(csv);
    w.header({"t", "x", "p"});
    for (std::size_t k = 0; k < field.times.size(); ++k) {
        for (std::size_t i = 0; i < field.grid.size(); ++i) {
            w.field(field.times[k]).field(field.grid.node(i)).field(field.slices[k][i]);
            w.end_row();
        }
    }
}

DensityField read_density(std::istream& csv, const Json& header) {
    DensityField field;
    field.grid = grid_from_json(header.at("grid"));
    field.times = header.at("times").get<std::vector<double>>();
    const auto rows = read_csv(csv);
    const std::size_t n = field.grid.size();
    if (rows.empty() || rows.size() - 1 != n * field.times.size()) {
        throw ShapeError("density CSV row count does not match its header");
    }
    field.slices.assign(field.times.size(), std::vector<double>(n));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::size_t k = (r - 1) / n;
        const std::size_t i = (r - 1) % n;
        field.slices[k][i] = std::stod(rows[r].at(2));
    }
    return field;
}

void write_score(const ScoreField& score, std::ostream& csv) {
    CsvWriter w(csv);
    w.header({"t", "x", "L", "dL"});
    for (std::size_t k = 0; k < score.times().size(); ++k) {
        const auto l = score.log_ratio(k);
        const auto g = score.score(k);
        for (std::size_t i = 0; i < score.grid().size(); ++i) {
            w.field(score.times()[k]).field(score.grid().node(i)).field(l[i]).field(g[i]);
            w.end_row();
        }
    }
}

void write_entropy_report(const EntropyReport& report, std::ostream& csv) {
    CsvWriter w(csv);
    w.header({"t", "H", "I", "tv", "residual", "pinsker_margin"});
    for (std::size_t k = 0; k < report.times.size(); ++k) {
        w.field(report.times[k])
            .field(report.entropy[k])
            .field(report.fisher[k])
            .field(report.tv[k])
            .field(report.residual[k])
            .field(report.pinsker_margin[k]);
        w.end_row();
    }
}

namespace {
Json number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}
}  // namespace

Json entropy_report_json(const EntropyReport& report) {
    return Json{{"points", report.times.size()},
                {"t_first", report.times.empty() ? 0.0 : report.times.front()},
                {"t_last", report.times.empty() ? 0.0 : report.times.back()},
                {"max_relative_residual", number(report.max_relative_residual())},
                {"integral_lhs", report.integral_lhs},
                {"integral_rhs", report.integral_rhs},
                {"integral_relative_error", report.integral_relative_error()},
                {"min_pinsker_margin", number(report.min_pinsker_margin())},
                {"max_entropy_increase", number(report.max_entropy_increase())},
                {"max_floored_fraction", report.max_floored_fraction},
                {"units", "nats"}};
}

Json cost_report_json(const CostReport& r) {
    return Json{{"policy", r.policy},
                {"terminal_term", r.terminal_term},
                {"energy_term", r.energy_term},
                {"total", r.total},
                {"std_error", r.std_error},
                {"reference_entropy", r.reference_entropy},
                {"gap", r.gap},
                {"clip_rate", r.clip_rate},
                {"clip_flagged", r.clip_flagged},
                {"terminal_sensitivity", r.terminal_sensitivity},
                {"particles", r.particles}};
}

Json gap_report_json(const GapReport& g) {
    return Json{{"measured", g.measured},
                {"measured_se", g.measured_se},
                {"predicted", g.predicted},
                {"predicted_se", g.predicted_se},
                {"combined_se", g.combined_se()}};
}

Json decomposition_json(const EntropicDecomposition& d) {
    return Json{{"total", d.total},
                {"path_entropy", d.path_entropy},
                {"endpoint_entropy", d.endpoint_entropy},
                {"H_term", d.h_term},
                {"D_term", d.d_term}};
}

Json ensemble_summary(const PathEnsemble& ensemble, const Grid& bins) {
    Json j;
    j["particles"] = ensemble.particles;
    j["seed"] = ensemble.seed;
    j["direction"] = ensemble.direction == Direction::forward ? "forward" : "reversed";
    j["policy"] = ensemble.policy_label;
    j["horizon"] = ensemble.horizon;
    j["dt"] = ensemble.dt;
    j["times"] = ensemble.times;
    j["bins"] = grid_to_json(bins);
    Json hists = Json::array();
    for (double t : ensemble.times) hists.push_back(empirical_marginal(ensemble, t, bins).mass);
    j["histograms"] = std::move(hists);
    const auto lw = ensemble.final_log_weights();
    std::vector<double> w(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) w[i] = std::exp(lw[i]);
    const MeanEstimate est = estimate_mean(w);
    double sum = 0.0, sum_sq = 0.0;
    for (double v : w) {
        sum += v;
        sum_sq += v * v;
    }
    j["weights"] = Json{{"mean", est.mean},
                        {"std_error", est.std_error},
                        {"effective_sample_size", sum_sq > 0.0 ? sum * sum / sum_sq : 0.0}};
    j["clip_rate"] = ensemble.clip_rate();
    return j;
}

void write_paths(const PathEnsemble& ensemble, std::ostream& csv) {
    CsvWriter w(csv);
    w.header({"particle", "t", "x", "log_weight"});
    for (std::size_t i = 0; i < ensemble.particles; ++i) {
        for (std::size_t k = 0; k < ensemble.times.size(); ++k) {
            const std::size_t at = k * ensemble.particles + i;
            w.field(i).field(ensemble.times[k]).field(ensemble.states[at]).field(ensemble.log_weight[at]);
            w.end_row();
        }
    }
}

void write_trace(const IterationResult& result, std::ostream& csv) {
    CsvWriter w(csv);
    w.header({"k", "direction", "H", "tv", "cost", "se"});
    for (const auto& s : result.stages) {
        w.field(s.stage).field(std::string_view(s.direction)).field(s.entropy).field(s.tv);
        if (s.cost) {
            w.field(*s.cost).field(*s.cost_se);
        } else {
            w.field(std::string_view("")).field(std::string_view(""));
        }
        w.end_row();
    }
}

std::string sha256_file(const std::filesystem::path& path) {
    const std::string bytes = read_text(path);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw Error("SHA-256 failed for " + path.string());
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex += kHex[digest[i] >> 4];
        hex += kHex[digest[i] & 0xF];
    }
    return hex;
}

}  // namespace entroflow::io
