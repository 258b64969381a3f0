#include <collabopt/csv.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace collabopt {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    double a = std::abs(v);
    auto fmt = (a < 1e-3 || a > 1e6) ? std::chars_format::scientific : std::chars_format::fixed;
    auto res = std::to_chars(buf, buf + sizeof buf, v, fmt);
    if (res.ec != std::errc{}) throw std::runtime_error("format_number: buffer too small");
    return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("rename to " + path.string() + " failed: " + ec.message());
    }
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw std::invalid_argument("csv row width does not match header");
    rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

std::string trace_csv(const Vec& test_loss, const Vec& grad_norm_sq) {
    if (test_loss.size() != grad_norm_sq.size()) throw std::invalid_argument("trace columns differ in length");
    std::string out = "step,test_loss,grad_norm_sq\n";
    out.reserve(test_loss.size() * 40);
    for (std::size_t t = 0; t < test_loss.size(); ++t) {
        out += std::to_string(t);
        out += ',';
        out += format_number(test_loss[t]);
        out += ',';
        out += format_number(grad_norm_sq[t]);
        out += '\n';
    }
    return out;
}

std::string trace_csv(const Trace& tr) { return trace_csv(tr.test_loss, tr.grad_norm_sq); }

CsvTable result_table() { return CsvTable({"label", "statistic", "mean", "se", "n"}); }

void append_result_rows(CsvTable& table, const std::string& label, const RunResult& r) {
    auto row = [&](const char* name, const Stat& s) {
        table.add_row({label, name, format_number(s.mean), s.se ? format_number(*s.se) : "", std::to_string(s.n)});
    };
    row("final_gap", r.final_gap);
    row("plateau_loss", r.plateau_loss);
    row("avg_grad_norm_sq", r.avg_grad_norm_sq);
}

}  // namespace collabopt
