#pragma once

#include <collabopt/simulator.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace collabopt {

// Shortest round-trip text; scientific when |v| < 1e-3 or |v| > 1e6 (zero stays "0").
std::string format_number(double v);

// Writes to a sibling temp file, flushes, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::vector<std::string> cells);
    std::string str() const;
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// step,test_loss,grad_norm_sq
std::string trace_csv(const Vec& test_loss, const Vec& grad_norm_sq);
std::string trace_csv(const Trace& tr);

// label,statistic,mean,se,n ; statistics: final_gap, plateau_loss, avg_grad_norm_sq
void append_result_rows(CsvTable& table, const std::string& label, const RunResult& r);
CsvTable result_table();

}  // namespace collabopt
