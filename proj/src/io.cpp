#include "glmresid/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glmresid {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        std::ostringstream msg;
        msg << "CSV cell at data row " << row + 1 << ", column " << col + 1 << " ('" << cell
            << "') is not numeric";
        throw std::invalid_argument(msg.str());
    }
    return v;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("CSV file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CsvTable table;
    table.header = split_csv_line(line);
    const std::size_t ncol = table.header.size();
    if (ncol == 0) throw std::invalid_argument("CSV header has no columns");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != ncol) {
            std::ostringstream msg;
            msg << "CSV data row " << rows.size() + 1 << " has " << cells.size()
                << " cells, expected " << ncol;
            throw std::invalid_argument(msg.str());
        }
        std::vector<double> row(ncol);
        for (std::size_t c = 0; c < ncol; ++c) row[c] = parse_cell(cells[c], rows.size(), c);
        rows.push_back(std::move(row));
    }
    table.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncol));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < ncol; ++c)
            table.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return table;
}

std::string format_double(double v, bool full_precision) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), full_precision ? "%.17g" : "%.4g", v);
    return buf;
}

}  // namespace glmresid
