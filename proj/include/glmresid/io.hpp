#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace glmresid {

struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd data;
};

// Strict numeric CSV: comma separated, header row required, '.' decimal
// point. Ragged or non-numeric rows are errors.
CsvTable read_csv(const std::string& path);

// 17 significant digits in full precision mode, 4 otherwise.
std::string format_double(double v, bool full_precision);

}  // namespace glmresid
