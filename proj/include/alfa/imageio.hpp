#pragma once

#include <string>
#include <vector>

#include "alfa/matrix.hpp"

namespace alfa {

// Locale-independent shortest round-trip formatting ('.' decimal point).
std::string format_double(double v);

// Atomic text write (temp file + rename). Lines must already contain their
// LF endings.
void write_text_atomic(const std::string& path, const std::string& content);

// One CSV line from cells; cells are joined with ',' and terminated by LF.
std::string csv_line(const std::vector<std::string>& cells);

// 8-bit binary PGM (P5). `scaled` expects values in [0, 1]; `normalized`
// min-max scales arbitrary values per image.
void write_pgm(const std::string& path, const Matrix& image);
void write_pgm_normalized(const std::string& path, const Matrix& values);
Matrix read_pgm(const std::string& path); // values scaled back to [0, 1]

// Raw values as CSV, one row per matrix row.
void write_matrix_csv(const std::string& path, const Matrix& values);

} // namespace alfa
