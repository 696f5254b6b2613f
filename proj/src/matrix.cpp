#include "alfa/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "alfa/errors.hpp"

namespace alfa {

Matrix::Matrix(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != static_cast<size_t>(r) * c) {
        throw ShapeError("value count " + std::to_string(data.size()) + " does not fill " + shape_str());
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows = static_cast<int>(init.size());
    cols = rows > 0 ? static_cast<int>(init.begin()->size()) : 0;
    data.reserve(static_cast<size_t>(rows) * cols);
    for (const auto& row : init) {
        if (static_cast<int>(row.size()) != cols) {
            throw ShapeError("ragged initializer list");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
}

std::string Matrix::shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool same_shape(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul " + a.shape_str() + " x " + b.shape_str());
    }
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        double* orow = &out.data[static_cast<size_t>(i) * out.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            out(j, i) = m(i, j);
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!same_shape(a, b)) {
        throw ShapeError("add " + a.shape_str() + " + " + b.shape_str());
    }
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!same_shape(a, b)) {
        throw ShapeError("sub " + a.shape_str() + " - " + b.shape_str());
    }
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Matrix scale(const Matrix& m, double c) {
    Matrix out = m;
    for (double& v : out.data) v *= c;
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        const double* row = &m.data[static_cast<size_t>(i) * m.cols];
        double* orow = &out.data[static_cast<size_t>(i) * m.cols];
        double mx = row[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < m.cols; ++j) orow[j] /= sum;
    }
    return out;
}

Matrix outer(const std::vector<double>& col, const std::vector<double>& row) {
    Matrix out(static_cast<int>(col.size()), static_cast<int>(row.size()));
    for (size_t i = 0; i < col.size(); ++i) {
        for (size_t j = 0; j < row.size(); ++j) {
            out.data[i * row.size() + j] = col[i] * row[j];
        }
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Matrix& m) {
    double mx = 0.0;
    for (double v : m.data) mx = std::max(mx, std::abs(v));
    return mx;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!same_shape(a, b)) {
        throw ShapeError("max_abs_diff " + a.shape_str() + " vs " + b.shape_str());
    }
    double mx = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
    return mx;
}

bool all_finite(const Matrix& m) {
    for (double v : m.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool all_zero(const Matrix& m) {
    for (double v : m.data) {
        if (v != 0.0) return false;
    }
    return true;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (!same_shape(a, b)) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

} // namespace alfa
