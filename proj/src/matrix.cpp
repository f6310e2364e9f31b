#include "shad/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

namespace shad {

Matrix::Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw_shape_error("Matrix: negative dimension");
}

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw_shape_error("Matrix: negative dimension");
}

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != static_cast<size_t>(rows) * cols)
        throw_shape_error("Matrix: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Matrix::max_abs_diff(const Matrix& o) const {
    if (!same_shape(o)) throw_shape_error("max_abs_diff", *this, o);
    double m = 0.0;
    for (int i = 0; i < size(); ++i) m = std::max(m, std::fabs(data_[i] - o.data_[i]));
    return m;
}

void throw_shape_error(const std::string& op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

void throw_shape_error(const std::string& msg) { throw std::invalid_argument(msg); }

unsigned long long hash_bytes(const void* p, size_t n, unsigned long long seed) {
    const auto* b = static_cast<const unsigned char*>(p);
    unsigned long long h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
    }
    return h;
}

unsigned long long hash_matrix(const Matrix& m, unsigned long long seed) {
    unsigned long long h = hash_bytes(m.data(), sizeof(double) * m.size(), seed);
    int32_t dims[2] = {m.rows(), m.cols()};
    return hash_bytes(dims, sizeof(dims), h);
}

} // namespace shad
