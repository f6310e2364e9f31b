#pragma once

// Dense row-major matrix of doubles. The only numeric container in the
// library; vectors are 1xN or Nx1 matrices.

#include <cstddef>
#include <string>
#include <vector>

namespace shad {

class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);
    Matrix(int rows, int cols, double fill);
    Matrix(int rows, int cols, std::vector<double> data);

    static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
    static Matrix ones(int rows, int cols) { return Matrix(rows, cols, 1.0); }
    static Matrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool empty() const { return size() == 0; }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double& at_flat(int i) { return data_[static_cast<size_t>(i)]; }
    double at_flat(int i) const { return data_[static_cast<size_t>(i)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

    void fill(double v);
    void set_zero() { fill(0.0); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;

    bool all_finite() const;
    double max_abs_diff(const Matrix& o) const;

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Thrown on any shape mismatch; the message names both shapes.
[[noreturn]] void throw_shape_error(const std::string& op, const Matrix& a, const Matrix& b);
[[noreturn]] void throw_shape_error(const std::string& msg);

// FNV-1a over the raw bytes. Used by tests and the frozen-parameter checks.
unsigned long long hash_bytes(const void* p, size_t n, unsigned long long seed = 1469598103934665603ull);
unsigned long long hash_matrix(const Matrix& m, unsigned long long seed = 1469598103934665603ull);

} // namespace shad
