#pragma once

#include <initializer_list>
#include <string>
#include <vector>

namespace han {

// Dense row-major matrix of 64-bit reals. The universal value carrier for
// the library; row vectors are 1xd matrices, column vectors dx1.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);  // zero-filled
    Matrix(int rows, int cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
    static Matrix full(int rows, int cols, double v);
    static Matrix identity(int n);
    static Matrix row_vector(const std::vector<double>& v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;
    std::string shape_str() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

bool operator==(const Matrix& a, const Matrix& b);

// Largest elementwise absolute difference; throws ShapeError on shape mismatch.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Throws NumericError naming `where` if any entry is NaN or Inf.
void check_finite(const Matrix& m, const char* where);

// Throws ShapeError unless the two shapes match.
void check_same_shape(const Matrix& a, const Matrix& b, const char* where);

}  // namespace han
