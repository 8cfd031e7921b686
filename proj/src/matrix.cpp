#include "han/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "han/errors.hpp"

namespace han {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ShapeError("matrix dimensions must be nonnegative");
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != static_cast<size_t>(rows) * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str());
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = static_cast<int>(init.size());
    cols_ = rows_ == 0 ? 0 : static_cast<int>(init.begin()->size());
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : init) {
        if (static_cast<int>(r.size()) != cols_) throw ShapeError("ragged initializer for matrix");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::full(int rows, int cols, double v) {
    Matrix m(rows, cols);
    for (auto& x : m.data_) x = v;
    return m;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
    return Matrix(1, static_cast<int>(v.size()), v);
}

bool Matrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.values() == b.values();
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (size_t i = 0; i < a.values().size(); ++i) {
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    }
    return worst;
}

void check_finite(const Matrix& m, const char* where) {
    if (!m.all_finite()) throw NumericError(std::string(where) + ": non-finite value encountered");
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace han
