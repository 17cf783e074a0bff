// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fairlora {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t numel() const noexcept { return rows * cols; }
    auto operator<=>(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Dense row-major matrix of doubles. Vectors are 1xN, scalars 1x1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
    explicit Tensor(Shape shape, double fill = 0.0) : Tensor(shape.rows, shape.cols, fill) {}

    static Tensor identity(std::size_t n);
    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return shape_.rows; }
    std::size_t cols() const noexcept { return shape_.cols; }
    std::size_t size() const noexcept { return data_.size(); }
    const Shape& shape() const noexcept { return shape_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double item() const;

    /// Same data, different shape with equal element count.
    Tensor reshaped(Shape shape) const;

    void fill(double v);
    bool all_finite() const noexcept;

    /// Bit-level equality of shape and values.
    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

namespace dense {

Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T * b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);
double frobenius_sq(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace dense

} // namespace fairlora
