#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace volterra {

// Dense row-major tensor of small rank (0..4). Signature blocks, controlled-path
// coefficients and derivative tensors all live at desk scale (dims <= 8), so a flat
// vector plus explicit contraction loops beats any heavyweight linear-algebra type.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> shape);
    // Identity map on R^n, shape [n, n].
    static Tensor identity(int n);

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int size() const { return static_cast<int>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<size_t>(i)]; }
    double& at(std::initializer_list<int> idx);
    double at(std::initializer_list<int> idx) const;

    Tensor& operator+=(const Tensor& o);
    Tensor& operator-=(const Tensor& o);
    Tensor& operator*=(double c);
    friend Tensor operator+(Tensor a, const Tensor& b) { a += b; return a; }
    friend Tensor operator-(Tensor a, const Tensor& b) { a -= b; return a; }
    friend Tensor operator*(Tensor a, double c) { a *= c; return a; }
    friend Tensor operator*(double c, Tensor a) { a *= c; return a; }

    // a += c * b without temporaries; shapes must match.
    void axpy(double c, const Tensor& b);

    double max_abs() const;
    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Tensor product; result shape is the concatenation a.shape + b.shape.
Tensor outer(const Tensor& a, const Tensor& b);

// Applies a multilinear map to an argument block: map has shape [out..., in...],
// arg has shape [in...]; contracts every index of arg against the trailing indices
// of map. The result keeps shape [out...].
Tensor apply(const Tensor& map, const Tensor& arg);

// Full contraction of two tensors with identical shapes.
double dot(const Tensor& a, const Tensor& b);

// max_i |a_i - b_i| over flat entries; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace volterra
