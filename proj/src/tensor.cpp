#include "volterra/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace volterra {

namespace {

size_t checked_size(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
        n *= static_cast<size_t>(d);
    }
    if (n > (1u << 20)) throw std::invalid_argument("tensor too large for desk scale");
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)) {
    if (checked_size(shape_) != data.size())
        throw std::invalid_argument("tensor data size does not match shape");
    data_ = std::move(data);
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data_.assign(1, v);
    return t;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.data_[static_cast<size_t>(i * n + i)] = 1.0;
    return t;
}

namespace {

size_t flat_index(const std::vector<int>& shape, std::initializer_list<int> idx) {
    if (idx.size() != shape.size()) throw std::invalid_argument("tensor index rank mismatch");
    size_t flat = 0;
    auto it = idx.begin();
    for (size_t k = 0; k < shape.size(); ++k, ++it) {
        if (*it < 0 || *it >= shape[k]) throw std::out_of_range("tensor index out of range");
        flat = flat * static_cast<size_t>(shape[k]) + static_cast<size_t>(*it);
    }
    return flat;
}

}  // namespace

double& Tensor::at(std::initializer_list<int> idx) { return data_[flat_index(shape_, idx)]; }

double Tensor::at(std::initializer_list<int> idx) const { return data_[flat_index(shape_, idx)]; }

Tensor& Tensor::operator+=(const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor shape mismatch in +=");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor shape mismatch in -=");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double c) {
    for (double& v : data_) v *= c;
    return *this;
}

void Tensor::axpy(double c, const Tensor& b) {
    if (!same_shape(b)) throw std::invalid_argument("tensor shape mismatch in axpy");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += c * b.data_[i];
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor outer(const Tensor& a, const Tensor& b) {
    std::vector<int> shape = a.shape();
    shape.insert(shape.end(), b.shape().begin(), b.shape().end());
    Tensor r(std::move(shape));
    const int nb = b.size();
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < nb; ++j) r[i * nb + j] = a[i] * b[j];
    return r;
}

Tensor apply(const Tensor& map, const Tensor& arg) {
    const int ra = arg.rank();
    const int rm = map.rank();
    if (rm < ra) throw std::invalid_argument("apply: map rank below argument rank");
    for (int k = 0; k < ra; ++k)
        if (map.shape()[static_cast<size_t>(rm - ra + k)] != arg.shape()[static_cast<size_t>(k)])
            throw std::invalid_argument("apply: trailing shape mismatch");
    std::vector<int> out_shape(map.shape().begin(), map.shape().begin() + (rm - ra));
    Tensor r(std::move(out_shape));
    const int nin = arg.size();
    for (int p = 0; p < r.size(); ++p) {
        double acc = 0.0;
        const double* row = map.data() + static_cast<size_t>(p) * static_cast<size_t>(nin);
        for (int q = 0; q < nin; ++q) acc += row[q] * arg[q];
        r[p] = acc;
    }
    return r;
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace volterra
