#include "ingredients/tensor.hpp"

#include <sstream>

namespace ingredients {

Index shape_size(const Shape& shape) {
    Index n = 1;
    for (Index d : shape) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_string(shape));
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(Eigen::VectorXd::Constant(shape_size(shape_), fill)) {}

Tensor::Tensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v[i++] = x;
    return Tensor(std::move(shape), std::move(v));
}

RowMatrixMap Tensor::matrix() {
    const Index rows = shape_.empty() ? 1 : shape_[0];
    return RowMatrixMap(data_.data(), rows, rows ? data_.size() / rows : 0);
}

ConstRowMatrixMap Tensor::matrix() const {
    const Index rows = shape_.empty() ? 1 : shape_[0];
    return ConstRowMatrixMap(data_.data(), rows, rows ? data_.size() / rows : 0);
}

Tensor Tensor::rows(Index first, Index count) const {
    if (shape_.empty() || first < 0 || count <= 0 || first + count > shape_[0])
        throw ShapeError("row slice out of range for shape " + shape_string(shape_));
    Shape s = shape_;
    s[0] = count;
    const Index stride = data_.size() / shape_[0];
    return Tensor(std::move(s), data_.segment(first * stride, count * stride));
}

Tensor Tensor::gather(const std::vector<Index>& indices) const {
    if (shape_.empty() || indices.empty()) throw ShapeError("gather on empty tensor or index list");
    Shape s = shape_;
    s[0] = static_cast<Index>(indices.size());
    const Index stride = data_.size() / shape_[0];
    Eigen::VectorXd out(s[0] * stride);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Index src = indices[r];
        if (src < 0 || src >= shape_[0]) throw ShapeError("gather index out of range");
        out.segment(static_cast<Index>(r) * stride, stride) = data_.segment(src * stride, stride);
    }
    return Tensor(std::move(s), std::move(out));
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
}

}  // namespace ingredients
