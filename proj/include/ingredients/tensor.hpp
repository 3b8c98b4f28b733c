#ifndef INGREDIENTS_TENSOR_HPP
#define INGREDIENTS_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ingredients {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major n-dimensional array of doubles. The leading dimension is
/// the batch dimension everywhere in the layer code.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, Eigen::VectorXd data);

    static Tensor from_values(Shape shape, std::initializer_list<double> values);

    const Shape& shape() const { return shape_; }
    Index dim(std::size_t axis) const { return shape_.at(axis); }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index size() const { return data_.size(); }

    Eigen::VectorXd& values() { return data_; }
    const Eigen::VectorXd& values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](Index i) { return data_[i]; }
    double operator[](Index i) const { return data_[i]; }

    /// View as (dim(0), size / dim(0)).
    RowMatrixMap matrix();
    ConstRowMatrixMap matrix() const;

    /// Slice of `count` leading-dimension entries starting at `first`.
    Tensor rows(Index first, Index count) const;
    /// Gathers leading-dimension entries in the given order.
    Tensor gather(const std::vector<Index>& indices) const;

    /// Same data, new shape. Throws ShapeError when element counts differ.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const { return data_.allFinite(); }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    Eigen::VectorXd data_;
};

}  // namespace ingredients

#endif  // INGREDIENTS_TENSOR_HPP
