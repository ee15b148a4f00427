#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcx::ag {

/// Operand shapes do not fit the primitive.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A structural parameter (group count, stride, ...) is invalid.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The caller broke the tape contract, e.g. asked for the gradient of an untracked value.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A primitive produced NaN or Inf.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles.
class Array {
public:
    Array() = default;

    explicit Array(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        check_extents();
        data_.assign(shape_size(shape_), fill);
    }

    Array(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
        check_extents();
        if (data_.size() != shape_size(shape_))
            throw DimensionError("Array: " + std::to_string(data_.size()) + " values do not fill shape " +
                                 shape_str(shape_));
    }

    static Array scalar(double v) { return Array(Shape{1}, std::vector<double>{v}); }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t i) const { return shape_.at(i); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t last() const { return shape_.back(); }

    [[nodiscard]] double* data() noexcept { return data_.data(); }
    [[nodiscard]] const double* data() const noexcept { return data_.data(); }
    [[nodiscard]] std::vector<double>& values() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    [[nodiscard]] double item() const {
        if (data_.size() != 1) throw DimensionError("Array::item on non-scalar " + shape_str(shape_));
        return data_[0];
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    Array& operator+=(const Array& o) {
        if (o.size() != size()) throw DimensionError("Array += size mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    [[nodiscard]] Array reshaped(Shape s) const {
        if (shape_size(s) != size())
            throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(s));
        return Array(std::move(s), data_);
    }

private:
    void check_extents() const {
        for (auto e : shape_)
            if (e == 0) throw DimensionError("Array: zero extent in shape " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

}  // namespace tcx::ag
