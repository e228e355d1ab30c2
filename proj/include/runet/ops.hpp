#pragma once

#include "runet/tensor.hpp"

namespace runet {

enum class BinaryOp { Add, Sub, Mul };

/// Elementwise a (op) b. `b` either has a's shape or is a per-channel vector
/// of extent a.dim(1), broadcast over every other axis.
template <typename T>
BasicTensor<T> elementwise(BinaryOp op, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(BinaryOp::Add, a, b);
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(BinaryOp::Sub, a, b);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return elementwise(BinaryOp::Mul, a, b);
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

/// (M,K) x (K,N) -> (M,N).
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

/// Softmax across axis 1 of an N x C x H x W tensor (C >= 2), per position.
template <typename T>
BasicTensor<T> softmax_channel(const BasicTensor<T>& x);

/// Scalar sum of all elements (shape (1)).
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

/// Same data, new shape of equal element count.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape);

}  // namespace runet
