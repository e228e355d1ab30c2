#include "runet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace runet {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

namespace {

const char* op_tag(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add:
            return "add";
        case BinaryOp::Sub:
            return "sub";
        case BinaryOp::Mul:
            return "mul";
    }
    return "?";
}

}  // namespace

template <typename T>
BasicTensor<T> elementwise(BinaryOp op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    const bool same = a.shape() == b.shape();
    const bool per_channel = !same && b.rank() == 1 && a.rank() >= 2 && b.dim(0) == a.dim(1);
    if (!same && !per_channel)
        throw ShapeError(std::string(op_tag(op)) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));

    // Every element i of a pairs with b[channel_of(i)] when broadcasting.
    const std::size_t n = a.numel();
    const std::size_t channels = per_channel ? a.dim(1) : 1;
    const std::size_t inner = per_channel ? n / (a.dim(0) * channels) : 1;
    auto b_index = [=](std::size_t i) { return per_channel ? (i / inner) % channels : i; };

    auto out = detail::make_output<T>(a.shape());
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T bv = bd[b_index(i)];
        switch (op) {
            case BinaryOp::Add:
                od[i] = ad[i] + bv;
                break;
            case BinaryOp::Sub:
                od[i] = ad[i] - bv;
                break;
            case BinaryOp::Mul:
                od[i] = ad[i] * bv;
                break;
        }
    }

    auto ai = a.handle();
    auto bi = b.handle();
    detail::attach<T>(op_tag(op), {&a, &b}, out, [=](const std::vector<T>& g) {
        if (ai->requires_grad) {
            for (std::size_t i = 0; i < n; ++i) ai->grad[i] += op == BinaryOp::Mul ? g[i] * bi->data[b_index(i)] : g[i];
        }
        if (bi->requires_grad) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = b_index(i);
                switch (op) {
                    case BinaryOp::Add:
                        bi->grad[j] += g[i];
                        break;
                    case BinaryOp::Sub:
                        bi->grad[j] -= g[i];
                        break;
                    case BinaryOp::Mul:
                        bi->grad[j] += g[i] * ai->data[i];
                        break;
                }
            }
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
    auto out = detail::make_output<T>(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] * factor;
    auto xi = x.handle();
    detail::attach<T>("scale", {&x}, out, [=](const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i] * factor;
    });
    return out;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: extent mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    auto out = detail::make_output<T>({a.dim(0), b.dim(1)});
    MatMap<T>(out.data().data(), m, n).noalias() =
        ConstMatMap<T>(a.data().data(), m, k) * ConstMatMap<T>(b.data().data(), k, n);

    auto ai = a.handle();
    auto bi = b.handle();
    detail::attach<T>("matmul", {&a, &b}, out, [=](const std::vector<T>& g) {
        ConstMatMap<T> gm(g.data(), m, n);
        if (ai->requires_grad) {
            RowMat<T> ga = gm * ConstMatMap<T>(bi->data.data(), k, n).transpose();
            MatMap<T>(ai->grad.data(), m, k) += ga;
        }
        if (bi->requires_grad) {
            RowMat<T> gb = ConstMatMap<T>(ai->data.data(), m, k).transpose() * gm;
            MatMap<T>(bi->grad.data(), k, n) += gb;
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    auto out = detail::make_output<T>(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] > T(0) ? xd[i] : T(0);
    if (auto* fp = detail::branch_fingerprint()) {
        std::uint64_t word = 0;
        for (std::size_t i = 0; i < xd.size(); ++i) {
            word = (word << 1) | (xd[i] > T(0) ? 1u : 0u);
            if (i % 64 == 63 || i + 1 == xd.size()) fp->mix(word);
        }
    }
    auto xi = x.handle();
    detail::attach<T>("relu", {&x}, out, [=](const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xi->data[i] > T(0)) xi->grad[i] += g[i];
    });
    return out;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    auto out = detail::make_output<T>(x.shape());
    auto xd = x.data();
    auto od = out.data();
    // keep the result inside the open interval (0, 1) even where exp saturates
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    for (std::size_t i = 0; i < xd.size(); ++i) od[i] = std::clamp(T(1) / (T(1) + std::exp(-xd[i])), lo, hi);
    auto xi = x.handle();
    auto oi = out.handle();
    detail::attach<T>("sigmoid", {&x}, out, [=](const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T s = oi->data[i];
            xi->grad[i] += g[i] * s * (T(1) - s);
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> softmax_channel(const BasicTensor<T>& x) {
    if (x.rank() != 4 || x.dim(1) < 2)
        throw ShapeError("softmax_channel: expected N x C x H x W with C >= 2, got " + shape_str(x.shape()));
    const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t base = n * channels * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            T peak = xd[base + p];
            for (std::size_t c = 1; c < channels; ++c) peak = std::max(peak, xd[base + c * plane + p]);
            T total = 0;
            for (std::size_t c = 0; c < channels; ++c) {
                const T e = std::exp(xd[base + c * plane + p] - peak);
                od[base + c * plane + p] = e;
                total += e;
            }
            for (std::size_t c = 0; c < channels; ++c) od[base + c * plane + p] /= total;
        }
    }
    auto xi = x.handle();
    auto oi = out.handle();
    detail::attach<T>("softmax_channel", {&x}, out, [=](const std::vector<T>& g) {
        const auto& s = oi->data;
        for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = n * channels * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                T dot = 0;
                for (std::size_t c = 0; c < channels; ++c) dot += g[base + c * plane + p] * s[base + c * plane + p];
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t i = base + c * plane + p;
                    xi->grad[i] += s[i] * (g[i] - dot);
                }
            }
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
    double total = 0;
    for (T v : x.data()) total += v;
    auto out = BasicTensor<T>::scalar(static_cast<T>(total));
    auto xi = x.handle();
    detail::attach<T>("sum", {&x}, out, [=](const std::vector<T>& g) {
        for (auto& v : xi->grad) v += g[0];
    });
    return out;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    auto out = BasicTensor<T>::from(shape, x.values());
    auto xi = x.handle();
    detail::attach<T>("reshape", {&x}, out, [=](const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
    });
    return out;
}

#define RUNET_INSTANTIATE_OPS(T)                                                             \
    template BasicTensor<T> elementwise(BinaryOp, const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                 \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);            \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                     \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                  \
    template BasicTensor<T> softmax_channel(const BasicTensor<T>&);                          \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                      \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                     \
    template BasicTensor<T> reshape(const BasicTensor<T>&, const Shape&);

RUNET_INSTANTIATE_OPS(float)
RUNET_INSTANTIATE_OPS(double)

}  // namespace runet
