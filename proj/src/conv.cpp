// Same-padding stride-1 convolution lowered to GEMM through im2col.

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <utility>

#include "runet/layers.hpp"
#include "runet/parallel.hpp"

namespace runet {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct Geometry {
    std::size_t channels, height, width, kernel, pad;
    std::size_t plane() const { return height * width; }
    std::size_t rows() const { return channels * kernel * kernel; }
};

// Output columns x whose source column x + dx lies inside [0, W).
std::pair<std::size_t, std::size_t> valid_columns(std::size_t W, std::ptrdiff_t dx) {
    const auto w = static_cast<std::ptrdiff_t>(W);
    const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-dx, 0, w);
    const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(w - dx, 0, w);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

// col[(c*k + ky)*k + kx][y*W + x] = img[c][y + ky - pad][x + kx - pad], zero outside.
template <typename T>
void im2col(const T* img, const Geometry& g, T* col) {
    const std::size_t H = g.height, W = g.width, k = g.kernel;
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* src = img + c * g.plane();
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                T* dst = col + ((c * k + ky) * k + kx) * g.plane();
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const auto [x0, x1] = valid_columns(W, dx);
                for (std::size_t y = 0; y < H; ++y) {
                    T* row = dst + y * W;
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H) || x0 >= x1) {
                        std::fill(row, row + W, T(0));
                        continue;
                    }
                    std::fill(row, row + x0, T(0));
                    std::memcpy(row + x0, src + static_cast<std::size_t>(sy) * W + (x0 + dx), (x1 - x0) * sizeof(T));
                    std::fill(row + x1, row + W, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates col entries back into img.
template <typename T>
void col2im_add(const T* col, const Geometry& g, T* img) {
    const std::size_t H = g.height, W = g.width, k = g.kernel;
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* dst = img + c * g.plane();
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const T* src = col + ((c * k + ky) * k + kx) * g.plane();
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                const auto [x0, x1] = valid_columns(W, dx);
                for (std::size_t y = 0; y < H; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
                    const T* row = src + y * W;
                    T* out = dst + static_cast<std::size_t>(sy) * W;
                    for (std::size_t x = x0; x < x1; ++x) out[x + dx] += row[x];
                }
            }
        }
    }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvParams<T>& p) {
    if (x.rank() != 4) throw ShapeError("conv2d: expected NCHW input, got " + shape_str(x.shape()));
    if (p.weight.rank() != 4 || p.weight.dim(2) != p.weight.dim(3) || p.weight.dim(2) % 2 == 0)
        throw ShapeError("conv2d: weight must be (C_out, C_in, k, k) with odd k");
    if (x.dim(1) != p.in_channels())
        throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, weight expects " +
                         std::to_string(p.in_channels()));
    if (p.bias.numel() != p.out_channels()) throw ShapeError("conv2d: bias extent mismatch");

    const std::size_t batch = x.dim(0);
    const Geometry g{x.dim(1), x.dim(2), x.dim(3), p.kernel(), p.kernel() / 2};
    const std::size_t cout = p.out_channels();
    const auto K = static_cast<Eigen::Index>(g.rows());
    const auto HW = static_cast<Eigen::Index>(g.plane());
    const auto CO = static_cast<Eigen::Index>(cout);
    const bool pointwise = g.kernel == 1;

    auto out = detail::make_output<T>({batch, cout, g.height, g.width});
    {
        const T* xd = x.data().data();
        const T* wd = p.weight.data().data();
        const T* bd = p.bias.data().data();
        T* od = out.data().data();
        parallel_for(batch, [&](std::size_t n) {
            const T* img = xd + n * g.channels * g.plane();
            std::vector<T> col;
            if (!pointwise) {
                col.resize(g.rows() * g.plane());
                im2col(img, g, col.data());
            }
            MatMap<T> o(od + n * cout * g.plane(), CO, HW);
            o.noalias() = ConstMatMap<T>(wd, CO, K) * ConstMatMap<T>(pointwise ? img : col.data(), K, HW);
            for (std::size_t c = 0; c < cout; ++c) o.row(static_cast<Eigen::Index>(c)).array() += bd[c];
        });
    }

    auto xi = x.handle();
    auto wi = p.weight.handle();
    auto bi = p.bias.handle();
    detail::attach<T>("conv2d", {&x, &p.weight, &p.bias}, out, [=](const std::vector<T>& grad) {
        const std::size_t in_size = g.channels * g.plane();
        const std::size_t out_size = cout * g.plane();
        std::vector<T> partial_w(wi->requires_grad ? batch * cout * g.rows() : 0);
        parallel_for(batch, [&](std::size_t n) {
            ConstMatMap<T> gy(grad.data() + n * out_size, CO, HW);
            const T* img = xi->data.data() + n * in_size;
            if (wi->requires_grad) {
                std::vector<T> col;
                if (!pointwise) {
                    col.resize(g.rows() * g.plane());
                    im2col(img, g, col.data());
                }
                MatMap<T>(partial_w.data() + n * cout * g.rows(), CO, K).noalias() =
                    gy * ConstMatMap<T>(pointwise ? img : col.data(), K, HW).transpose();
            }
            if (xi->requires_grad) {
                ConstMatMap<T> w(wi->data.data(), CO, K);
                if (pointwise) {
                    MatMap<T> gx(xi->grad.data() + n * in_size, K, HW);
                    RowMat<T> d = w.transpose() * gy;
                    gx += d;
                } else {
                    RowMat<T> dcol = w.transpose() * gy;
                    col2im_add(dcol.data(), g, xi->grad.data() + n * in_size);
                }
            }
        });
        if (wi->requires_grad) {
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t i = 0; i < cout * g.rows(); ++i) wi->grad[i] += partial_w[n * cout * g.rows() + i];
        }
        if (bi->requires_grad) {
            for (std::size_t c = 0; c < cout; ++c) {
                double acc = 0;
                for (std::size_t n = 0; n < batch; ++n) {
                    const T* row = grad.data() + n * out_size + c * g.plane();
                    for (std::size_t i = 0; i < g.plane(); ++i) acc += row[i];
                }
                bi->grad[c] += static_cast<T>(acc);
            }
        }
    });
    return out;
}

template BasicTensor<float> conv2d(const BasicTensor<float>&, const ConvParams<float>&);
template BasicTensor<double> conv2d(const BasicTensor<double>&, const ConvParams<double>&);

}  // namespace runet
