#include "runet/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "runet/parallel.hpp"

namespace runet {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_nchw(const BasicTensor<T>& x, const char* op) {
    if (x.rank() != 4) throw ShapeError(std::string(op) + ": expected NCHW input, got " + shape_str(x.shape()));
}

}  // namespace

// --- constructors -----------------------------------------------------------

template <typename T>
ConvParams<T> make_conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::uint64_t seed) {
    ConvParams<T> p;
    p.weight = BasicTensor<T>::create({out_channels, in_channels, kernel, kernel}, HeNormal{seed, 0});
    p.bias = BasicTensor<T>::zeros({out_channels});
    return p;
}

template <typename T>
BatchNormState<T> make_batchnorm(std::size_t channels) {
    BatchNormState<T> s;
    s.gamma = BasicTensor<T>::constant({channels}, T(1));
    s.beta = BasicTensor<T>::zeros({channels});
    s.running_mean = BasicTensor<T>::zeros({channels});
    s.running_var = BasicTensor<T>::constant({channels}, T(1));
    return s;
}

template <typename T>
DenseParams<T> make_dense(std::size_t in_features, std::size_t out_features, std::uint64_t seed) {
    return {BasicTensor<T>::create({out_features, in_features}, HeNormal{seed, 0}),
            BasicTensor<T>::zeros({out_features})};
}

template <typename T>
ResidualBlockParams<T> make_residual_block(std::size_t channels, std::uint64_t seed1, std::uint64_t seed2) {
    return {make_conv<T>(channels, channels, 3, seed1), make_conv<T>(channels, channels, 3, seed2),
            make_batchnorm<T>(channels), make_batchnorm<T>(channels)};
}

template <typename T>
CbamParams<T> make_cbam(std::size_t channels, std::size_t reduction, std::uint64_t seed1, std::uint64_t seed2,
                        std::uint64_t seed3) {
    if (reduction == 0 || channels % reduction != 0)
        throw ShapeError("cbam: channels " + std::to_string(channels) + " not divisible by reduction " +
                         std::to_string(reduction));
    const std::size_t hidden = channels / reduction;
    return {make_dense<T>(channels, hidden, seed1), make_dense<T>(hidden, channels, seed2),
            make_conv<T>(2, 1, 7, seed3)};
}

// --- shape-changing ops ---------------------------------------------------

template <typename T>
BasicTensor<T> coordconv_augment(const BasicTensor<T>& x) {
    require_nchw(x, "coordconv_augment");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), plane = H * W;
    auto out = detail::make_output<T>({N, C + 2, H, W});
    auto xd = x.data();
    auto od = out.data();
    auto coord = [](std::size_t i, std::size_t extent) {
        return extent == 1 ? T(0) : static_cast<T>(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(extent - 1));
    };
    for (std::size_t n = 0; n < N; ++n) {
        std::copy_n(xd.begin() + n * C * plane, C * plane, od.begin() + n * (C + 2) * plane);
        T* cols = od.data() + (n * (C + 2) + C) * plane;
        T* rows = cols + plane;
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                cols[i * W + j] = coord(j, W);
                rows[i * W + j] = coord(i, H);
            }
    }
    auto xi = x.handle();
    detail::attach<T>("coordconv_augment", {&x}, out, [=](const std::vector<T>& g) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t i = 0; i < C * plane; ++i) xi->grad[n * C * plane + i] += g[n * (C + 2) * plane + i];
    });
    return out;
}

template <typename T>
BasicTensor<T> maxpool2x2(const BasicTensor<T>& x) {
    require_nchw(x, "maxpool2x2");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % 2 != 0 || W % 2 != 0) throw ShapeError("maxpool2x2: odd spatial extent " + shape_str(x.shape()));
    const std::size_t Ho = H / 2, Wo = W / 2;
    auto out = detail::make_output<T>({N, C, Ho, Wo});
    std::vector<std::size_t> argmax(out.numel());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const std::size_t in_base = nc * H * W;
        const std::size_t out_base = nc * Ho * Wo;
        for (std::size_t i = 0; i < Ho; ++i)
            for (std::size_t j = 0; j < Wo; ++j) {
                const std::size_t cand[4] = {in_base + 2 * i * W + 2 * j, in_base + 2 * i * W + 2 * j + 1,
                                             in_base + (2 * i + 1) * W + 2 * j, in_base + (2 * i + 1) * W + 2 * j + 1};
                std::size_t best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (xd[cand[k]] > xd[best]) best = cand[k];
                od[out_base + i * Wo + j] = xd[best];
                argmax[out_base + i * Wo + j] = best;
            }
    }
    if (auto* fp = detail::branch_fingerprint())
        for (std::size_t a : argmax) fp->mix(a);
    auto xi = x.handle();
    detail::attach<T>("maxpool2x2", {&x}, out, [=, argmax = std::move(argmax)](const std::vector<T>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) xi->grad[argmax[i]] += g[i];
    });
    return out;
}

template <typename T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& x) {
    require_nchw(x, "upsample_nearest2x");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = 2 * H, Wo = 2 * W;
    auto out = detail::make_output<T>({N, C, Ho, Wo});
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t nc = 0; nc < N * C; ++nc)
        for (std::size_t i = 0; i < Ho; ++i)
            for (std::size_t j = 0; j < Wo; ++j) od[(nc * Ho + i) * Wo + j] = xd[(nc * H + i / 2) * W + j / 2];
    auto xi = x.handle();
    detail::attach<T>("upsample_nearest2x", {&x}, out, [=](const std::vector<T>& g) {
        for (std::size_t nc = 0; nc < N * C; ++nc)
            for (std::size_t i = 0; i < Ho; ++i)
                for (std::size_t j = 0; j < Wo; ++j) xi->grad[(nc * H + i / 2) * W + j / 2] += g[(nc * Ho + i) * Wo + j];
    });
    return out;
}

// --- normalization ----------------------------------------------------------

template <typename T>
BasicTensor<T> batchnorm2d(const BasicTensor<T>& x, BatchNormState<T>& s, Mode mode) {
    require_nchw(x, "batchnorm2d");
    const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    if (s.channels() != C)
        throw ShapeError("batchnorm2d: state has " + std::to_string(s.channels()) + " channels, input has " +
                         std::to_string(C));
    const std::size_t M = N * plane;
    if (mode == Mode::Train && M <= 1)
        throw std::invalid_argument("batchnorm2d: train mode needs more than one value per channel");

    std::vector<T> mean(C), invstd(C);
    auto xd = x.data();
    if (mode == Mode::Train) {
        auto rm = s.running_mean.data();
        auto rv = s.running_var.data();
        parallel_for(C, [&](std::size_t c) {
            double acc = 0;
            for (std::size_t n = 0; n < N; ++n) {
                const T* row = xd.data() + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) acc += row[i];
            }
            const double mu = acc / static_cast<double>(M);
            double sq = 0;
            for (std::size_t n = 0; n < N; ++n) {
                const T* row = xd.data() + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = row[i] - mu;
                    sq += d * d;
                }
            }
            const double var = sq / static_cast<double>(M);
            mean[c] = static_cast<T>(mu);
            invstd[c] = static_cast<T>(1.0 / std::sqrt(var + s.eps));
            const double unbiased = var * static_cast<double>(M) / static_cast<double>(M - 1);
            rm[c] = static_cast<T>((1.0 - s.momentum) * rm[c] + s.momentum * mu);
            rv[c] = static_cast<T>((1.0 - s.momentum) * rv[c] + s.momentum * unbiased);
        });
    } else {
        auto rm = s.running_mean.data();
        auto rv = s.running_var.data();
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = rm[c];
            invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + s.eps));
        }
    }

    auto out = detail::make_output<T>(x.shape());
    auto od = out.data();
    auto gamma = s.gamma.data();
    auto beta = s.beta.data();
    parallel_for(C, [&](std::size_t c) {
        const T a = gamma[c] * invstd[c];
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t base = (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) od[base + i] = (xd[base + i] - mean[c]) * a + beta[c];
        }
    });

    auto xi = x.handle();
    auto gi = s.gamma.handle();
    auto bi = s.beta.handle();
    const bool train = mode == Mode::Train;
    detail::attach<T>("batchnorm2d", {&x, &s.gamma, &s.beta}, out,
                      [=, mean = std::move(mean), invstd = std::move(invstd)](const std::vector<T>& g) {
                          parallel_for(C, [&](std::size_t c) {
                              double sum_g = 0, sum_gx = 0;
                              for (std::size_t n = 0; n < N; ++n) {
                                  const std::size_t base = (n * C + c) * plane;
                                  for (std::size_t i = 0; i < plane; ++i) {
                                      const double xhat = (xi->data[base + i] - mean[c]) * invstd[c];
                                      sum_g += g[base + i];
                                      sum_gx += g[base + i] * xhat;
                                  }
                              }
                              if (gi->requires_grad) gi->grad[c] += static_cast<T>(sum_gx);
                              if (bi->requires_grad) bi->grad[c] += static_cast<T>(sum_g);
                              if (!xi->requires_grad) return;
                              const double scale = static_cast<double>(gi->data[c]) * invstd[c];
                              const double inv_m = 1.0 / static_cast<double>(M);
                              for (std::size_t n = 0; n < N; ++n) {
                                  const std::size_t base = (n * C + c) * plane;
                                  for (std::size_t i = 0; i < plane; ++i) {
                                      if (train) {
                                          const double xhat = (xi->data[base + i] - mean[c]) * invstd[c];
                                          xi->grad[base + i] += static_cast<T>(
                                              scale * (g[base + i] - inv_m * sum_g - xhat * inv_m * sum_gx));
                                      } else {
                                          xi->grad[base + i] += static_cast<T>(scale * g[base + i]);
                                      }
                                  }
                              }
                          });
                      });
    return out;
}

// --- dense and pooling -------------------------------------------------------

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const DenseParams<T>& p) {
    if (x.rank() != 2 || p.weight.rank() != 2 || x.dim(1) != p.weight.dim(1) || p.bias.numel() != p.weight.dim(0))
        throw ShapeError("dense: extent mismatch x " + shape_str(x.shape()) + " W " + shape_str(p.weight.shape()) +
                         " b " + shape_str(p.bias.shape()));
    const auto N = static_cast<Eigen::Index>(x.dim(0));
    const auto F = static_cast<Eigen::Index>(x.dim(1));
    const auto O = static_cast<Eigen::Index>(p.weight.dim(0));
    auto out = detail::make_output<T>({x.dim(0), p.weight.dim(0)});
    MatMap<T> o(out.data().data(), N, O);
    o.noalias() = ConstMatMap<T>(x.data().data(), N, F) * ConstMatMap<T>(p.weight.data().data(), O, F).transpose();
    for (Eigen::Index r = 0; r < N; ++r)
        for (Eigen::Index c = 0; c < O; ++c) o(r, c) += p.bias[static_cast<std::size_t>(c)];

    auto xi = x.handle();
    auto wi = p.weight.handle();
    auto bi = p.bias.handle();
    detail::attach<T>("dense", {&x, &p.weight, &p.bias}, out, [=](const std::vector<T>& g) {
        ConstMatMap<T> gm(g.data(), N, O);
        if (xi->requires_grad) {
            RowMat<T> gx = gm * ConstMatMap<T>(wi->data.data(), O, F);
            MatMap<T>(xi->grad.data(), N, F) += gx;
        }
        if (wi->requires_grad) {
            RowMat<T> gw = gm.transpose() * ConstMatMap<T>(xi->data.data(), N, F);
            MatMap<T>(wi->grad.data(), O, F) += gw;
        }
        if (bi->requires_grad)
            for (Eigen::Index c = 0; c < O; ++c) {
                T acc = 0;
                for (Eigen::Index r = 0; r < N; ++r) acc += gm(r, c);
                bi->grad[static_cast<std::size_t>(c)] += acc;
            }
    });
    return out;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
    require_nchw(x, "global_avg_pool");
    const std::size_t NC = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>({x.dim(0), x.dim(1)});
    auto xd = x.data();
    for (std::size_t k = 0; k < NC; ++k) {
        double acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += xd[k * plane + i];
        out[k] = static_cast<T>(acc / static_cast<double>(plane));
    }
    auto xi = x.handle();
    detail::attach<T>("global_avg_pool", {&x}, out, [=](const std::vector<T>& g) {
        const T inv = T(1) / static_cast<T>(plane);
        for (std::size_t k = 0; k < NC; ++k)
            for (std::size_t i = 0; i < plane; ++i) xi->grad[k * plane + i] += g[k] * inv;
    });
    return out;
}

template <typename T>
BasicTensor<T> global_max_pool(const BasicTensor<T>& x) {
    require_nchw(x, "global_max_pool");
    const std::size_t NC = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>({x.dim(0), x.dim(1)});
    std::vector<std::size_t> argmax(NC);
    auto xd = x.data();
    for (std::size_t k = 0; k < NC; ++k) {
        std::size_t best = k * plane;
        for (std::size_t i = 1; i < plane; ++i)
            if (xd[k * plane + i] > xd[best]) best = k * plane + i;
        out[k] = xd[best];
        argmax[k] = best;
    }
    if (auto* fp = detail::branch_fingerprint())
        for (std::size_t a : argmax) fp->mix(a);
    auto xi = x.handle();
    detail::attach<T>("global_max_pool", {&x}, out, [=, argmax = std::move(argmax)](const std::vector<T>& g) {
        for (std::size_t k = 0; k < NC; ++k) xi->grad[argmax[k]] += g[k];
    });
    return out;
}

template <typename T>
BasicTensor<T> channel_mean(const BasicTensor<T>& x) {
    require_nchw(x, "channel_mean");
    const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>({N, 1, x.dim(2), x.dim(3)});
    auto xd = x.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < plane; ++p) {
            double acc = 0;
            for (std::size_t c = 0; c < C; ++c) acc += xd[(n * C + c) * plane + p];
            out[n * plane + p] = static_cast<T>(acc / static_cast<double>(C));
        }
    auto xi = x.handle();
    detail::attach<T>("channel_mean", {&x}, out, [=](const std::vector<T>& g) {
        const T inv = T(1) / static_cast<T>(C);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t p = 0; p < plane; ++p) xi->grad[(n * C + c) * plane + p] += g[n * plane + p] * inv;
    });
    return out;
}

template <typename T>
BasicTensor<T> channel_max(const BasicTensor<T>& x) {
    require_nchw(x, "channel_max");
    const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>({N, 1, x.dim(2), x.dim(3)});
    std::vector<std::size_t> argmax(N * plane);
    auto xd = x.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < plane; ++p) {
            std::size_t best = n * C * plane + p;
            for (std::size_t c = 1; c < C; ++c) {
                const std::size_t i = (n * C + c) * plane + p;
                if (xd[i] > xd[best]) best = i;
            }
            out[n * plane + p] = xd[best];
            argmax[n * plane + p] = best;
        }
    if (auto* fp = detail::branch_fingerprint())
        for (std::size_t a : argmax) fp->mix(a);
    auto xi = x.handle();
    detail::attach<T>("channel_max", {&x}, out, [=, argmax = std::move(argmax)](const std::vector<T>& g) {
        for (std::size_t k = 0; k < g.size(); ++k) xi->grad[argmax[k]] += g[k];
    });
    return out;
}

// --- broadcasting products ---------------------------------------------------

template <typename T>
BasicTensor<T> scale_channels(const BasicTensor<T>& x, const BasicTensor<T>& s) {
    require_nchw(x, "scale_channels");
    if (s.rank() != 2 || s.dim(0) != x.dim(0) || s.dim(1) != x.dim(1))
        throw ShapeError("scale_channels: scale " + shape_str(s.shape()) + " does not match " + shape_str(x.shape()));
    const std::size_t NC = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>(x.shape());
    auto xd = x.data();
    auto sd = s.data();
    auto od = out.data();
    for (std::size_t k = 0; k < NC; ++k)
        for (std::size_t i = 0; i < plane; ++i) od[k * plane + i] = xd[k * plane + i] * sd[k];
    auto xi = x.handle();
    auto si = s.handle();
    detail::attach<T>("scale_channels", {&x, &s}, out, [=](const std::vector<T>& g) {
        for (std::size_t k = 0; k < NC; ++k) {
            double acc = 0;
            for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t j = k * plane + i;
                if (xi->requires_grad) xi->grad[j] += g[j] * si->data[k];
                acc += static_cast<double>(g[j]) * xi->data[j];
            }
            if (si->requires_grad) si->grad[k] += static_cast<T>(acc);
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> scale_spatial(const BasicTensor<T>& x, const BasicTensor<T>& s) {
    require_nchw(x, "scale_spatial");
    if (s.rank() != 4 || s.dim(0) != x.dim(0) || s.dim(1) != 1 || s.dim(2) != x.dim(2) || s.dim(3) != x.dim(3))
        throw ShapeError("scale_spatial: scale " + shape_str(s.shape()) + " does not match " + shape_str(x.shape()));
    const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    auto out = detail::make_output<T>(x.shape());
    auto xd = x.data();
    auto sd = s.data();
    auto od = out.data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t p = 0; p < plane; ++p)
                od[(n * C + c) * plane + p] = xd[(n * C + c) * plane + p] * sd[n * plane + p];
    auto xi = x.handle();
    auto si = s.handle();
    detail::attach<T>("scale_spatial", {&x, &s}, out, [=](const std::vector<T>& g) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t p = 0; p < plane; ++p) {
                double acc = 0;
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t j = (n * C + c) * plane + p;
                    if (xi->requires_grad) xi->grad[j] += g[j] * si->data[n * plane + p];
                    acc += static_cast<double>(g[j]) * xi->data[j];
                }
                if (si->requires_grad) si->grad[n * plane + p] += static_cast<T>(acc);
            }
    });
    return out;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_nchw(a, "concat_channels");
    require_nchw(b, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), plane = a.dim(2) * a.dim(3);
    auto out = detail::make_output<T>({N, Ca + Cb, a.dim(2), a.dim(3)});
    auto od = out.data();
    for (std::size_t n = 0; n < N; ++n) {
        std::copy_n(a.data().begin() + n * Ca * plane, Ca * plane, od.begin() + n * (Ca + Cb) * plane);
        std::copy_n(b.data().begin() + n * Cb * plane, Cb * plane, od.begin() + (n * (Ca + Cb) + Ca) * plane);
    }
    auto ai = a.handle();
    auto bi = b.handle();
    detail::attach<T>("concat_channels", {&a, &b}, out, [=](const std::vector<T>& g) {
        for (std::size_t n = 0; n < N; ++n) {
            const T* src = g.data() + n * (Ca + Cb) * plane;
            if (ai->requires_grad)
                for (std::size_t i = 0; i < Ca * plane; ++i) ai->grad[n * Ca * plane + i] += src[i];
            if (bi->requires_grad)
                for (std::size_t i = 0; i < Cb * plane; ++i) bi->grad[n * Cb * plane + i] += src[Ca * plane + i];
        }
    });
    return out;
}

// --- composite blocks --------------------------------------------------------

template <typename T>
BasicTensor<T> residual_block(const BasicTensor<T>& x, ResidualBlockParams<T>& p, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != p.conv1.in_channels() || p.conv2.out_channels() != x.dim(1))
        throw ShapeError("residual_block: channel mismatch for input " + shape_str(x.shape()));
    auto h = relu(batchnorm2d(conv2d(x, p.conv1), p.bn1, mode));
    h = batchnorm2d(conv2d(h, p.conv2), p.bn2, mode);
    return relu(add(h, x));
}

template <typename T>
CbamOutput<T> cbam(const BasicTensor<T>& x, const CbamParams<T>& p) {
    require_nchw(x, "cbam");
    const std::size_t C = x.dim(1);
    if (p.mlp1.weight.dim(1) != C || C % p.mlp1.weight.dim(0) != 0)
        throw ShapeError("cbam: " + std::to_string(C) + " channels do not match the attention MLP");
    auto mlp = [&](const BasicTensor<T>& v) { return dense(relu(dense(v, p.mlp1)), p.mlp2); };
    CbamOutput<T> out;
    out.channel_map = sigmoid(add(mlp(global_avg_pool(x)), mlp(global_max_pool(x))));
    auto refined_channels = scale_channels(x, out.channel_map);
    auto pooled = concat_channels(channel_mean(refined_channels), channel_max(refined_channels));
    out.spatial_map = sigmoid(conv2d(pooled, p.spatial));
    out.refined = scale_spatial(refined_channels, out.spatial_map);
    return out;
}

#define RUNET_INSTANTIATE_LAYERS(T)                                                                          \
    template ConvParams<T> make_conv(std::size_t, std::size_t, std::size_t, std::uint64_t);                 \
    template BatchNormState<T> make_batchnorm(std::size_t);                                                 \
    template DenseParams<T> make_dense(std::size_t, std::size_t, std::uint64_t);                            \
    template ResidualBlockParams<T> make_residual_block(std::size_t, std::uint64_t, std::uint64_t);         \
    template CbamParams<T> make_cbam(std::size_t, std::size_t, std::uint64_t, std::uint64_t, std::uint64_t); \
    template BasicTensor<T> coordconv_augment(const BasicTensor<T>&);                                       \
    template BasicTensor<T> maxpool2x2(const BasicTensor<T>&);                                              \
    template BasicTensor<T> upsample_nearest2x(const BasicTensor<T>&);                                      \
    template BasicTensor<T> batchnorm2d(const BasicTensor<T>&, BatchNormState<T>&, Mode);                   \
    template BasicTensor<T> dense(const BasicTensor<T>&, const DenseParams<T>&);                            \
    template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                         \
    template BasicTensor<T> global_max_pool(const BasicTensor<T>&);                                         \
    template BasicTensor<T> channel_mean(const BasicTensor<T>&);                                            \
    template BasicTensor<T> channel_max(const BasicTensor<T>&);                                             \
    template BasicTensor<T> scale_channels(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template BasicTensor<T> scale_spatial(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> residual_block(const BasicTensor<T>&, ResidualBlockParams<T>&, Mode);           \
    template CbamOutput<T> cbam(const BasicTensor<T>&, const CbamParams<T>&);

RUNET_INSTANTIATE_LAYERS(float)
RUNET_INSTANTIATE_LAYERS(double)

}  // namespace runet
