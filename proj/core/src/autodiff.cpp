#include "convbench/autodiff.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#include <cmath>
#include <cstring>

namespace convbench {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

// Gather: cols[(c*kh+m)*kw+n, py*pw+px] = src(c, py*s+m-p, px*s+n-p), zero
// outside the grid. The "position" grid (ph x pw) is always the downsampled
// side of the convolution pair.
void im2col(const double* src, int C, int H, int W, int kh, int kw, int stride, int pad,
            int ph, int pw, double* cols) {
    const std::int64_t npos = static_cast<std::int64_t>(ph) * pw;
    std::int64_t row = 0;
    for (int c = 0; c < C; ++c) {
        const double* plane = src + static_cast<std::int64_t>(c) * H * W;
        for (int m = 0; m < kh; ++m) {
            for (int n = 0; n < kw; ++n, ++row) {
                double* out = cols + row * npos;
                for (int py = 0; py < ph; ++py) {
                    const int iy = py * stride + m - pad;
                    double* line = out + static_cast<std::int64_t>(py) * pw;
                    if (iy < 0 || iy >= H) {
                        std::memset(line, 0, sizeof(double) * static_cast<std::size_t>(pw));
                        continue;
                    }
                    const double* srow = plane + static_cast<std::int64_t>(iy) * W;
                    for (int px = 0; px < pw; ++px) {
                        const int ix = px * stride + n - pad;
                        line[px] = (ix >= 0 && ix < W) ? srow[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col: dst(c, py*s+m-p, px*s+n-p) += cols[row, pos].
void col2im_add(const double* cols, int C, int H, int W, int kh, int kw, int stride, int pad,
                int ph, int pw, double* dst) {
    const std::int64_t npos = static_cast<std::int64_t>(ph) * pw;
    std::int64_t row = 0;
    for (int c = 0; c < C; ++c) {
        double* plane = dst + static_cast<std::int64_t>(c) * H * W;
        for (int m = 0; m < kh; ++m) {
            for (int n = 0; n < kw; ++n, ++row) {
                const double* in = cols + row * npos;
                for (int py = 0; py < ph; ++py) {
                    const int iy = py * stride + m - pad;
                    if (iy < 0 || iy >= H) {
                        continue;
                    }
                    double* drow = plane + static_cast<std::int64_t>(iy) * W;
                    const double* line = in + static_cast<std::int64_t>(py) * pw;
                    for (int px = 0; px < pw; ++px) {
                        const int ix = px * stride + n - pad;
                        if (ix >= 0 && ix < W) {
                            drow[ix] += line[px];
                        }
                    }
                }
            }
        }
    }
}

// Direct stride-1 convolution kernels. The GEMM path pays an im2col expansion
// (9x the input traffic for a 3x3 kernel) which dominates at the small channel
// counts the trunks use at full resolution; the direct loops keep planes
// cache-resident and vectorize along rows.

// out(co, y, x) = bias(co) + sum_{ci,m,n} in(ci, y+m-p, x+n-p) * K(co,ci,m,n)
void conv_s1_forward(const double* in, int ci_n, int h, int w, const double* k, int co_n,
                     int kh, int kw, int pad, const double* bias, double* out, int ho,
                     int wo) {
    for (int co = 0; co < co_n; ++co) {
        double* oplane = out + static_cast<std::int64_t>(co) * ho * wo;
        const double b = bias ? bias[co] : 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(ho) * wo; ++i) {
            oplane[i] = b;
        }
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* iplane = in + static_cast<std::int64_t>(ci) * h * w;
            for (int m = 0; m < kh; ++m) {
                for (int n = 0; n < kw; ++n) {
                    const double wk = k[((static_cast<std::int64_t>(co) * ci_n + ci) * kh + m) *
                                            kw + n];
                    if (wk == 0.0) {
                        continue;
                    }
                    const int y0 = std::max(0, pad - m), y1 = std::min(ho, h + pad - m);
                    const int x0 = std::max(0, pad - n), x1 = std::min(wo, w + pad - n);
                    for (int y = y0; y < y1; ++y) {
                        double* __restrict orow = oplane + static_cast<std::int64_t>(y) * wo;
                        const double* __restrict irow =
                            iplane + static_cast<std::int64_t>(y + m - pad) * w + (n - pad);
                        for (int x = x0; x < x1; ++x) {
                            orow[x] += wk * irow[x];
                        }
                    }
                }
            }
        }
    }
}

// dIn(ci, iy, ix) += sum K(co,ci,m,n) * dOut(co, iy-m+p, ix-n+p)
void conv_s1_backward_input(const double* dout, int co_n, int ho, int wo, const double* k,
                            int ci_n, int kh, int kw, int pad, double* din, int h, int w) {
    for (int ci = 0; ci < ci_n; ++ci) {
        double* dplane = din + static_cast<std::int64_t>(ci) * h * w;
        for (int co = 0; co < co_n; ++co) {
            const double* gplane = dout + static_cast<std::int64_t>(co) * ho * wo;
            for (int m = 0; m < kh; ++m) {
                for (int n = 0; n < kw; ++n) {
                    const double wk = k[((static_cast<std::int64_t>(co) * ci_n + ci) * kh + m) *
                                            kw + n];
                    if (wk == 0.0) {
                        continue;
                    }
                    const int y0 = std::max(0, pad - m), y1 = std::min(ho, h + pad - m);
                    const int x0 = std::max(0, pad - n), x1 = std::min(wo, w + pad - n);
                    for (int y = y0; y < y1; ++y) {
                        double* __restrict drow =
                            dplane + static_cast<std::int64_t>(y + m - pad) * w + (n - pad);
                        const double* __restrict grow =
                            gplane + static_cast<std::int64_t>(y) * wo;
                        for (int x = x0; x < x1; ++x) {
                            drow[x] += wk * grow[x];
                        }
                    }
                }
            }
        }
    }
}

// dK(co,ci,m,n) += sum_{y,x} in(ci, y+m-p, x+n-p) * dOut(co, y, x)
void conv_s1_backward_kernel(const double* in, int ci_n, int h, int w, const double* dout,
                             int co_n, int ho, int wo, int kh, int kw, int pad, double* dk) {
    for (int co = 0; co < co_n; ++co) {
        const double* gplane = dout + static_cast<std::int64_t>(co) * ho * wo;
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* iplane = in + static_cast<std::int64_t>(ci) * h * w;
            for (int m = 0; m < kh; ++m) {
                for (int n = 0; n < kw; ++n) {
                    const int y0 = std::max(0, pad - m), y1 = std::min(ho, h + pad - m);
                    const int x0 = std::max(0, pad - n), x1 = std::min(wo, w + pad - n);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* __restrict irow =
                            iplane + static_cast<std::int64_t>(y + m - pad) * w + (n - pad);
                        const double* __restrict grow =
                            gplane + static_cast<std::int64_t>(y) * wo;
                        for (int x = x0; x < x1; ++x) {
                            acc += irow[x] * grow[x];
                        }
                    }
                    dk[((static_cast<std::int64_t>(co) * ci_n + ci) * kh + m) * kw + n] += acc;
                }
            }
        }
    }
}

void check_conv_config(int stride, int padding) {
    if (stride < 1) {
        throw ConfigError("stride", "must be >= 1, got " + std::to_string(stride));
    }
    if (padding < 0) {
        throw ConfigError("padding", "must be >= 0, got " + std::to_string(padding));
    }
}

struct ConvShape {
    int ci, h, w, co, kh, kw, ho, wo;
};

ConvShape conv_shape(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    check_conv_config(stride, padding);
    if (input.rank() != 3 || kernel.rank() != 4) {
        throw DimensionError("conv2d expects input [C,H,W] and kernel [Co,Ci,kh,kw], got " +
                             shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    }
    ConvShape s{};
    s.ci = input.extent(0);
    s.h = input.extent(1);
    s.w = input.extent(2);
    s.co = kernel.extent(0);
    s.kh = kernel.extent(2);
    s.kw = kernel.extent(3);
    if (kernel.extent(1) != s.ci) {
        throw DimensionError("conv2d channel mismatch: input " + shape_str(input.shape()) +
                             " vs kernel " + shape_str(kernel.shape()));
    }
    if (s.kh > s.h + 2 * padding || s.kw > s.w + 2 * padding) {
        throw DimensionError("conv2d kernel larger than padded input");
    }
    s.ho = (s.h + 2 * padding - s.kh) / stride + 1;
    s.wo = (s.w + 2 * padding - s.kw) / stride + 1;
    return s;
}

ConvShape convt_shape(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    check_conv_config(stride, padding);
    if (input.rank() != 3 || kernel.rank() != 4) {
        throw DimensionError("transposed_conv2d expects input [C,H,W] and kernel [Ci,Co,kh,kw]");
    }
    ConvShape s{};
    s.ci = input.extent(0);
    s.h = input.extent(1);
    s.w = input.extent(2);
    s.co = kernel.extent(1);
    s.kh = kernel.extent(2);
    s.kw = kernel.extent(3);
    if (kernel.extent(0) != s.ci) {
        throw DimensionError("transposed_conv2d channel mismatch: input " +
                             shape_str(input.shape()) + " vs kernel " + shape_str(kernel.shape()));
    }
    s.ho = (s.h - 1) * stride - 2 * padding + s.kh;
    s.wo = (s.w - 1) * stride - 2 * padding + s.kw;
    if (s.ho < 1 || s.wo < 1) {
        throw DimensionError("transposed_conv2d output would be empty");
    }
    return s;
}

// din/dk/dbias accumulate; any of them may be null.
void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& dout, int stride,
                     int padding, Tensor* din, Tensor* dk, Tensor* dbias) {
    const ConvShape s = conv_shape(input, kernel, stride, padding);
    const std::int64_t npos = static_cast<std::int64_t>(s.ho) * s.wo;
    const std::int64_t krows = static_cast<std::int64_t>(s.ci) * s.kh * s.kw;
    if (stride == 1) {
        if (dk) {
            conv_s1_backward_kernel(input.data(), s.ci, s.h, s.w, dout.data(), s.co, s.ho,
                                    s.wo, s.kh, s.kw, padding, dk->data());
        }
        if (din) {
            conv_s1_backward_input(dout.data(), s.co, s.ho, s.wo, kernel.data(), s.ci, s.kh,
                                   s.kw, padding, din->data(), s.h, s.w);
        }
        if (dbias) {
            for (int co = 0; co < s.co; ++co) {
                double acc = 0.0;
                const double* row = dout.data() + co * npos;
                for (std::int64_t q = 0; q < npos; ++q) {
                    acc += row[q];
                }
                (*dbias)[co] += acc;
            }
        }
        return;
    }
    CMapRM dout_m(dout.data(), s.co, npos);
    if (dk) {
        std::vector<double> cols(static_cast<std::size_t>(krows * npos));
        im2col(input.data(), s.ci, s.h, s.w, s.kh, s.kw, stride, padding, s.ho, s.wo,
               cols.data());
        CMapRM cols_m(cols.data(), krows, npos);
        MapRM dk_m(dk->data(), s.co, krows);
        dk_m.noalias() += dout_m * cols_m.transpose();
    }
    if (din) {
        std::vector<double> dcols(static_cast<std::size_t>(krows * npos));
        CMapRM k_m(kernel.data(), s.co, krows);
        MapRM dcols_m(dcols.data(), krows, npos);
        dcols_m.noalias() = k_m.transpose() * dout_m;
        col2im_add(dcols.data(), s.ci, s.h, s.w, s.kh, s.kw, stride, padding, s.ho, s.wo,
                   din->data());
    }
    if (dbias) {
        for (int co = 0; co < s.co; ++co) {
            double acc = 0.0;
            const double* row = dout.data() + co * npos;
            for (std::int64_t q = 0; q < npos; ++q) {
                acc += row[q];
            }
            (*dbias)[co] += acc;
        }
    }
}

void convt2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& dout, int stride,
                      int padding, Tensor* din, Tensor* dk) {
    const ConvShape s = convt_shape(input, kernel, stride, padding);
    const std::int64_t npos = static_cast<std::int64_t>(s.h) * s.w;
    const std::int64_t krows = static_cast<std::int64_t>(s.co) * s.kh * s.kw;
    std::vector<double> cols(static_cast<std::size_t>(krows * npos));
    im2col(dout.data(), s.co, s.ho, s.wo, s.kh, s.kw, stride, padding, s.h, s.w, cols.data());
    CMapRM cols_m(cols.data(), krows, npos);
    if (din) {
        CMapRM k_m(kernel.data(), s.ci, krows);
        MapRM din_m(din->data(), s.ci, npos);
        din_m.noalias() += k_m * cols_m;
    }
    if (dk) {
        CMapRM in_m(input.data(), s.ci, npos);
        MapRM dk_m(dk->data(), s.ci, krows);
        dk_m.noalias() += in_m * cols_m.transpose();
    }
}

} // namespace

namespace ops {

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias, int stride,
              int padding) {
    const ConvShape s = conv_shape(input, kernel, stride, padding);
    if (bias && (bias->rank() != 1 || bias->extent(0) != s.co)) {
        throw DimensionError("conv2d bias must have shape [" + std::to_string(s.co) + "]");
    }
    input.require_finite("conv2d input");
    if (stride == 1) {
        Tensor out({s.co, s.ho, s.wo});
        conv_s1_forward(input.data(), s.ci, s.h, s.w, kernel.data(), s.co, s.kh, s.kw,
                        padding, bias ? bias->data() : nullptr, out.data(), s.ho, s.wo);
        out.require_finite("conv2d output");
        return out;
    }
    const std::int64_t npos = static_cast<std::int64_t>(s.ho) * s.wo;
    const std::int64_t krows = static_cast<std::int64_t>(s.ci) * s.kh * s.kw;
    std::vector<double> cols(static_cast<std::size_t>(krows * npos));
    im2col(input.data(), s.ci, s.h, s.w, s.kh, s.kw, stride, padding, s.ho, s.wo, cols.data());

    Tensor out({s.co, s.ho, s.wo});
    CMapRM k_m(kernel.data(), s.co, krows);
    CMapRM cols_m(cols.data(), krows, npos);
    MapRM out_m(out.data(), s.co, npos);
    out_m.noalias() = k_m * cols_m;
    if (bias) {
        for (int co = 0; co < s.co; ++co) {
            const double b = (*bias)[co];
            double* row = out.data() + co * npos;
            for (std::int64_t q = 0; q < npos; ++q) {
                row[q] += b;
            }
        }
    }
    out.require_finite("conv2d output");
    return out;
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
    const ConvShape s = convt_shape(input, kernel, stride, padding);
    input.require_finite("transposed_conv2d input");
    const std::int64_t npos = static_cast<std::int64_t>(s.h) * s.w;
    const std::int64_t krows = static_cast<std::int64_t>(s.co) * s.kh * s.kw;
    std::vector<double> cols(static_cast<std::size_t>(krows * npos));
    CMapRM k_m(kernel.data(), s.ci, krows);
    CMapRM in_m(input.data(), s.ci, npos);
    MapRM cols_m(cols.data(), krows, npos);
    cols_m.noalias() = k_m.transpose() * in_m;

    Tensor out({s.co, s.ho, s.wo});
    col2im_add(cols.data(), s.co, s.ho, s.wo, s.kh, s.kw, stride, padding, s.h, s.w, out.data());
    out.require_finite("transposed_conv2d output");
    return out;
}

Tensor max_pool2d(const Tensor& input, int window, std::vector<std::int64_t>* argmax) {
    if (window < 1) {
        throw ConfigError("window", "must be >= 1, got " + std::to_string(window));
    }
    if (input.rank() != 3) {
        throw DimensionError("max_pool2d expects input [C,H,W]");
    }
    const int c = input.extent(0), h = input.extent(1), w = input.extent(2);
    if (h % window != 0 || w % window != 0) {
        throw DimensionError("max_pool2d extents " + shape_str(input.shape()) +
                             " not divisible by window " + std::to_string(window));
    }
    input.require_finite("max_pool2d input");
    const int ho = h / window, wo = w / window;
    Tensor out({c, ho, wo});
    if (argmax) {
        argmax->assign(static_cast<std::size_t>(out.size()), 0);
    }
    for (int ch = 0; ch < c; ++ch) {
        for (int py = 0; py < ho; ++py) {
            for (int px = 0; px < wo; ++px) {
                double best = -std::numeric_limits<double>::infinity();
                std::int64_t best_idx = 0;
                for (int m = 0; m < window; ++m) {
                    for (int n = 0; n < window; ++n) {
                        const int iy = py * window + m, ix = px * window + n;
                        const std::int64_t idx =
                            (static_cast<std::int64_t>(ch) * h + iy) * w + ix;
                        const double v = input[idx];
                        if (v > best) { // strict: first scan-order max wins
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                const std::int64_t oidx = (static_cast<std::int64_t>(ch) * ho + py) * wo + px;
                out[oidx] = best;
                if (argmax) {
                    (*argmax)[static_cast<std::size_t>(oidx)] = best_idx;
                }
            }
        }
    }
    return out;
}

Tensor activation(const Tensor& x, Activation kind) {
    x.require_finite("activation input");
    Tensor out = Tensor::zeros_like(x);
    const double* in = x.data();
    double* o = out.data();
    const std::int64_t n = x.size();
    switch (kind) {
    case Activation::Sigmoid:
        for (std::int64_t i = 0; i < n; ++i) {
            o[i] = 1.0 / (1.0 + std::exp(-in[i]));
        }
        break;
    case Activation::Tanh:
        // 1 - 2/(e^{2x}+1): one exp per element, saturates correctly at
        // +-inf and keeps tanh(0) == 0 exact
        for (std::int64_t i = 0; i < n; ++i) {
            o[i] = 1.0 - 2.0 / (std::exp(2.0 * in[i]) + 1.0);
        }
        break;
    case Activation::Relu:
        for (std::int64_t i = 0; i < n; ++i) {
            o[i] = in[i] > 0.0 ? in[i] : 0.0;
        }
        break;
    }
    return out;
}

double mse(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) {
        throw DimensionError("mse shapes differ: " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    }
    double acc = 0.0;
    const double* p = pred.data();
    const double* t = target.data();
    const std::int64_t n = pred.size();
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = p[i] - t[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

double inner(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("inner shapes differ");
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

} // namespace ops

void Tape::check_var(Var v, const char* what) const {
    if (v.tape != this || v.node < 0 || v.node >= node_count()) {
        throw UsageError(std::string(what) + ": tensor is detached from this tape");
    }
}

int Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_of(int node) {
    Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.grad.empty()) {
        n.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

const Tensor& Tape::value(Var v) const {
    check_var(v, "value");
    return nodes_[static_cast<std::size_t>(v.node)].value;
}

Var Tape::leaf(Tensor value) {
    value.require_finite("leaf");
    Node n;
    n.kind = NodeKind::Leaf;
    n.value = std::move(value);
    return {this, push(std::move(n))};
}

Var Tape::param(Parameter& p) {
    p.value().require_finite("parameter");
    Node n;
    n.kind = NodeKind::ParamLeaf;
    n.value = p.value();
    n.parameter = &p;
    return {this, push(std::move(n))};
}

Var Tape::conv2d(Var input, Var kernel, Var bias, int stride, int padding) {
    check_var(input, "conv2d");
    check_var(kernel, "conv2d");
    check_var(bias, "conv2d");
    const int in = input.node, kn = kernel.node, bn = bias.node;
    Node n;
    n.kind = NodeKind::Conv2d;
    n.inputs = {in, kn, bn};
    n.forward_fn = [in, kn, bn, stride, padding](Tape& t) {
        return ops::conv2d(t.nodes_[in].value, t.nodes_[kn].value, &t.nodes_[bn].value, stride,
                           padding);
    };
    n.backward_fn = [in, kn, bn, stride, padding](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        conv2d_backward(t.nodes_[in].value, t.nodes_[kn].value, g, stride, padding,
                        &t.grad_of(in), &t.grad_of(kn), &t.grad_of(bn));
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::conv2d(Var input, Var kernel, int stride, int padding) {
    check_var(input, "conv2d");
    check_var(kernel, "conv2d");
    const int in = input.node, kn = kernel.node;
    Node n;
    n.kind = NodeKind::Conv2d;
    n.inputs = {in, kn};
    n.forward_fn = [in, kn, stride, padding](Tape& t) {
        return ops::conv2d(t.nodes_[in].value, t.nodes_[kn].value, nullptr, stride, padding);
    };
    n.backward_fn = [in, kn, stride, padding](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        conv2d_backward(t.nodes_[in].value, t.nodes_[kn].value, g, stride, padding,
                        &t.grad_of(in), &t.grad_of(kn), nullptr);
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::transposed_conv2d(Var input, Var kernel, int stride, int padding) {
    check_var(input, "transposed_conv2d");
    check_var(kernel, "transposed_conv2d");
    const int in = input.node, kn = kernel.node;
    Node n;
    n.kind = NodeKind::ConvT2d;
    n.inputs = {in, kn};
    n.forward_fn = [in, kn, stride, padding](Tape& t) {
        return ops::transposed_conv2d(t.nodes_[in].value, t.nodes_[kn].value, stride, padding);
    };
    n.backward_fn = [in, kn, stride, padding](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        convt2d_backward(t.nodes_[in].value, t.nodes_[kn].value, g, stride, padding,
                         &t.grad_of(in), &t.grad_of(kn));
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::max_pool2d(Var input, int window) {
    check_var(input, "max_pool2d");
    const int in = input.node;
    auto aux = std::make_shared<std::vector<std::int64_t>>();
    Node n;
    n.kind = NodeKind::MaxPool;
    n.inputs = {in};
    n.aux = aux;
    n.forward_fn = [in, window, aux](Tape& t) {
        return ops::max_pool2d(t.nodes_[in].value, window, aux.get());
    };
    n.backward_fn = [in, aux](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        Tensor& gin = t.grad_of(in);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            gin[(*aux)[static_cast<std::size_t>(i)]] += g[i];
        }
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::activation(Var x, Activation kind) {
    check_var(x, "activation");
    const int in = x.node;
    Node n;
    n.kind = NodeKind::Act;
    n.act = kind;
    n.inputs = {in};
    n.forward_fn = [in, kind](Tape& t) { return ops::activation(t.nodes_[in].value, kind); };
    n.backward_fn = [in, kind](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        const Tensor& xv = t.nodes_[in].value;
        Tensor& gin = t.grad_of(in);
        const std::int64_t count = g.size();
        switch (kind) {
        case Activation::Sigmoid:
            for (std::int64_t i = 0; i < count; ++i) {
                gin[i] += g[i] * y[i] * (1.0 - y[i]);
            }
            break;
        case Activation::Tanh:
            for (std::int64_t i = 0; i < count; ++i) {
                gin[i] += g[i] * (1.0 - y[i] * y[i]);
            }
            break;
        case Activation::Relu:
            // derivative at exactly 0 taken as 0
            for (std::int64_t i = 0; i < count; ++i) {
                gin[i] += xv[i] > 0.0 ? g[i] : 0.0;
            }
            break;
        }
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    check_var(a, "add");
    check_var(b, "add");
    const int an = a.node, bn = b.node;
    if (!nodes_[an].value.same_shape(nodes_[bn].value)) {
        throw DimensionError("add shapes differ: " + shape_str(nodes_[an].value.shape()) +
                             " vs " + shape_str(nodes_[bn].value.shape()));
    }
    Node n;
    n.kind = NodeKind::Add;
    n.inputs = {an, bn};
    n.forward_fn = [an, bn](Tape& t) {
        Tensor out = t.nodes_[an].value;
        out.add_scaled(t.nodes_[bn].value, 1.0);
        out.require_finite("add output");
        return out;
    };
    n.backward_fn = [an, bn](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        t.grad_of(an).add_scaled(g, 1.0);
        t.grad_of(bn).add_scaled(g, 1.0);
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::hadamard(Var a, Var b) {
    check_var(a, "hadamard");
    check_var(b, "hadamard");
    const int an = a.node, bn = b.node;
    if (!nodes_[an].value.same_shape(nodes_[bn].value)) {
        throw DimensionError("hadamard shapes differ");
    }
    Node n;
    n.kind = NodeKind::Mul;
    n.inputs = {an, bn};
    n.forward_fn = [an, bn](Tape& t) {
        const Tensor& av = t.nodes_[an].value;
        const Tensor& bv = t.nodes_[bn].value;
        Tensor out = Tensor::zeros_like(av);
        for (std::int64_t i = 0; i < av.size(); ++i) {
            out[i] = av[i] * bv[i];
        }
        out.require_finite("hadamard output");
        return out;
    };
    n.backward_fn = [an, bn](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& av = t.nodes_[an].value;
        const Tensor& bv = t.nodes_[bn].value;
        Tensor& ga = t.grad_of(an);
        Tensor& gb = t.grad_of(bn);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv[i];
            gb[i] += g[i] * av[i];
        }
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::add_channel_bias(Var x, Var bias) {
    check_var(x, "add_channel_bias");
    check_var(bias, "add_channel_bias");
    const int xn = x.node, bn = bias.node;
    const Tensor& xv = nodes_[xn].value;
    const Tensor& bv = nodes_[bn].value;
    if (xv.rank() != 3 || bv.rank() != 1 || bv.extent(0) != xv.extent(0)) {
        throw DimensionError("add_channel_bias expects x [C,H,W] and bias [C]");
    }
    Node n;
    n.kind = NodeKind::Bias;
    n.inputs = {xn, bn};
    n.forward_fn = [xn, bn](Tape& t) {
        const Tensor& xin = t.nodes_[xn].value;
        const Tensor& b = t.nodes_[bn].value;
        Tensor out = xin;
        const std::int64_t plane = static_cast<std::int64_t>(xin.extent(1)) * xin.extent(2);
        for (int c = 0; c < xin.extent(0); ++c) {
            double* row = out.data() + c * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                row[i] += b[c];
            }
        }
        out.require_finite("add_channel_bias output");
        return out;
    };
    n.backward_fn = [xn, bn](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        t.grad_of(xn).add_scaled(g, 1.0);
        Tensor& gb = t.grad_of(bn);
        const std::int64_t plane = static_cast<std::int64_t>(g.extent(1)) * g.extent(2);
        for (int c = 0; c < g.extent(0); ++c) {
            const double* row = g.data() + c * plane;
            double acc = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) {
                acc += row[i];
            }
            gb[c] += acc;
        }
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::concat_channels(Var a, Var b) {
    check_var(a, "concat_channels");
    check_var(b, "concat_channels");
    const int an = a.node, bn = b.node;
    const Tensor& av = nodes_[an].value;
    const Tensor& bv = nodes_[bn].value;
    if (av.rank() != 3 || bv.rank() != 3 || av.extent(1) != bv.extent(1) ||
        av.extent(2) != bv.extent(2)) {
        throw DimensionError("concat_channels spatial dims differ: " + shape_str(av.shape()) +
                             " vs " + shape_str(bv.shape()));
    }
    Node n;
    n.kind = NodeKind::Concat;
    n.inputs = {an, bn};
    n.forward_fn = [an, bn](Tape& t) {
        const Tensor& x = t.nodes_[an].value;
        const Tensor& y = t.nodes_[bn].value;
        Tensor out({x.extent(0) + y.extent(0), x.extent(1), x.extent(2)});
        std::memcpy(out.data(), x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
        std::memcpy(out.data() + x.size(), y.data(),
                    sizeof(double) * static_cast<std::size_t>(y.size()));
        return out;
    };
    n.backward_fn = [an, bn](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        Tensor& ga = t.grad_of(an);
        Tensor& gb = t.grad_of(bn);
        for (std::int64_t i = 0; i < ga.size(); ++i) {
            ga[i] += g[i];
        }
        const double* tail = g.data() + ga.size();
        for (std::int64_t i = 0; i < gb.size(); ++i) {
            gb[i] += tail[i];
        }
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

Var Tape::mse_loss(Var pred, Var target) {
    check_var(pred, "mse_loss");
    check_var(target, "mse_loss");
    const int pn = pred.node, tn = target.node;
    if (!nodes_[pn].value.same_shape(nodes_[tn].value)) {
        throw DimensionError("mse_loss shapes differ");
    }
    Node n;
    n.kind = NodeKind::Mse;
    n.inputs = {pn, tn};
    n.forward_fn = [pn, tn](Tape& t) {
        return Tensor({1}, {ops::mse(t.nodes_[pn].value, t.nodes_[tn].value)});
    };
    n.backward_fn = [pn, tn](Tape& t, int self) {
        const double g = t.nodes_[self].grad[0];
        const Tensor& p = t.nodes_[pn].value;
        const Tensor& tv = t.nodes_[tn].value;
        Tensor& gp = t.grad_of(pn);
        Tensor& gt = t.grad_of(tn);
        const double scale = 2.0 * g / static_cast<double>(p.size());
        for (std::int64_t i = 0; i < p.size(); ++i) {
            const double d = scale * (p[i] - tv[i]);
            gp[i] += d;
            gt[i] -= d;
        }
    };
    n.value = n.forward_fn(*this);
    return {this, push(std::move(n))};
}

void Tape::backward(Var loss) {
    check_var(loss, "backward");
    if (nodes_[static_cast<std::size_t>(loss.node)].value.size() != 1) {
        throw UsageError("backward requires a scalar loss node");
    }
    for (Node& n : nodes_) {
        n.grad = Tensor();
    }
    grad_of(loss.node)[0] = 1.0;
    for (int i = loss.node; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty()) {
            continue;
        }
        if (n.backward_fn) {
            n.backward_fn(*this, i);
        }
        if (n.kind == NodeKind::ParamLeaf) {
            n.parameter->grad().add_scaled(n.grad, 1.0);
        }
    }
}

void Tape::replay() {
    for (Node& n : nodes_) {
        if (n.forward_fn) {
            n.value = n.forward_fn(*this);
        }
    }
}

std::vector<std::int32_t> Tape::branch_signature() const {
    std::vector<std::int32_t> sig;
    for (const Node& n : nodes_) {
        if (n.kind == NodeKind::Act && n.act == Activation::Relu) {
            const Tensor& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            for (std::int64_t i = 0; i < x.size(); ++i) {
                sig.push_back(x[i] > 0.0 ? 1 : (x[i] < 0.0 ? -1 : 0));
            }
        } else if (n.kind == NodeKind::MaxPool && n.aux) {
            for (std::int64_t idx : *n.aux) {
                sig.push_back(static_cast<std::int32_t>(idx));
            }
        }
    }
    return sig;
}

} // namespace convbench
