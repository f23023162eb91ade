#include "dpdsr/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpdsr::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct BroadcastPlan {
    Shape out;
    std::size_t outer = 1;
    std::size_t inner = 0;
    bool a_full = true;
    bool b_full = true;
};

BroadcastPlan plan_broadcast(const char* op, const Tensor& a, const Tensor& b) {
    BroadcastPlan plan;
    if (a.shape() == b.shape()) {
        plan.out = a.shape();
        plan.inner = a.numel();
    } else if (is_suffix(b.shape(), a.shape())) {
        plan.out = a.shape();
        plan.inner = b.numel();
        plan.outer = plan.inner ? a.numel() / plan.inner : 0;
        plan.b_full = false;
    } else if (is_suffix(a.shape(), b.shape())) {
        plan.out = b.shape();
        plan.inner = a.numel();
        plan.outer = plan.inner ? b.numel() / plan.inner : 0;
        plan.a_full = false;
    } else {
        throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                         " and " + to_string(b.shape()));
    }
    return plan;
}

// f(a, b) -> value; da(a, b) and db(a, b) -> local partials.
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
    const BroadcastPlan p = plan_broadcast(op, a, b);
    Buffer out(p.outer * p.inner);
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t o = 0; o < p.outer; ++o) {
        const std::size_t base = o * p.inner;
        const std::size_t abase = p.a_full ? base : 0;
        const std::size_t bbase = p.b_full ? base : 0;
        for (std::size_t i = 0; i < p.inner; ++i) out[base + i] = f(av[abase + i], bv[bbase + i]);
    }
    return make_result(op, p.out, std::move(out), {a, b}, [p, da, db](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const auto& g = self.grad;
        const auto& av = na.value;
        const auto& bv = nb.value;
        double* ga = na.requires_grad ? na.ensure_grad().data() : nullptr;
        double* gb = nb.requires_grad ? nb.ensure_grad().data() : nullptr;
        for (std::size_t o = 0; o < p.outer; ++o) {
            const std::size_t base = o * p.inner;
            const std::size_t abase = p.a_full ? base : 0;
            const std::size_t bbase = p.b_full ? base : 0;
            for (std::size_t i = 0; i < p.inner; ++i) {
                const double x = av[abase + i];
                const double y = bv[bbase + i];
                if (ga) ga[abase + i] += g[base + i] * da(x, y);
                if (gb) gb[bbase + i] += g[base + i] * db(x, y);
            }
        }
    });
}

// f(x) -> y; d(x, y) -> dy/dx.
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D d) {
    const auto av = a.data();
    Buffer out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return make_result(op, a.shape(), std::move(out), {a}, [d](Node& self) {
        Node& in = *self.inputs[0];
        auto& gi = in.ensure_grad();
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i] * d(in.value[i], self.value[i]);
    });
}

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t extent = 0;
    std::size_t inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape));
    }
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
    return unary(
        "add_scalar", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
    return unary(
        "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
    return unary(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(
        "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
    return unary(
        "abs", a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
    return unary(
        "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    Buffer out(static_cast<std::size_t>(m * n));
    MapMat(out.data(), m, n).noalias() = ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
    return make_result("matmul", Shape{a.dim(0), b.dim(1)}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        ConstMapMat g(self.grad.data(), m, n);
        if (na.requires_grad) {
            MapMat(na.ensure_grad().data(), m, k).noalias() += g * ConstMapMat(nb.value.data(), k, n).transpose();
        }
        if (nb.requires_grad) {
            MapMat(nb.ensure_grad().data(), k, n).noalias() += ConstMapMat(na.value.data(), m, k).transpose() * g;
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result("sum", Shape{}, {s}, {a}, [](Node& self) {
        auto& gi = self.inputs[0]->ensure_grad();
        const double g = self.grad[0];
        for (auto& v : gi) v += g;
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
    const AxisSplit s = split_axis("sum_axis", a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Buffer out(s.outer * s.inner, 0.0);
    const auto av = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
            for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += av[(o * s.extent + e) * s.inner + i];
    return make_result("sum_axis", std::move(out_shape), std::move(out), {a}, [s](Node& self) {
        auto& gi = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t e = 0; e < s.extent; ++e)
                for (std::size_t i = 0; i < s.inner; ++i) gi[(o * s.extent + e) * s.inner + i] += self.grad[o * s.inner + i];
    });
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
    const std::size_t extent = split_axis("mean_axis", a.shape(), axis).extent;
    if (extent == 0) throw ShapeError("mean_axis: empty axis");
    return scale(sum_axis(a, axis), 1.0 / static_cast<double>(extent));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
    }
    Buffer out(a.data().begin(), a.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
        auto& gi = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis >= ref.size()) throw ShapeError("concat: axis out of range for shape " + to_string(ref));
    std::vector<std::size_t> extents;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == ref.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == ref[i];
        if (!ok) throw ShapeError("concat: incompatible shapes " + to_string(ref) + " and " + to_string(s));
        extents.push_back(s[axis]);
        total += s[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = total;
    const AxisSplit s = split_axis("concat", out_shape, axis);
    Buffer out(numel_of(out_shape));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto pv = parts[k].data();
        const std::size_t width = extents[k] * s.inner;
        for (std::size_t o = 0; o < s.outer; ++o)
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * width), width,
                        out.begin() + static_cast<std::ptrdiff_t>(o * s.extent * s.inner + offset * s.inner));
        offset += extents[k];
    }
    return make_result("concat", std::move(out_shape), std::move(out), parts, [s, extents](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            Node& in = *self.inputs[k];
            const std::size_t width = extents[k] * s.inner;
            if (in.requires_grad) {
                auto& gi = in.ensure_grad();
                for (std::size_t o = 0; o < s.outer; ++o) {
                    const double* src = self.grad.data() + o * s.extent * s.inner + offset * s.inner;
                    double* dst = gi.data() + o * width;
                    for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                }
            }
            offset += extents[k];
        }
    });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const AxisSplit s = split_axis("slice", a.shape(), axis);
    if (begin > end || end > s.extent) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " + to_string(a.shape()));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = end - begin;
    const std::size_t width = (end - begin) * s.inner;
    Buffer out(s.outer * width);
    const auto av = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(av.begin() + static_cast<std::ptrdiff_t>((o * s.extent + begin) * s.inner), width,
                    out.begin() + static_cast<std::ptrdiff_t>(o * width));
    return make_result("slice", std::move(out_shape), std::move(out), {a}, [s, begin, width](Node& self) {
        auto& gi = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o) {
            double* dst = gi.data() + (o * s.extent + begin) * s.inner;
            const double* src = self.grad.data() + o * width;
            for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
        }
    });
}

Tensor select(const Tensor& a, std::size_t axis, std::size_t index) {
    Shape out_shape = a.shape();
    if (axis >= out_shape.size()) throw ShapeError("select: axis out of range for shape " + to_string(a.shape()));
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    const AxisSplit s = split_axis("select", a.shape(), axis);
    if (index >= s.extent) throw ShapeError("select: index out of range for shape " + to_string(a.shape()));
    Buffer out(s.outer * s.inner);
    const auto av = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(av.begin() + static_cast<std::ptrdiff_t>((o * s.extent + index) * s.inner), s.inner,
                    out.begin() + static_cast<std::ptrdiff_t>(o * s.inner));
    return make_result("select", std::move(out_shape), std::move(out), {a}, [s, index](Node& self) {
        auto& gi = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o) {
            double* dst = gi.data() + (o * s.extent + index) * s.inner;
            const double* src = self.grad.data() + o * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
    });
}

Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("stack: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis > ref.size()) throw ShapeError("stack: axis out of range for shape " + to_string(ref));
    for (const auto& p : parts) {
        if (p.shape() != ref) throw ShapeError("stack: mismatched shapes " + to_string(ref) + " and " + to_string(p.shape()));
    }
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
    std::size_t inner = 1;
    for (std::size_t i = axis; i < ref.size(); ++i) inner *= ref[i];
    const std::size_t count = parts.size();
    Shape out_shape = ref;
    out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
    Buffer out(outer * count * inner);
    for (std::size_t k = 0; k < count; ++k) {
        const auto pv = parts[k].data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * inner), inner,
                        out.begin() + static_cast<std::ptrdiff_t>((o * count + k) * inner));
    }
    return make_result("stack", std::move(out_shape), std::move(out), parts, [outer, inner, count](Node& self) {
        for (std::size_t k = 0; k < count; ++k) {
            Node& in = *self.inputs[k];
            if (!in.requires_grad) continue;
            auto& gi = in.ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
                const double* src = self.grad.data() + (o * count + k) * inner;
                double* dst = gi.data() + o * inner;
                for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
        }
    });
}

Tensor repeat_rows(const Tensor& a, std::size_t copies) {
    if (copies == 0) throw ShapeError("repeat_rows: zero copies");
    if (copies == 1) return a;
    return concat(std::vector<Tensor>(copies, a), 0);
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t dilation, Padding padding) {
    if (dilation == 0) throw std::invalid_argument("conv1d: dilation must be positive");
    if (input.rank() != 3 || kernel.rank() != 3 || input.dim(2) != kernel.dim(1)) {
        throw ShapeError("conv1d: shape mismatch input " + to_string(input.shape()) + " kernel " +
                         to_string(kernel.shape()));
    }
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    const std::size_t taps = kernel.dim(0);
    const std::size_t cin = kernel.dim(1);
    const std::size_t cout = kernel.dim(2);
    if (steps == 0 || batch == 0) throw std::invalid_argument("conv1d: empty input " + to_string(input.shape()));
    if (taps == 0) throw ShapeError("conv1d: empty kernel");

    const std::size_t total_pad = (taps - 1) * dilation;
    const std::size_t left = padding == Padding::causal ? total_pad : (total_pad + 1) / 2;

    // Output row t reads input row t + k*dilation - left for tap k.
    struct TapRange {
        std::size_t out_begin = 0;
        std::size_t in_begin = 0;
        std::size_t count = 0;
    };
    std::vector<TapRange> ranges(taps);
    for (std::size_t k = 0; k < taps; ++k) {
        const auto shift = static_cast<std::ptrdiff_t>(k * dilation) - static_cast<std::ptrdiff_t>(left);
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(steps),
                                                           static_cast<std::ptrdiff_t>(steps) - shift);
        if (t1 > t0) {
            ranges[k] = {static_cast<std::size_t>(t0), static_cast<std::size_t>(t0 + shift),
                         static_cast<std::size_t>(t1 - t0)};
        }
    }

    Buffer out(batch * steps * cout, 0.0);
    const double* x = input.data().data();
    const double* w = kernel.data().data();
    for (std::size_t b = 0; b < batch; ++b) {
        MapMat y(out.data() + b * steps * cout, static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(cout));
        for (std::size_t k = 0; k < taps; ++k) {
            const TapRange& r = ranges[k];
            if (!r.count) continue;
            ConstMapMat xs(x + (b * steps + r.in_begin) * cin, static_cast<Eigen::Index>(r.count),
                           static_cast<Eigen::Index>(cin));
            ConstMapMat wk(w + k * cin * cout, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout));
            y.middleRows(static_cast<Eigen::Index>(r.out_begin), static_cast<Eigen::Index>(r.count)).noalias() += xs * wk;
        }
    }

    return make_result(
        "conv1d", Shape{batch, steps, cout}, std::move(out), {input, kernel},
        [ranges, batch, steps, taps, cin, cout](Node& self) {
            Node& nx = *self.inputs[0];
            Node& nw = *self.inputs[1];
            double* gx = nx.requires_grad ? nx.ensure_grad().data() : nullptr;
            double* gw = nw.requires_grad ? nw.ensure_grad().data() : nullptr;
            for (std::size_t b = 0; b < batch; ++b) {
                ConstMapMat gy(self.grad.data() + b * steps * cout, static_cast<Eigen::Index>(steps),
                               static_cast<Eigen::Index>(cout));
                for (std::size_t k = 0; k < taps; ++k) {
                    const TapRange& r = ranges[k];
                    if (!r.count) continue;
                    const auto rows = static_cast<Eigen::Index>(r.count);
                    auto gys = gy.middleRows(static_cast<Eigen::Index>(r.out_begin), rows);
                    ConstMapMat wk(nw.value.data() + k * cin * cout, static_cast<Eigen::Index>(cin),
                                   static_cast<Eigen::Index>(cout));
                    if (gx) {
                        MapMat(gx + (b * steps + r.in_begin) * cin, rows, static_cast<Eigen::Index>(cin)).noalias() +=
                            gys * wk.transpose();
                    }
                    if (gw) {
                        ConstMapMat xs(nx.value.data() + (b * steps + r.in_begin) * cin, rows,
                                       static_cast<Eigen::Index>(cin));
                        MapMat(gw + k * cin * cout, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout))
                            .noalias() += xs.transpose() * gys;
                    }
                }
            }
        });
}

std::size_t receptive_field(std::size_t kernel_size, const std::vector<std::size_t>& dilations) {
    std::size_t total = 0;
    for (auto d : dilations) total += d;
    return 1 + (kernel_size - 1) * total;
}

namespace {

void require_positive(const Tensor& var, const char* op) {
    for (double v : var.data()) {
        if (!(v > 0.0)) throw std::domain_error(std::string(op) + ": variance must be positive");
    }
}

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

}  // namespace

Tensor gaussian_nll(const Tensor& x, const Tensor& mu, const Tensor& var) {
    require_positive(var, "gaussian_nll");
    const Tensor diff = sub(x, mu);
    const Tensor quad = mul(square(diff), scale(exp(neg(log(var))), 0.5));
    const Tensor logdet = scale(add_scalar(log(var), kLog2Pi), 0.5);
    return sum(add(quad, logdet));
}

Tensor gaussian_nll_logvar(const Tensor& x, const Tensor& mu, const Tensor& logvar) {
    const Tensor diff = sub(x, mu);
    const Tensor quad = mul(square(diff), scale(exp(neg(logvar)), 0.5));
    const Tensor logdet = scale(add_scalar(logvar, kLog2Pi), 0.5);
    return sum(add(quad, logdet));
}

Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& var) {
    require_positive(var, "kl_diag_gaussian");
    if (mu.shape() != var.shape()) {
        throw ShapeError("kl_diag_gaussian: shape mismatch " + to_string(mu.shape()) + " and " +
                         to_string(var.shape()));
    }
    return scale(sum(sub(add_scalar(add(var, square(mu)), -1.0), log(var))), 0.5);
}

Tensor kl_diag_gaussian_logvar(const Tensor& mu, const Tensor& logvar) {
    if (mu.shape() != logvar.shape()) {
        throw ShapeError("kl_diag_gaussian: shape mismatch " + to_string(mu.shape()) + " and " +
                         to_string(logvar.shape()));
    }
    return scale(sum(sub(add_scalar(add(exp(logvar), square(mu)), -1.0), logvar)), 0.5);
}

}  // namespace dpdsr::ad
