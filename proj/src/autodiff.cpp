#include "videomind/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "videomind/error.hpp"

namespace videomind::ad {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), Matrix{}, nullptr, false});
    return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Matrix value) {
    nodes_.push_back(Node{std::move(value), Matrix{}, nullptr, true});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backward backward) {
    bool needs = false;
    for (Var p : parents)
        needs = needs || nodes_[p.id].requires_grad;
    nodes_.push_back(Node{std::move(value), Matrix{}, needs ? std::move(backward) : nullptr, needs});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Matrix& Tape::grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size() || n.grad.rows != n.value.rows)
        n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
    return n.grad;
}

void Tape::backward(Var out, const Matrix& seed) {
    if (seed.rows != value(out).rows || seed.cols != value(out).cols)
        throw ShapeError("backward seed shape mismatch");
    Matrix& g = grad_ref(out.id);
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data[i] += seed.data[i];
    for (std::size_t id = out.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.backward || n.grad.size() == 0)
            continue;
        n.backward(*this, id);
    }
}

namespace {

void require(bool ok, const char* op, const std::string& detail) {
    if (!ok)
        throw ShapeError(std::string(op) + ": " + detail);
}

std::string shape(const Matrix& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

template <class F>
Var elementwise(Var x, F f, double (*deriv)(double x, double y)) {
    const Matrix& xv = x.value();
    Matrix y(xv.rows, xv.cols);
    for (std::size_t i = 0; i < xv.size(); ++i)
        y.data[i] = f(xv.data[i]);
    return x.tape->record(std::move(y), {x}, [x, deriv](Tape& t, std::size_t self) {
        if (!t.requires_grad(x))
            return;
        const Matrix& xv = t.value(x);
        const Matrix& yv = t.value(Var{&t, self});
        const Matrix& up = t.upstream(self);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t i = 0; i < xv.size(); ++i)
            gx.data[i] += up.data[i] * deriv(xv.data[i], yv.data[i]);
    });
}

double sigmoid_scalar(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    require(av.cols == bv.rows, "matmul", shape(av) + " * " + shape(bv));
    Matrix c(av.rows, bv.cols);
    for (std::size_t i = 0; i < av.rows; ++i)
        for (std::size_t k = 0; k < av.cols; ++k) {
            double aik = av(i, k);
            for (std::size_t j = 0; j < bv.cols; ++j)
                c(i, j) += aik * bv(k, j);
        }
    return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Matrix& av = t.value(a);
        const Matrix& bv = t.value(b);
        const Matrix& up = t.upstream(self);
        if (t.requires_grad(a)) {
            Matrix& ga = t.grad_ref(a.id);
            for (std::size_t i = 0; i < av.rows; ++i)
                for (std::size_t k = 0; k < av.cols; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < bv.cols; ++j)
                        s += up(i, j) * bv(k, j);
                    ga(i, k) += s;
                }
        }
        if (t.requires_grad(b)) {
            Matrix& gb = t.grad_ref(b.id);
            for (std::size_t i = 0; i < av.rows; ++i)
                for (std::size_t k = 0; k < av.cols; ++k) {
                    double aik = av(i, k);
                    for (std::size_t j = 0; j < bv.cols; ++j)
                        gb(k, j) += aik * up(i, j);
                }
        }
    });
}

Var matmul_bt(Var a, Var b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    require(av.cols == bv.cols, "matmul_bt", shape(av) + " * " + shape(bv) + "^T");
    Matrix c(av.rows, bv.rows);
    for (std::size_t i = 0; i < av.rows; ++i)
        for (std::size_t j = 0; j < bv.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < av.cols; ++k)
                s += av(i, k) * bv(j, k);
            c(i, j) = s;
        }
    return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Matrix& av = t.value(a);
        const Matrix& bv = t.value(b);
        const Matrix& up = t.upstream(self);
        if (t.requires_grad(a)) {
            Matrix& ga = t.grad_ref(a.id);
            for (std::size_t i = 0; i < av.rows; ++i)
                for (std::size_t j = 0; j < bv.rows; ++j) {
                    double u = up(i, j);
                    for (std::size_t k = 0; k < av.cols; ++k)
                        ga(i, k) += u * bv(j, k);
                }
        }
        if (t.requires_grad(b)) {
            Matrix& gb = t.grad_ref(b.id);
            for (std::size_t i = 0; i < av.rows; ++i)
                for (std::size_t j = 0; j < bv.rows; ++j) {
                    double u = up(i, j);
                    for (std::size_t k = 0; k < av.cols; ++k)
                        gb(j, k) += u * av(i, k);
                }
        }
    });
}

Var linear(Var x, Var w, Var bias) { return add_rowvec(matmul(x, w), bias); }

Var add(Var a, Var b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    require(av.rows == bv.rows && av.cols == bv.cols, "add", shape(av) + " + " + shape(bv));
    Matrix c = av;
    for (std::size_t i = 0; i < c.size(); ++i)
        c.data[i] += bv.data[i];
    return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Matrix& up = t.upstream(self);
        for (Var p : {a, b}) {
            if (!t.requires_grad(p))
                continue;
            Matrix& g = t.grad_ref(p.id);
            for (std::size_t i = 0; i < g.size(); ++i)
                g.data[i] += up.data[i];
        }
    });
}

Var add_rowvec(Var a, Var row) {
    const Matrix& av = a.value();
    const Matrix& rv = row.value();
    require(rv.rows == 1 && rv.cols == av.cols, "add_rowvec", shape(av) + " + " + shape(rv));
    Matrix c = av;
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j)
            c(i, j) += rv(0, j);
    return a.tape->record(std::move(c), {a, row}, [a, row](Tape& t, std::size_t self) {
        const Matrix& up = t.upstream(self);
        if (t.requires_grad(a)) {
            Matrix& g = t.grad_ref(a.id);
            for (std::size_t i = 0; i < g.size(); ++i)
                g.data[i] += up.data[i];
        }
        if (t.requires_grad(row)) {
            Matrix& g = t.grad_ref(row.id);
            for (std::size_t i = 0; i < up.rows; ++i)
                for (std::size_t j = 0; j < up.cols; ++j)
                    g(0, j) += up(i, j);
        }
    });
}

Var scale(Var a, double factor) {
    Matrix c = a.value();
    for (double& v : c.data)
        v *= factor;
    return a.tape->record(std::move(c), {a}, [a, factor](Tape& t, std::size_t self) {
        if (!t.requires_grad(a))
            return;
        const Matrix& up = t.upstream(self);
        Matrix& g = t.grad_ref(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data[i] += factor * up.data[i];
    });
}

Var mul_scalar(Var a, Var s) {
    require(s.value().size() == 1, "mul_scalar", "scalar must be 1x1, got " + shape(s.value()));
    double sv = s.value().data[0];
    Matrix c = a.value();
    for (double& v : c.data)
        v *= sv;
    return a.tape->record(std::move(c), {a, s}, [a, s](Tape& t, std::size_t self) {
        const Matrix& up = t.upstream(self);
        const Matrix& av = t.value(a);
        double sv = t.value(s).data[0];
        if (t.requires_grad(a)) {
            Matrix& g = t.grad_ref(a.id);
            for (std::size_t i = 0; i < g.size(); ++i)
                g.data[i] += sv * up.data[i];
        }
        if (t.requires_grad(s)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < av.size(); ++i)
                acc += av.data[i] * up.data[i];
            t.grad_ref(s.id).data[0] += acc;
        }
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Matrix& xv = x.value();
    const Matrix& gv = gain.value();
    const Matrix& bv = bias.value();
    require(gv.rows == 1 && gv.cols == xv.cols && bv.rows == 1 && bv.cols == xv.cols, "layer_norm",
            "gain/bias must be 1x" + std::to_string(xv.cols));
    const std::size_t n = xv.cols;
    Matrix y(xv.rows, n);
    // Normalized activations and inverse std per row are kept for backward.
    auto xhat = std::make_shared<Matrix>(xv.rows, n);
    auto inv_std = std::make_shared<std::vector<double>>(xv.rows);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < n; ++c)
            mean += xv(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double d = xv(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t c = 0; c < n; ++c) {
            double h = (xv(r, c) - mean) * is;
            (*xhat)(r, c) = h;
            y(r, c) = gv(0, c) * h + bv(0, c);
        }
    }
    return x.tape->record(std::move(y), {x, gain, bias},
                          [x, gain, bias, xhat, inv_std](Tape& t, std::size_t self) {
        const Matrix& up = t.upstream(self);
        const Matrix& gv = t.value(gain);
        const std::size_t n = up.cols;
        if (t.requires_grad(gain)) {
            Matrix& gg = t.grad_ref(gain.id);
            for (std::size_t r = 0; r < up.rows; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    gg(0, c) += up(r, c) * (*xhat)(r, c);
        }
        if (t.requires_grad(bias)) {
            Matrix& gb = t.grad_ref(bias.id);
            for (std::size_t r = 0; r < up.rows; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    gb(0, c) += up(r, c);
        }
        if (t.requires_grad(x)) {
            Matrix& gx = t.grad_ref(x.id);
            std::vector<double> dh(n);
            for (std::size_t r = 0; r < up.rows; ++r) {
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    dh[c] = up(r, c) * gv(0, c);
                    mean_dh += dh[c];
                    mean_dh_h += dh[c] * (*xhat)(r, c);
                }
                mean_dh /= static_cast<double>(n);
                mean_dh_h /= static_cast<double>(n);
                for (std::size_t c = 0; c < n; ++c)
                    gx(r, c) += (*inv_std)[r] * (dh[c] - mean_dh - (*xhat)(r, c) * mean_dh_h);
            }
        }
    });
}

Var gelu(Var x) {
    return elementwise(
        x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
        [](double v, double) {
            double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + v * pdf;
        });
}

Var silu(Var x) {
    return elementwise(
        x, [](double v) { return v * sigmoid_scalar(v); },
        [](double v, double) {
            double s = sigmoid_scalar(v);
            return s + v * s * (1.0 - s);
        });
}

Var sigmoid(Var x) {
    return elementwise(x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
    return elementwise(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var softmax_rows(Var x) {
    const Matrix& xv = x.value();
    Matrix y(xv.rows, xv.cols);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        double mx = xv(r, 0);
        for (std::size_t c = 1; c < xv.cols; ++c)
            mx = std::max(mx, xv(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < xv.cols; ++c) {
            y(r, c) = std::exp(xv(r, c) - mx);
            sum += y(r, c);
        }
        for (std::size_t c = 0; c < xv.cols; ++c)
            y(r, c) /= sum;
    }
    return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x))
            return;
        const Matrix& yv = t.value(Var{&t, self});
        const Matrix& up = t.upstream(self);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t r = 0; r < yv.rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < yv.cols; ++c)
                dot += up(r, c) * yv(r, c);
            for (std::size_t c = 0; c < yv.cols; ++c)
                gx(r, c) += yv(r, c) * (up(r, c) - dot);
        }
    });
}

Var slice_rows(Var x, std::size_t start, std::size_t count) {
    const Matrix& xv = x.value();
    require(start + count <= xv.rows, "slice_rows", "range exceeds " + shape(xv));
    Matrix y(count, xv.cols);
    std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>(start * xv.cols),
              xv.data.begin() + static_cast<std::ptrdiff_t>((start + count) * xv.cols), y.data.begin());
    return x.tape->record(std::move(y), {x}, [x, start](Tape& t, std::size_t self) {
        if (!t.requires_grad(x))
            return;
        const Matrix& up = t.upstream(self);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t i = 0; i < up.size(); ++i)
            gx.data[start * up.cols + i] += up.data[i];
    });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
    const Matrix& xv = x.value();
    require(start + count <= xv.cols, "slice_cols", "range exceeds " + shape(xv));
    Matrix y(xv.rows, count);
    for (std::size_t r = 0; r < xv.rows; ++r)
        for (std::size_t c = 0; c < count; ++c)
            y(r, c) = xv(r, start + c);
    return x.tape->record(std::move(y), {x}, [x, start](Tape& t, std::size_t self) {
        if (!t.requires_grad(x))
            return;
        const Matrix& up = t.upstream(self);
        Matrix& gx = t.grad_ref(x.id);
        for (std::size_t r = 0; r < up.rows; ++r)
            for (std::size_t c = 0; c < up.cols; ++c)
                gx(r, start + c) += up(r, c);
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows", "no inputs");
    std::size_t cols = parts.front().cols(), rows = 0;
    for (Var p : parts) {
        require(p.cols() == cols, "concat_rows", "column mismatch");
        rows += p.rows();
    }
    Matrix y(rows, cols);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Matrix& pv = p.value();
        std::copy(pv.data.begin(), pv.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += pv.size();
    }
    return parts.front().tape->record(std::move(y), parts, [parts](Tape& t, std::size_t self) {
        const Matrix& up = t.upstream(self);
        std::size_t offset = 0;
        for (Var p : parts) {
            std::size_t n = t.value(p).size();
            if (t.requires_grad(p)) {
                Matrix& g = t.grad_ref(p.id);
                for (std::size_t i = 0; i < n; ++i)
                    g.data[i] += up.data[offset + i];
            }
            offset += n;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols", "no inputs");
    std::size_t rows = parts.front().rows(), cols = 0;
    for (Var p : parts) {
        require(p.rows() == rows, "concat_cols", "row mismatch");
        cols += p.cols();
    }
    Matrix y(rows, cols);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Matrix& pv = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pv.cols; ++c)
                y(r, offset + c) = pv(r, c);
        offset += pv.cols;
    }
    return parts.front().tape->record(std::move(y), parts, [parts](Tape& t, std::size_t self) {
        const Matrix& up = t.upstream(self);
        std::size_t offset = 0;
        for (Var p : parts) {
            std::size_t pc = t.value(p).cols;
            if (t.requires_grad(p)) {
                Matrix& g = t.grad_ref(p.id);
                for (std::size_t r = 0; r < up.rows; ++r)
                    for (std::size_t c = 0; c < pc; ++c)
                        g(r, c) += up(r, offset + c);
            }
            offset += pc;
        }
    });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
    const Matrix& xv = x.value();
    require(rows * cols == xv.size(), "reshape", shape(xv) + " -> " + std::to_string(rows) + "x" +
                                                     std::to_string(cols));
    Matrix y(rows, cols, xv.data);
    return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x))
            return;
        const Matrix& up = t.upstream(self);
        Matrix& g = t.grad_ref(x.id);
        for (std::size_t i = 0; i < up.size(); ++i)
            g.data[i] += up.data[i];
    });
}

Var unfold3(Var x) {
    const Matrix& xv = x.value();
    const std::size_t n = xv.rows, c = xv.cols;
    Matrix y(n, 3 * c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
            if ((i == 0 && k == 0) || (i + 1 == n && k == 2))
                continue;
            std::size_t src = i + k - 1;
            for (std::size_t j = 0; j < c; ++j)
                y(i, k * c + j) = xv(src, j);
        }
    return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x))
            return;
        const Matrix& up = t.upstream(self);
        Matrix& g = t.grad_ref(x.id);
        const std::size_t n = g.rows, c = g.cols;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < 3; ++k) {
                if ((i == 0 && k == 0) || (i + 1 == n && k == 2))
                    continue;
                std::size_t src = i + k - 1;
                for (std::size_t j = 0; j < c; ++j)
                    g(src, j) += up(i, k * c + j);
            }
    });
}

Var cosine_rows(Var x, Var r) {
    constexpr double kMinNorm = 1e-12;
    const Matrix& xv = x.value();
    const Matrix& rv = r.value();
    require(rv.rows == 1 && rv.cols == xv.cols, "cosine_rows", shape(xv) + " vs " + shape(rv));
    double rnorm = 0.0;
    for (double v : rv.data)
        rnorm += v * v;
    rnorm = std::max(std::sqrt(rnorm), kMinNorm);
    auto xnorm = std::make_shared<std::vector<double>>(xv.rows);
    Matrix s(xv.rows, 1);
    for (std::size_t i = 0; i < xv.rows; ++i) {
        double dot = 0.0, nn = 0.0;
        for (std::size_t j = 0; j < xv.cols; ++j) {
            dot += xv(i, j) * rv(0, j);
            nn += xv(i, j) * xv(i, j);
        }
        (*xnorm)[i] = std::max(std::sqrt(nn), kMinNorm);
        s(i, 0) = dot / ((*xnorm)[i] * rnorm);
    }
    return x.tape->record(std::move(s), {x, r}, [x, r, xnorm, rnorm](Tape& t, std::size_t self) {
        const Matrix& xv = t.value(x);
        const Matrix& rv = t.value(r);
        const Matrix& sv = t.value(Var{&t, self});
        const Matrix& up = t.upstream(self);
        const bool gx_on = t.requires_grad(x), gr_on = t.requires_grad(r);
        Matrix* gx = gx_on ? &t.grad_ref(x.id) : nullptr;
        Matrix* gr = gr_on ? &t.grad_ref(r.id) : nullptr;
        for (std::size_t i = 0; i < xv.rows; ++i) {
            double u = up(i, 0), si = sv(i, 0), xn = (*xnorm)[i];
            for (std::size_t j = 0; j < xv.cols; ++j) {
                if (gx_on)
                    (*gx)(i, j) += u * (rv(0, j) / (xn * rnorm) - si * xv(i, j) / (xn * xn));
                if (gr_on)
                    (*gr)(0, j) += u * (xv(i, j) / (xn * rnorm) - si * rv(0, j) / (rnorm * rnorm));
            }
        }
    });
}

}  // namespace videomind::ad
