#include "har/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace har::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;
constexpr double kLogFloor = 1e-300; // keeps -log(p) finite for degenerate probs

void check_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                    ", got shape " + Tensor::shape_string(t.shape()));
    }
}

} // namespace

Tape::ValueId Tape::push(Tensor value, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
    return nodes_.size() - 1;
}

Tape::ValueId Tape::input(Tensor v) {
    return push(std::move(v));
}

Tape::ValueId Tape::param(Parameter& p) {
    ValueId id = push(p.value);
    Parameter* pp = &p;
    nodes_[id].back = [id, pp](Tape& t) {
        const Tensor& g = t.nodes_[id].grad;
        double* dst = pp->grad.data();
        const double* src = g.data();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
    };
    return id;
}

void Tape::backward(ValueId root) {
    if (root >= nodes_.size()) throw std::invalid_argument("backward: bad root id");
    if (nodes_[root].value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    for (ValueId i = 0; i <= root; ++i) {
        nodes_[i].grad = Tensor(nodes_[i].value.shape());
    }
    nodes_[root].grad[0] = 1.0;
    for (ValueId i = root + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

// ---------------------------------------------------------------------------
// conv2d

Tape::ValueId Tape::conv2d(ValueId x, ValueId kernels, ValueId bias, Padding2d pad) {
    const Tensor& in = value(x);
    const Tensor& k = value(kernels);
    const Tensor& b = value(bias);
    check_rank(in, 4, "conv2d input");
    check_rank(k, 4, "conv2d kernels");
    check_rank(b, 1, "conv2d bias");

    const std::size_t n = in.dim(0), cin = in.dim(1), h = in.dim(2), w = in.dim(3);
    const std::size_t cout = k.dim(0), kp = k.dim(2), kq = k.dim(3);
    if (k.dim(1) != cin) throw std::invalid_argument("conv2d: kernel input channels mismatch");
    if (b.dim(0) != cout) throw std::invalid_argument("conv2d: bias size mismatch");

    const std::size_t ph = h + pad.top + pad.bottom;
    const std::size_t pw = w + pad.left + pad.right;
    if (kp > ph || kq > pw) throw std::invalid_argument("conv2d: kernel larger than padded input");

    const std::size_t oh = ph - kp + 1;
    const std::size_t ow = pw - kq + 1;

    // Padded copy keeps the inner loops branch-free.
    Tensor padded({n, cin, ph, pw});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t i = 0; i < h; ++i) {
                const double* src = in.data() + ((ni * cin + ci) * h + i) * w;
                double* dst = padded.data() + ((ni * cin + ci) * ph + (i + pad.top)) * pw + pad.left;
                std::memcpy(dst, src, w * sizeof(double));
            }

    Tensor out({n, cout, oh, ow});
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t co = 0; co < cout; ++co) {
            double* oplane = out.data() + (ni * cout + co) * oh * ow;
            std::fill(oplane, oplane + oh * ow, b[co]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* pplane = padded.data() + (ni * cin + ci) * ph * pw;
                const double* kplane = k.data() + (co * cin + ci) * kp * kq;
                for (std::size_t p = 0; p < kp; ++p) {
                    for (std::size_t q = 0; q < kq; ++q) {
                        const double kv = kplane[p * kq + q];
                        if (kv == 0.0) continue;
                        for (std::size_t i = 0; i < oh; ++i) {
                            const double* prow = pplane + (i + p) * pw + q;
                            double* orow = oplane + i * ow;
                            for (std::size_t j = 0; j < ow; ++j) orow[j] += kv * prow[j];
                        }
                    }
                }
            }
        }
    }

    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x, kernels, bias, pad, padded = std::move(padded), n, cin, cout, h, w, ph, pw, kp, kq,
                       oh, ow](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& k = t.value(kernels);
        Tensor& gx = t.grad_mut(x);
        Tensor& gk = t.grad_mut(kernels);
        Tensor& gb = t.grad_mut(bias);

        Tensor gpad({n, cin, ph, pw});
        for (std::size_t ni = 0; ni < n; ++ni) {
            for (std::size_t co = 0; co < cout; ++co) {
                const double* gyplane = gy.data() + (ni * cout + co) * oh * ow;
                double bsum = 0.0;
                for (std::size_t e = 0; e < oh * ow; ++e) bsum += gyplane[e];
                gb[co] += bsum;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    const double* pplane = padded.data() + (ni * cin + ci) * ph * pw;
                    double* gpplane = gpad.data() + (ni * cin + ci) * ph * pw;
                    const double* kplane = k.data() + (co * cin + ci) * kp * kq;
                    double* gkplane = gk.data() + (co * cin + ci) * kp * kq;
                    for (std::size_t p = 0; p < kp; ++p) {
                        for (std::size_t q = 0; q < kq; ++q) {
                            const double kv = kplane[p * kq + q];
                            double ksum = 0.0;
                            for (std::size_t i = 0; i < oh; ++i) {
                                const double* gyrow = gyplane + i * ow;
                                const double* prow = pplane + (i + p) * pw + q;
                                double* gprow = gpplane + (i + p) * pw + q;
                                for (std::size_t j = 0; j < ow; ++j) {
                                    ksum += gyrow[j] * prow[j];
                                    gprow[j] += kv * gyrow[j];
                                }
                            }
                            gkplane[p * kq + q] += ksum;
                        }
                    }
                }
            }
        }
        // Crop the padding off the input gradient.
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t ci = 0; ci < cin; ++ci)
                for (std::size_t i = 0; i < h; ++i) {
                    const double* src = gpad.data() + ((ni * cin + ci) * ph + (i + pad.top)) * pw + pad.left;
                    double* dst = gx.data() + ((ni * cin + ci) * h + i) * w;
                    for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
                }
    };
    return id;
}

// ---------------------------------------------------------------------------
// batch_norm

Tape::ValueId Tape::batch_norm(ValueId x, ValueId gamma, ValueId beta, BatchNormState& state, Mode mode) {
    const Tensor& in = value(x);
    const Tensor& g = value(gamma);
    const Tensor& bt = value(beta);
    if (in.rank() < 2) throw std::invalid_argument("batch_norm: input must have a channel axis");

    const std::size_t n = in.dim(0);
    const std::size_t c = in.dim(1);
    std::size_t r = 1;
    for (std::size_t d = 2; d < in.rank(); ++d) r *= in.dim(d);
    if (g.size() != c || bt.size() != c) throw std::invalid_argument("batch_norm: gamma/beta size mismatch");
    if (state.mean.size() != c) throw std::invalid_argument("batch_norm: running-stat size mismatch");
    if (mode == Mode::Train && n < 2) throw std::invalid_argument("batch_norm: train mode needs batch size >= 2");

    const std::size_t m = n * r;
    Tensor mean({c}), var({c});
    if (mode == Mode::Train) {
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* row = in.data() + (ni * c + ci) * r;
                double s = 0.0;
                for (std::size_t e = 0; e < r; ++e) s += row[e];
                mean[ci] += s;
            }
        for (std::size_t ci = 0; ci < c; ++ci) mean[ci] /= static_cast<double>(m);
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* row = in.data() + (ni * c + ci) * r;
                double s = 0.0;
                for (std::size_t e = 0; e < r; ++e) {
                    const double d = row[e] - mean[ci];
                    s += d * d;
                }
                var[ci] += s;
            }
        for (std::size_t ci = 0; ci < c; ++ci) var[ci] /= static_cast<double>(m);
        for (std::size_t ci = 0; ci < c; ++ci) {
            state.mean[ci] = kBnMomentum * state.mean[ci] + (1.0 - kBnMomentum) * mean[ci];
            state.var[ci] = kBnMomentum * state.var[ci] + (1.0 - kBnMomentum) * var[ci];
        }
    } else {
        mean = state.mean;
        var = state.var;
    }

    Tensor inv_std({c});
    for (std::size_t ci = 0; ci < c; ++ci) inv_std[ci] = 1.0 / std::sqrt(var[ci] + kBnEps);

    Tensor xhat(in.shape());
    Tensor out(in.shape());
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double* row = in.data() + (ni * c + ci) * r;
            double* hrow = xhat.data() + (ni * c + ci) * r;
            double* orow = out.data() + (ni * c + ci) * r;
            const double mu = mean[ci], is = inv_std[ci], ga = g[ci], be = bt[ci];
            for (std::size_t e = 0; e < r; ++e) {
                const double xh = (row[e] - mu) * is;
                hrow[e] = xh;
                orow[e] = ga * xh + be;
            }
        }

    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x, gamma, beta, mode, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c,
                       r](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& g = t.value(gamma);
        Tensor& gx = t.grad_mut(x);
        Tensor& gg = t.grad_mut(gamma);
        Tensor& gb = t.grad_mut(beta);
        const std::size_t m = n * r;

        std::vector<double> sum_gy(c, 0.0), sum_gy_xh(c, 0.0);
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* gyrow = gy.data() + (ni * c + ci) * r;
                const double* hrow = xhat.data() + (ni * c + ci) * r;
                double a = 0.0, b = 0.0;
                for (std::size_t e = 0; e < r; ++e) {
                    a += gyrow[e];
                    b += gyrow[e] * hrow[e];
                }
                sum_gy[ci] += a;
                sum_gy_xh[ci] += b;
            }
        for (std::size_t ci = 0; ci < c; ++ci) {
            gb[ci] += sum_gy[ci];
            gg[ci] += sum_gy_xh[ci];
        }
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* gyrow = gy.data() + (ni * c + ci) * r;
                const double* hrow = xhat.data() + (ni * c + ci) * r;
                double* gxrow = gx.data() + (ni * c + ci) * r;
                const double scale = g[ci] * inv_std[ci];
                if (mode == Mode::Train) {
                    const double mg = sum_gy[ci] / static_cast<double>(m);
                    const double mgx = sum_gy_xh[ci] / static_cast<double>(m);
                    for (std::size_t e = 0; e < r; ++e) {
                        gxrow[e] += scale * (gyrow[e] - mg - hrow[e] * mgx);
                    }
                } else {
                    for (std::size_t e = 0; e < r; ++e) gxrow[e] += scale * gyrow[e];
                }
            }
    };
    return id;
}

// ---------------------------------------------------------------------------
// elementwise

Tape::ValueId Tape::relu(ValueId x) {
    const Tensor& in = value(x);
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& in = t.value(x);
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < gy.size(); ++i) {
            if (in[i] > 0.0) gx[i] += gy[i];
        }
    };
    return id;
}

Tape::ValueId Tape::tanh(ValueId x) {
    const Tensor& in = value(x);
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& y = t.value(id);
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (1.0 - y[i] * y[i]);
    };
    return id;
}

Tape::ValueId Tape::max_pool2x2(ValueId x) {
    const Tensor& in = value(x);
    check_rank(in, 4, "max_pool2x2 input");
    const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    const std::size_t wh = h >= 2 ? 2 : 1;
    const std::size_t ww = w >= 2 ? 2 : 1;
    const std::size_t oh = h / wh, ow = w / ww;

    Tensor out({n, c, oh, ow});
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double* plane = in.data() + (ni * c + ci) * h * w;
            double* oplane = out.data() + (ni * c + ci) * oh * ow;
            std::size_t* aplane = argmax.data() + (ni * c + ci) * oh * ow;
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double best = plane[(i * wh) * w + j * ww];
                    std::size_t besti = (i * wh) * w + j * ww;
                    for (std::size_t a = 0; a < wh; ++a)
                        for (std::size_t b = 0; b < ww; ++b) {
                            std::size_t idx = (i * wh + a) * w + j * ww + b;
                            if (plane[idx] > best) {
                                best = plane[idx];
                                besti = idx;
                            }
                        }
                    oplane[i * ow + j] = best;
                    aplane[i * ow + j] = (ni * c + ci) * h * w + besti;
                }
        }

    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x, argmax = std::move(argmax)](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
    };
    return id;
}

Tape::ValueId Tape::concat_channels(std::span<const ValueId> xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const Tensor& first = value(xs[0]);
    check_rank(first, 4, "concat_channels input");
    const std::size_t n = first.dim(0), h = first.dim(2), w = first.dim(3);
    std::size_t ctotal = 0;
    for (ValueId v : xs) {
        const Tensor& t = value(v);
        if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
            throw std::invalid_argument("concat_channels: shape mismatch");
        }
        ctotal += t.dim(1);
    }

    Tensor out({n, ctotal, h, w});
    const std::size_t plane = h * w;
    std::size_t coff = 0;
    for (ValueId v : xs) {
        const Tensor& t = value(v);
        const std::size_t ci = t.dim(1);
        for (std::size_t ni = 0; ni < n; ++ni) {
            std::memcpy(out.data() + (ni * ctotal + coff) * plane, t.data() + ni * ci * plane,
                        ci * plane * sizeof(double));
        }
        coff += ci;
    }

    std::vector<ValueId> inputs(xs.begin(), xs.end());
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, inputs, n, ctotal, plane](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        std::size_t coff = 0;
        for (ValueId v : inputs) {
            Tensor& gx = t.grad_mut(v);
            const std::size_t ci = t.value(v).dim(1);
            for (std::size_t ni = 0; ni < n; ++ni) {
                const double* src = gy.data() + (ni * ctotal + coff) * plane;
                double* dst = gx.data() + ni * ci * plane;
                for (std::size_t e = 0; e < ci * plane; ++e) dst[e] += src[e];
            }
            coff += ci;
        }
    };
    return id;
}

Tape::ValueId Tape::reshape(ValueId x, Shape new_shape) {
    Tensor out = value(x).reshaped(std::move(new_shape));
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    };
    return id;
}

// ---------------------------------------------------------------------------
// dense / softmax / attention pieces

Tape::ValueId Tape::dense(ValueId x, ValueId w, ValueId b, Activation act) {
    const Tensor& in = value(x);
    const Tensor& wm = value(w);
    const Tensor& bv = value(b);
    check_rank(in, 2, "dense input");
    check_rank(wm, 2, "dense weights");
    const std::size_t n = in.dim(0), k = in.dim(1), j = wm.dim(0);
    if (wm.dim(1) != k) throw std::invalid_argument("dense: weight shape mismatch");
    if (bv.size() != j) throw std::invalid_argument("dense: bias size mismatch");

    Tensor pre({n, j});
    for (std::size_t ni = 0; ni < n; ++ni) {
        const double* xrow = in.data() + ni * k;
        double* prow = pre.data() + ni * j;
        for (std::size_t ji = 0; ji < j; ++ji) {
            const double* wrow = wm.data() + ji * k;
            double s = bv[ji];
            for (std::size_t ki = 0; ki < k; ++ki) s += xrow[ki] * wrow[ki];
            prow[ji] = s;
        }
    }

    Tensor out({n, j});
    switch (act) {
        case Activation::None:
            out = pre;
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < pre.size(); ++i) out[i] = std::tanh(pre[i]);
            break;
    }

    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x, w, b, act, pre = std::move(pre), n, k, j](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& y = t.value(id);
        const Tensor& in = t.value(x);
        const Tensor& wm = t.value(w);
        Tensor& gx = t.grad_mut(x);
        Tensor& gw = t.grad_mut(w);
        Tensor& gb = t.grad_mut(b);

        Tensor gpre({n, j});
        for (std::size_t i = 0; i < gpre.size(); ++i) {
            double d = 1.0;
            if (act == Activation::Relu) d = pre[i] > 0.0 ? 1.0 : 0.0;
            else if (act == Activation::Tanh) d = 1.0 - y[i] * y[i];
            gpre[i] = gy[i] * d;
        }
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* grow = gpre.data() + ni * j;
            const double* xrow = in.data() + ni * k;
            double* gxrow = gx.data() + ni * k;
            for (std::size_t ji = 0; ji < j; ++ji) {
                const double g = grow[ji];
                if (g == 0.0) continue;
                gb[ji] += g;
                const double* wrow = wm.data() + ji * k;
                double* gwrow = gw.data() + ji * k;
                for (std::size_t ki = 0; ki < k; ++ki) {
                    gwrow[ki] += g * xrow[ki];
                    gxrow[ki] += g * wrow[ki];
                }
            }
        }
    };
    return id;
}

Tape::ValueId Tape::softmax_rows(ValueId x) {
    const Tensor& in = value(x);
    check_rank(in, 2, "softmax input");
    const std::size_t n = in.dim(0), m = in.dim(1);
    Tensor out({n, m});
    for (std::size_t ni = 0; ni < n; ++ni) {
        const double* row = in.data() + ni * m;
        double* orow = out.data() + ni * m;
        double mx = row[0];
        for (std::size_t mi = 1; mi < m; ++mi) mx = std::max(mx, row[mi]);
        double sum = 0.0;
        for (std::size_t mi = 0; mi < m; ++mi) {
            orow[mi] = std::exp(row[mi] - mx);
            sum += orow[mi];
        }
        for (std::size_t mi = 0; mi < m; ++mi) orow[mi] /= sum;
    }
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x, n, m](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& y = t.value(id);
        Tensor& gx = t.grad_mut(x);
        for (std::size_t ni = 0; ni < n; ++ni) {
            const double* yrow = y.data() + ni * m;
            const double* grow = gy.data() + ni * m;
            double* gxrow = gx.data() + ni * m;
            double dot = 0.0;
            for (std::size_t mi = 0; mi < m; ++mi) dot += grow[mi] * yrow[mi];
            for (std::size_t mi = 0; mi < m; ++mi) gxrow[mi] += yrow[mi] * (grow[mi] - dot);
        }
    };
    return id;
}

Tape::ValueId Tape::rows_dot(ValueId f, ValueId w) {
    const Tensor& fm = value(f);
    const Tensor& wv = value(w);
    check_rank(fm, 3, "rows_dot input");
    check_rank(wv, 1, "rows_dot weight");
    const std::size_t n = fm.dim(0), s = fm.dim(1), l = fm.dim(2);
    if (wv.size() != l) throw std::invalid_argument("rows_dot: weight length mismatch");

    Tensor out({n, s});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t si = 0; si < s; ++si) {
            const double* row = fm.data() + (ni * s + si) * l;
            double acc = 0.0;
            for (std::size_t li = 0; li < l; ++li) acc += row[li] * wv[li];
            out[ni * s + si] = acc;
        }
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, f, w, n, s, l](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& fm = t.value(f);
        const Tensor& wv = t.value(w);
        Tensor& gf = t.grad_mut(f);
        Tensor& gw = t.grad_mut(w);
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t si = 0; si < s; ++si) {
                const double g = gy[ni * s + si];
                if (g == 0.0) continue;
                const double* row = fm.data() + (ni * s + si) * l;
                double* grow = gf.data() + (ni * s + si) * l;
                for (std::size_t li = 0; li < l; ++li) {
                    grow[li] += g * wv[li];
                    gw[li] += g * row[li];
                }
            }
    };
    return id;
}

Tape::ValueId Tape::row_scale(ValueId f, ValueId a) {
    const Tensor& fm = value(f);
    const Tensor& av = value(a);
    check_rank(fm, 3, "row_scale input");
    check_rank(av, 2, "row_scale scale");
    const std::size_t n = fm.dim(0), s = fm.dim(1), l = fm.dim(2);
    if (av.dim(0) != n || av.dim(1) != s) throw std::invalid_argument("row_scale: scale shape mismatch");

    Tensor out({n, s, l});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t si = 0; si < s; ++si) {
            const double c = av[ni * s + si];
            const double* row = fm.data() + (ni * s + si) * l;
            double* orow = out.data() + (ni * s + si) * l;
            for (std::size_t li = 0; li < l; ++li) orow[li] = row[li] * c;
        }
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, f, a, n, s, l](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const Tensor& fm = t.value(f);
        const Tensor& av = t.value(a);
        Tensor& gf = t.grad_mut(f);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t si = 0; si < s; ++si) {
                const double c = av[ni * s + si];
                const double* grow = gy.data() + (ni * s + si) * l;
                const double* frow = fm.data() + (ni * s + si) * l;
                double* gfrow = gf.data() + (ni * s + si) * l;
                double acc = 0.0;
                for (std::size_t li = 0; li < l; ++li) {
                    gfrow[li] += grow[li] * c;
                    acc += grow[li] * frow[li];
                }
                ga[ni * s + si] += acc;
            }
    };
    return id;
}

Tape::ValueId Tape::stack_rows(std::span<const ValueId> xs) {
    if (xs.empty()) throw std::invalid_argument("stack_rows: no inputs");
    const Tensor& first = value(xs[0]);
    check_rank(first, 2, "stack_rows input");
    const std::size_t n = first.dim(0), l = first.dim(1);
    for (ValueId v : xs) {
        if (value(v).shape() != first.shape()) throw std::invalid_argument("stack_rows: shape mismatch");
    }
    const std::size_t s = xs.size();
    Tensor out({n, s, l});
    for (std::size_t si = 0; si < s; ++si) {
        const Tensor& t = value(xs[si]);
        for (std::size_t ni = 0; ni < n; ++ni) {
            std::memcpy(out.data() + (ni * s + si) * l, t.data() + ni * l, l * sizeof(double));
        }
    }
    std::vector<ValueId> inputs(xs.begin(), xs.end());
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, inputs, n, l](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        const std::size_t s = inputs.size();
        for (std::size_t si = 0; si < s; ++si) {
            Tensor& gx = t.grad_mut(inputs[si]);
            for (std::size_t ni = 0; ni < n; ++ni) {
                const double* src = gy.data() + (ni * s + si) * l;
                double* dst = gx.data() + ni * l;
                for (std::size_t li = 0; li < l; ++li) dst[li] += src[li];
            }
        }
    };
    return id;
}

Tape::ValueId Tape::add(ValueId a, ValueId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, a, b](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        Tensor& ga = t.grad_mut(a);
        Tensor& gb = t.grad_mut(b);
        for (std::size_t i = 0; i < gy.size(); ++i) {
            ga[i] += gy[i];
            gb[i] += gy[i];
        }
    };
    return id;
}

Tape::ValueId Tape::scale(ValueId x, double c) {
    const Tensor& in = value(x);
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * c;
    ValueId id = push(std::move(out));
    nodes_[id].back = [id, x, c](Tape& t) {
        const Tensor& gy = t.nodes_[id].grad;
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * c;
    };
    return id;
}

Tape::ValueId Tape::select(ValueId x, std::size_t row, std::size_t col) {
    const Tensor& in = value(x);
    check_rank(in, 2, "select input");
    if (row >= in.dim(0) || col >= in.dim(1)) throw std::invalid_argument("select: index out of range");
    const std::size_t flat = row * in.dim(1) + col;
    ValueId id = push(Tensor::scalar(in[flat]));
    nodes_[id].back = [id, x, flat](Tape& t) {
        t.grad_mut(x)[flat] += t.nodes_[id].grad[0];
    };
    return id;
}

Tape::ValueId Tape::cross_entropy_l2(ValueId probs, const std::vector<int>& labels,
                                     std::span<Parameter* const> params, double lambda) {
    const Tensor& p = value(probs);
    check_rank(p, 2, "cross_entropy input");
    const std::size_t n = p.dim(0), m = p.dim(1);
    if (labels.size() != n) throw std::invalid_argument("cross_entropy: label count mismatch");
    if (lambda < 0.0) throw std::invalid_argument("cross_entropy: lambda must be >= 0");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= m) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0," +
                                    std::to_string(m) + ")");
        }
    }

    double data_loss = 0.0;
    for (std::size_t ni = 0; ni < n; ++ni) {
        data_loss -= std::log(std::max(p[ni * m + labels[ni]], kLogFloor));
    }
    data_loss /= static_cast<double>(n);

    double reg = 0.0;
    if (lambda > 0.0) {
        for (const Parameter* pp : params) {
            if (!pp->weight_decay) continue;
            for (double v : pp->value.values()) reg += v * v;
        }
    }

    std::vector<Parameter*> plist(params.begin(), params.end());
    ValueId id = push(Tensor::scalar(data_loss + lambda * reg));
    nodes_[id].back = [id, probs, labels, plist = std::move(plist), lambda, n, m](Tape& t) {
        const double g = t.nodes_[id].grad[0];
        const Tensor& p = t.value(probs);
        Tensor& gp = t.grad_mut(probs);
        for (std::size_t ni = 0; ni < n; ++ni) {
            const std::size_t idx = ni * m + labels[ni];
            gp[idx] -= g / (static_cast<double>(n) * std::max(p[idx], kLogFloor));
        }
        if (lambda > 0.0) {
            for (Parameter* pp : plist) {
                if (!pp->weight_decay) continue;
                double* gd = pp->grad.data();
                const double* vd = pp->value.data();
                for (std::size_t i = 0; i < pp->value.size(); ++i) gd[i] += g * 2.0 * lambda * vd[i];
            }
        }
    };
    return id;
}

} // namespace har::nn
