#include "riou/format.hpp"
#include "riou/pyramid.hpp"
#include "riou/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace riou::pyramid {

namespace {

struct Tensor {
    TensorShape shape{};
    std::vector<double> data;

    double& at(int c, int y, int x) { return data[(c * shape.height + y) * shape.width + x]; }
    double at(int c, int y, int x) const
    {
        return data[(c * shape.height + y) * shape.width + x];
    }
};

Tensor make_tensor(TensorShape s)
{
    Tensor t;
    t.shape = s;
    t.data.assign(static_cast<std::size_t>(s.channels) * s.height * s.width, 0.0);
    return t;
}

[[noreturn]] void fail(const Node& n, const std::string& what)
{
    throw NumericFailure("node " + std::to_string(n.id) + " (" + n.label + "): " + what);
}

Tensor run_conv(const Node& n, const Tensor& in, Rng& rng, bool poison)
{
    const ConvSpec& c = n.conv;
    const auto h = conv_output_size(in.shape.height, c.kernel, c.stride, c.padding);
    const auto w = conv_output_size(in.shape.width, c.kernel, c.stride, c.padding);
    if (!h || !w) {
        fail(n, "conv has no output for input " + to_string(in.shape));
    }
    Tensor out = make_tensor({c.out_channels, *h, *w});

    const int cin = in.shape.channels;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * c.kernel * c.kernel));
    std::vector<double> weights(static_cast<std::size_t>(c.out_channels) * cin * c.kernel *
                                c.kernel);
    for (double& v : weights) {
        v = rng.uniform(-bound, bound);
    }
    if (poison && !weights.empty()) {
        weights.front() = std::numeric_limits<double>::quiet_NaN();
    }

    const auto weight = [&](int o, int i, int ky, int kx) {
        return weights[((static_cast<std::size_t>(o) * cin + i) * c.kernel + ky) * c.kernel + kx];
    };
    for (int o = 0; o < c.out_channels; ++o) {
        for (int y = 0; y < *h; ++y) {
            for (int x = 0; x < *w; ++x) {
                double acc = 0.0;
                for (int i = 0; i < cin; ++i) {
                    for (int ky = 0; ky < c.kernel; ++ky) {
                        const int sy = y * c.stride + ky - c.padding;
                        if (sy < 0 || sy >= in.shape.height) {
                            continue;
                        }
                        for (int kx = 0; kx < c.kernel; ++kx) {
                            const int sx = x * c.stride + kx - c.padding;
                            if (sx < 0 || sx >= in.shape.width) {
                                continue;
                            }
                            acc += weight(o, i, ky, kx) * in.at(i, sy, sx);
                        }
                    }
                }
                out.at(o, y, x) = acc;
            }
        }
    }
    return out;
}

Tensor run_upsample(const Node& n, const Tensor& in)
{
    Tensor out = make_tensor({in.shape.channels, n.target_height, n.target_width});
    const double sy = static_cast<double>(in.shape.height) / n.target_height;
    const double sx = static_cast<double>(in.shape.width) / n.target_width;
    for (int c = 0; c < in.shape.channels; ++c) {
        for (int y = 0; y < n.target_height; ++y) {
            for (int x = 0; x < n.target_width; ++x) {
                if (n.upsample_mode == UpsampleMode::Nearest) {
                    const int iy = std::min(static_cast<int>(y * sy), in.shape.height - 1);
                    const int ix = std::min(static_cast<int>(x * sx), in.shape.width - 1);
                    out.at(c, y, x) = in.at(c, iy, ix);
                    continue;
                }
                // half-pixel centers, clamped at the border
                const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.shape.height - 1.0);
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.shape.width - 1.0);
                const int y0 = static_cast<int>(fy);
                const int x0 = static_cast<int>(fx);
                const int y1 = std::min(y0 + 1, in.shape.height - 1);
                const int x1 = std::min(x0 + 1, in.shape.width - 1);
                const double wy = fy - y0;
                const double wx = fx - x0;
                out.at(c, y, x) = (1 - wy) * ((1 - wx) * in.at(c, y0, x0) + wx * in.at(c, y0, x1)) +
                                  wy * ((1 - wx) * in.at(c, y1, x0) + wx * in.at(c, y1, x1));
            }
        }
    }
    return out;
}

}  // namespace

std::vector<NodeStats> forward_smoke(const DataflowGraph& g, const SmokeOptions& options)
{
    for (const Node& n : g.nodes()) {
        const auto elements =
            static_cast<std::size_t>(n.shape.channels) * n.shape.height * n.shape.width;
        if (elements > options.max_elements) {
            throw PreconditionError("node " + std::to_string(n.id) + " (" + n.label +
                                    ") is too large for a smoke run; downscale the levels first");
        }
    }
    if (options.inject_nan_at &&
        (*options.inject_nan_at >= g.size() || g.node(*options.inject_nan_at).op != OpKind::Conv)) {
        throw PreconditionError("NaN injection target " + std::to_string(*options.inject_nan_at) +
                                " is not a conv node");
    }

    Rng rng(options.seed);
    std::vector<Tensor> values;
    values.reserve(g.size());
    std::vector<NodeStats> stats;
    stats.reserve(g.size());

    for (const Node& n : g.nodes()) {
        for (NodeId in : n.inputs) {
            if (in >= n.id) {
                fail(n, "input does not precede the node");
            }
        }
        Tensor out;
        switch (n.op) {
        case OpKind::Input:
            out = make_tensor(n.shape);
            for (double& v : out.data) {
                v = rng.uniform(-1.0, 1.0);
            }
            break;
        case OpKind::Conv:
            out = run_conv(n, values[n.inputs.at(0)], rng, options.inject_nan_at == n.id);
            break;
        case OpKind::Upsample:
            out = run_upsample(n, values[n.inputs.at(0)]);
            break;
        case OpKind::Sum: {
            out = values[n.inputs.at(0)];
            for (std::size_t k = 1; k < n.inputs.size(); ++k) {
                const Tensor& rhs = values[n.inputs[k]];
                if (!(rhs.shape == out.shape)) {
                    fail(n, "sum of " + to_string(out.shape) + " and " + to_string(rhs.shape));
                }
                for (std::size_t i = 0; i < out.data.size(); ++i) {
                    out.data[i] += rhs.data[i];
                }
            }
            break;
        }
        case OpKind::Concat: {
            TensorShape s = values[n.inputs.at(0)].shape;
            s.channels = 0;
            for (NodeId in : n.inputs) {
                const TensorShape& part = values[in].shape;
                if (part.height != s.height || part.width != s.width) {
                    fail(n, "concat of spatially different tensors");
                }
                s.channels += part.channels;
            }
            out = make_tensor(s);
            auto dst = out.data.begin();
            for (NodeId in : n.inputs) {
                dst = std::copy(values[in].data.begin(), values[in].data.end(), dst);
            }
            break;
        }
        case OpKind::Relu:
            out = values[n.inputs.at(0)];
            for (double& v : out.data) {
                v = std::max(v, 0.0);
            }
            break;
        }

        if (!(out.shape == n.shape)) {
            fail(n, "computed shape " + to_string(out.shape) + " differs from symbolic " +
                        to_string(n.shape));
        }
        NodeStats st;
        st.id = n.id;
        st.shape = out.shape;
        st.min = std::numeric_limits<double>::infinity();
        st.max = -std::numeric_limits<double>::infinity();
        for (double v : out.data) {
            if (!std::isfinite(v)) {
                fail(n, "non-finite value");
            }
            if (n.op == OpKind::Relu && v < 0.0) {
                fail(n, "negative relu output");
            }
            st.sum += v;
            st.min = std::min(st.min, v);
            st.max = std::max(st.max, v);
        }
        stats.push_back(st);
        values.push_back(std::move(out));
    }
    return stats;
}

std::string smoke_csv(const DataflowGraph& g, std::span<const NodeStats> stats)
{
    std::ostringstream out;
    out << "id,label,channels,height,width,sum,min,max\n";
    for (const NodeStats& s : stats) {
        out << s.id << ',' << g.node(s.id).label << ',' << s.shape.channels << ','
            << s.shape.height << ',' << s.shape.width << ',' << format_double(s.sum) << ','
            << format_double(s.min) << ',' << format_double(s.max) << '\n';
    }
    return out.str();
}

}  // namespace riou::pyramid
