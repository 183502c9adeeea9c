#include "riou/pyramid.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace riou::pyramid {

namespace {

struct Resolution {
    std::optional<TensorShape> shape;
    std::string error;
};

bool positive(const TensorShape& s)
{
    return s.channels >= 1 && s.height >= 1 && s.width >= 1;
}

std::string shape_list(const std::vector<Node>& nodes, const std::vector<NodeId>& ids)
{
    std::ostringstream out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Node& in = nodes[ids[i]];
        out << (i ? ", " : "") << in.label << ' ' << in.shape;
    }
    return out.str();
}

// Shape a node must have given the stored shapes of its inputs. Inputs are
// assumed to exist and precede the node.
Resolution resolve(const Node& n, const std::vector<Node>& nodes)
{
    const auto arity = [&](std::size_t lo, std::size_t hi) -> std::string {
        if (n.inputs.size() < lo || n.inputs.size() > hi) {
            std::ostringstream msg;
            msg << to_string(n.op) << " takes ";
            if (lo == hi) {
                msg << lo;
            } else {
                msg << "at least " << lo;
            }
            msg << " input(s), got " << n.inputs.size();
            return msg.str();
        }
        return {};
    };

    switch (n.op) {
    case OpKind::Input: {
        if (auto e = arity(0, 0); !e.empty()) {
            return {std::nullopt, e};
        }
        if (!positive(n.shape)) {
            return {std::nullopt, "input shape " + to_string(n.shape) + " has a non-positive dim"};
        }
        return {n.shape, {}};
    }
    case OpKind::Conv: {
        if (auto e = arity(1, 1); !e.empty()) {
            return {std::nullopt, e};
        }
        const TensorShape& in = nodes[n.inputs[0]].shape;
        const ConvSpec& c = n.conv;
        if (c.kernel < 1 || c.stride < 1 || c.padding < 0 || c.out_channels < 1) {
            return {std::nullopt, "invalid conv configuration"};
        }
        const auto h = conv_output_size(in.height, c.kernel, c.stride, c.padding);
        const auto w = conv_output_size(in.width, c.kernel, c.stride, c.padding);
        if (!h || !w) {
            std::ostringstream msg;
            msg << "conv k" << c.kernel << " s" << c.stride << " p" << c.padding
                << " has no output for input " << in;
            return {std::nullopt, msg.str()};
        }
        return {TensorShape{c.out_channels, *h, *w}, {}};
    }
    case OpKind::Upsample: {
        if (auto e = arity(1, 1); !e.empty()) {
            return {std::nullopt, e};
        }
        if (n.target_height < 1 || n.target_width < 1) {
            return {std::nullopt, "upsample target must be positive"};
        }
        return {TensorShape{nodes[n.inputs[0]].shape.channels, n.target_height, n.target_width},
                {}};
    }
    case OpKind::Sum: {
        if (auto e = arity(2, SIZE_MAX); !e.empty()) {
            return {std::nullopt, e};
        }
        const TensorShape& first = nodes[n.inputs[0]].shape;
        for (NodeId id : n.inputs) {
            if (!(nodes[id].shape == first)) {
                return {std::nullopt, "sum inputs differ: " + shape_list(nodes, n.inputs)};
            }
        }
        return {first, {}};
    }
    case OpKind::Concat: {
        if (auto e = arity(2, SIZE_MAX); !e.empty()) {
            return {std::nullopt, e};
        }
        TensorShape out = nodes[n.inputs[0]].shape;
        out.channels = 0;
        for (NodeId id : n.inputs) {
            const TensorShape& s = nodes[id].shape;
            if (s.height != out.height || s.width != out.width) {
                return {std::nullopt,
                        "concat inputs differ spatially: " + shape_list(nodes, n.inputs)};
            }
            out.channels += s.channels;
        }
        return {out, {}};
    }
    case OpKind::Relu: {
        if (auto e = arity(1, 1); !e.empty()) {
            return {std::nullopt, e};
        }
        return {nodes[n.inputs[0]].shape, {}};
    }
    }
    return {std::nullopt, "unknown operator"};
}

}  // namespace

std::ostream& operator<<(std::ostream& os, const TensorShape& s)
{
    return os << '(' << s.channels << ',' << s.height << ',' << s.width << ')';
}

std::string to_string(const TensorShape& s)
{
    std::ostringstream out;
    out << s;
    return out.str();
}

std::string_view to_string(OpKind op) noexcept
{
    switch (op) {
    case OpKind::Input:
        return "INPUT";
    case OpKind::Conv:
        return "CONV";
    case OpKind::Upsample:
        return "UPSAMPLE";
    case OpKind::Sum:
        return "SUM";
    case OpKind::Concat:
        return "CONCAT";
    case OpKind::Relu:
        return "RELU";
    }
    return "?";
}

std::string_view to_string(Stage stage) noexcept
{
    switch (stage) {
    case Stage::Backbone:
        return "backbone";
    case Stage::TBlock:
        return "tblock";
    case Stage::ForwardTransfer:
        return "forward";
    case Stage::FBlock:
        return "fblock";
    }
    return "?";
}

std::ostream& operator<<(std::ostream& os, const ShapeIssue& issue)
{
    return os << "node " << issue.node << " (" << issue.label << "): " << issue.message;
}

ShapeMismatch::ShapeMismatch(ShapeIssue issue)
    : Error([&] {
          std::ostringstream msg;
          msg << "shape mismatch at " << issue;
          return msg.str();
      }()),
      issue_(std::move(issue))
{
}

std::optional<int> conv_output_size(int in, int kernel, int stride, int padding) noexcept
{
    const int span = in + 2 * padding - kernel;
    if (span < 0 || kernel < 1 || stride < 1 || padding < 0) {
        return std::nullopt;
    }
    return span / stride + 1;
}

void DataflowGraph::set_scope(Stage stage, int block) noexcept
{
    stage_ = stage;
    block_ = block;
}

void DataflowGraph::check_input(NodeId in, const std::string& label) const
{
    if (in >= nodes_.size()) {
        throw ShapeMismatch({nodes_.size(), label, "input node " + std::to_string(in) +
                                                       " does not exist"});
    }
}

NodeId DataflowGraph::push(Node n)
{
    n.id = nodes_.size();
    n.stage = stage_;
    n.block = block_;
    for (NodeId in : n.inputs) {
        check_input(in, n.label);
    }
    Resolution r = resolve(n, nodes_);
    if (!r.shape) {
        throw ShapeMismatch({n.id, n.label, r.error});
    }
    n.shape = *r.shape;
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

NodeId DataflowGraph::add_input(TensorShape shape, std::string label)
{
    Node n;
    n.op = OpKind::Input;
    n.label = std::move(label);
    n.shape = shape;
    return push(std::move(n));
}

NodeId DataflowGraph::add_conv(NodeId in, ConvSpec spec, std::string label)
{
    Node n;
    n.op = OpKind::Conv;
    n.label = std::move(label);
    n.inputs = {in};
    n.conv = spec;
    return push(std::move(n));
}

NodeId DataflowGraph::add_upsample(NodeId in, int height, int width, std::string label,
                                   UpsampleMode mode)
{
    Node n;
    n.op = OpKind::Upsample;
    n.label = std::move(label);
    n.inputs = {in};
    n.target_height = height;
    n.target_width = width;
    n.upsample_mode = mode;
    return push(std::move(n));
}

NodeId DataflowGraph::add_sum(std::vector<NodeId> inputs, std::string label)
{
    Node n;
    n.op = OpKind::Sum;
    n.label = std::move(label);
    n.inputs = std::move(inputs);
    return push(std::move(n));
}

NodeId DataflowGraph::add_concat(std::vector<NodeId> inputs, std::string label)
{
    Node n;
    n.op = OpKind::Concat;
    n.label = std::move(label);
    n.inputs = std::move(inputs);
    return push(std::move(n));
}

NodeId DataflowGraph::add_relu(NodeId in, std::string label)
{
    Node n;
    n.op = OpKind::Relu;
    n.label = std::move(label);
    n.inputs = {in};
    return push(std::move(n));
}

void DataflowGraph::rewire_input(NodeId id, std::size_t slot, NodeId source)
{
    nodes_.at(id).inputs.at(slot) = source;
}

std::map<OpKind, int> DataflowGraph::census(int block) const
{
    std::map<OpKind, int> counts;
    for (const Node& n : nodes_) {
        if (n.stage == Stage::TBlock && n.block == block) {
            ++counts[n.op];
        }
    }
    return counts;
}

std::vector<ShapeIssue> validate(const DataflowGraph& g)
{
    std::vector<ShapeIssue> issues;
    const std::vector<Node> nodes(g.nodes().begin(), g.nodes().end());
    for (const Node& n : nodes) {
        bool edges_ok = true;
        for (NodeId in : n.inputs) {
            if (in >= n.id) {
                issues.push_back({n.id, n.label,
                                  "edge from node " + std::to_string(in) +
                                      " does not precede this node (cycle or dangling edge)"});
                edges_ok = false;
                break;
            }
        }
        if (!edges_ok) {
            continue;
        }
        const Resolution r = resolve(n, nodes);
        if (!r.shape) {
            issues.push_back({n.id, n.label, r.error});
        } else if (!(*r.shape == n.shape)) {
            issues.push_back({n.id, n.label,
                              "stored shape " + to_string(n.shape) + " but inputs imply " +
                                  to_string(*r.shape)});
        }
    }
    return issues;
}

void LevelSpec::check() const
{
    if (levels.empty()) {
        throw PreconditionError("level table is empty");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!positive(levels[i])) {
            throw PreconditionError("level " + std::to_string(i) + " has a non-positive dim");
        }
        if (i > 0 && (levels[i].height > levels[i - 1].height ||
                      levels[i].width > levels[i - 1].width)) {
            throw PreconditionError("level " + std::to_string(i) +
                                    " is spatially larger than the level below it");
        }
    }
}

LevelSpec default_levels(int input_size)
{
    if (input_size < 4) {
        throw PreconditionError("input size must be at least 4");
    }
    static constexpr int kChannels[] = {256, 512, 1024, 2048, 512, 256, 256};
    LevelSpec spec;
    int side = (input_size + 3) / 4;
    for (int c : kChannels) {
        spec.levels.push_back({c, side, side});
        side = (side + 1) / 2;
    }
    return spec;
}

LevelSpec parse_levels(std::istream& in)
{
    LevelSpec spec;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) {
            raw.resize(hash);
        }
        std::istringstream fields(raw);
        TensorShape s;
        if (!(fields >> s.channels)) {
            continue;  // blank line
        }
        std::string extra;
        if (!(fields >> s.height >> s.width) || (fields >> extra)) {
            throw ConfigError("levels line " + std::to_string(line) +
                              ": expected 'channels height width'");
        }
        spec.levels.push_back(s);
    }
    try {
        spec.check();
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

LevelSpec downscale_levels(const LevelSpec& levels, int max_channels, int max_spatial)
{
    levels.check();
    int widest = 1;
    for (const TensorShape& s : levels.levels) {
        widest = std::max(widest, s.channels);
    }
    LevelSpec out;
    for (std::size_t i = 0; i < levels.levels.size(); ++i) {
        const TensorShape& s = levels.levels[i];
        TensorShape d;
        d.channels = std::max(1, static_cast<int>(static_cast<long long>(s.channels) *
                                                  max_channels / widest));
        if (i == 0) {
            d.height = std::min(s.height, max_spatial);
            d.width = std::min(s.width, max_spatial);
        } else {
            const TensorShape& prev_src = levels.levels[i - 1];
            const TensorShape& prev = out.levels.back();
            d.height = s.height == prev_src.height ? prev.height : (prev.height + 1) / 2;
            d.width = s.width == prev_src.width ? prev.width : (prev.width + 1) / 2;
        }
        out.levels.push_back(d);
    }
    return out;
}

TBlock build_tblock(DataflowGraph& g, std::span<const NodeId> level_nodes, std::size_t l,
                    std::optional<NodeId> forward_in, const TpnetOptions& options)
{
    if (l + 2 >= level_nodes.size()) {
        throw PreconditionError("T block " + std::to_string(l) +
                                " needs levels l+1 and l+2 above it");
    }
    const int block = static_cast<int>(l);
    const std::string p = "t" + std::to_string(l) + ".";
    g.set_scope(Stage::TBlock, block);

    const NodeId x_l = level_nodes[l];
    const TensorShape s = g.shape(x_l);

    // k1: current level + first neighbor
    const NodeId up1 =
        g.add_upsample(level_nodes[l + 1], s.height, s.width, p + "up1", options.upsample);
    const NodeId align1 = g.add_conv(up1, {1, 1, s.channels, 0}, p + "align1");
    const NodeId k1 = g.add_sum({x_l, align1}, p + "k1");

    // k2: forward-transfer input + second neighbor
    const NodeId x_star =
        forward_in ? *forward_in : g.add_conv(x_l, {1, 1, s.channels, 0}, p + "x_star");
    const NodeId up2 =
        g.add_upsample(level_nodes[l + 2], s.height, s.width, p + "up2", options.upsample);
    const NodeId align2 =
        g.add_conv(up2, {1, 1, g.shape(x_star).channels, 0}, p + "align2");
    const NodeId k2 = g.add_sum({x_star, align2}, p + "k2");

    const NodeId cat = g.add_concat({k1, k2}, p + "concat");
    const NodeId x_out = g.add_relu(cat, p + "relu");
    const NodeId output = g.add_conv(x_out, {1, 1, options.pyramid_channels, 0}, p + "output");

    return {block, x_out, output, x_star};
}

DataflowGraph build_tblock(const LevelSpec& levels, std::size_t l,
                           std::optional<TensorShape> forward_in, const TpnetOptions& options)
{
    levels.check();
    if (l + 2 >= levels.levels.size()) {
        throw PreconditionError("T block " + std::to_string(l) +
                                " needs levels l+1 and l+2 above it");
    }
    DataflowGraph g;
    std::vector<NodeId> nodes(levels.levels.size(), 0);
    for (std::size_t i = l; i <= l + 2; ++i) {
        nodes[i] = g.add_input(levels.levels[i], "level" + std::to_string(i));
    }
    std::optional<NodeId> x_star;
    if (forward_in) {
        g.set_scope(Stage::ForwardTransfer, static_cast<int>(l) - 1);
        x_star = g.add_input(*forward_in, "x_star_in");
    }
    build_tblock(g, nodes, l, x_star, options);
    return g;
}

NodeId build_forward_transfer(DataflowGraph& g, NodeId x_out, const TensorShape& next_level,
                              const TpnetOptions& options, int block)
{
    const TensorShape s = g.shape(x_out);
    ConvSpec conv = options.forward_conv;
    conv.out_channels = next_level.channels;

    const auto lands = [&](int stride) {
        return conv_output_size(s.height, conv.kernel, stride, conv.padding) == next_level.height &&
               conv_output_size(s.width, conv.kernel, stride, conv.padding) == next_level.width;
    };
    if (lands(conv.stride)) {
        // configured stride bridges the levels
    } else if (lands(1)) {
        conv.stride = 1;
    } else {
        std::ostringstream msg;
        msg << "no stride-" << conv.stride << " or stride-1 conv (k" << conv.kernel << " p"
            << conv.padding << ") maps " << s << " onto next level " << next_level;
        throw ShapeMismatch({g.size(), "forward" + std::to_string(block), msg.str()});
    }
    g.set_scope(Stage::ForwardTransfer, block);
    return g.add_conv(x_out, conv, "forward" + std::to_string(block));
}

DataflowGraph build_forward_transfer(const TensorShape& x_out, const TensorShape& next_level,
                                     const TpnetOptions& options)
{
    DataflowGraph g;
    const NodeId in = g.add_input(x_out, "x_out");
    build_forward_transfer(g, in, next_level, options, 0);
    return g;
}

Tpnet build_tpnet(const LevelSpec& levels, const TpnetOptions& options)
{
    levels.check();
    const std::size_t count = levels.levels.size();
    if (options.num_t_blocks < 1 ||
        static_cast<std::size_t>(options.num_t_blocks) + 2 > count) {
        std::ostringstream msg;
        msg << options.num_t_blocks << " T blocks need at least " << options.num_t_blocks + 2
            << " levels (each block uses two levels above it); table has " << count;
        throw PreconditionError(msg.str());
    }

    Tpnet net;
    DataflowGraph& g = net.graph;
    g.set_scope(Stage::Backbone);
    for (std::size_t i = 0; i < count; ++i) {
        net.level_inputs.push_back(g.add_input(levels.levels[i], "level" + std::to_string(i)));
    }

    const auto blocks = static_cast<std::size_t>(options.num_t_blocks);
    std::optional<NodeId> forward;
    for (std::size_t i = 0; i < blocks; ++i) {
        const TBlock blk = build_tblock(g, net.level_inputs, i, forward, options);
        net.blocks.push_back(blk);
        if (i + 1 < blocks) {
            forward = build_forward_transfer(g, blk.x_out, levels.levels[i + 1], options,
                                             static_cast<int>(i));
            net.forward_transfers.push_back(*forward);
        }
    }

    // F block: top-down resize + sum over T block outputs; levels without a
    // T block enter through a 1x1 lateral conv.
    g.set_scope(Stage::FBlock);
    std::vector<NodeId> lateral(count);
    for (std::size_t j = 0; j < count; ++j) {
        lateral[j] = j < blocks ? net.blocks[j].output
                                : g.add_conv(net.level_inputs[j],
                                             {1, 1, options.pyramid_channels, 0},
                                             "f.lateral" + std::to_string(j));
    }
    net.pyramid.assign(count, 0);
    net.pyramid[count - 1] = lateral[count - 1];
    for (std::size_t j = count - 1; j-- > 0;) {
        const TensorShape& s = g.shape(lateral[j]);
        const NodeId up = g.add_upsample(net.pyramid[j + 1], s.height, s.width,
                                         "f.up" + std::to_string(j), options.upsample);
        net.pyramid[j] = g.add_sum({lateral[j], up}, "f.fuse" + std::to_string(j));
    }
    return net;
}

}  // namespace riou::pyramid
