#pragma once

// Symbolic dataflow graph of the two-pronged feature pyramid.
//
// A T block at level l aggregates
//     X_out = Relu((X_l + up(X_{l+1})) ++ (X_l* + up(X_{l+2})))
// where + is element-wise sum, ++ channel concatenation and up() a resize to
// level l's spatial size. X_l* is the forward-transfer input: a strided conv
// of the previous block's X_out, or a 1x1 conv of X_l for the first block.
// Up-sampled maps pass through a 1x1 conv that aligns their channels before
// each sum. The F block then fuses block outputs top-down with resize + sum.

#include "riou/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riou::pyramid {

struct TensorShape {
    int channels = 1;
    int height = 1;
    int width = 1;

    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::ostream& operator<<(std::ostream& os, const TensorShape& s);
std::string to_string(const TensorShape& s);

using NodeId = std::size_t;

enum class OpKind { Input, Conv, Upsample, Sum, Concat, Relu };
std::string_view to_string(OpKind op) noexcept;

enum class UpsampleMode { Nearest, Bilinear };

/// Which part of the network a node belongs to.
enum class Stage { Backbone, TBlock, ForwardTransfer, FBlock };
std::string_view to_string(Stage stage) noexcept;

struct ConvSpec {
    int kernel = 1;
    int stride = 1;
    int out_channels = 1;
    int padding = 0;
};

struct Node {
    NodeId id = 0;
    OpKind op = OpKind::Input;
    std::string label;
    std::vector<NodeId> inputs;
    ConvSpec conv{};
    int target_height = 0;  // Upsample only
    int target_width = 0;   // Upsample only
    UpsampleMode upsample_mode = UpsampleMode::Nearest;
    TensorShape shape{};
    Stage stage = Stage::Backbone;
    int block = -1;  // T block index for TBlock / ForwardTransfer nodes
};

/// A violated shape rule at one node.
struct ShapeIssue {
    NodeId node = 0;
    std::string label;
    std::string message;
};

std::ostream& operator<<(std::ostream& os, const ShapeIssue& issue);

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(ShapeIssue issue);
    const ShapeIssue& issue() const noexcept { return issue_; }

private:
    ShapeIssue issue_;
};

/// Output spatial size of a convolution, or nullopt when it is not positive.
std::optional<int> conv_output_size(int in, int kernel, int stride, int padding) noexcept;

/// Append-only graph; nodes are stored in topological order and every add_*
/// resolves the new node's shape or throws ShapeMismatch.
class DataflowGraph {
public:
    /// Stage and block index stamped on subsequently added nodes.
    void set_scope(Stage stage, int block = -1) noexcept;

    NodeId add_input(TensorShape shape, std::string label);
    NodeId add_conv(NodeId in, ConvSpec spec, std::string label);
    NodeId add_upsample(NodeId in, int height, int width, std::string label,
                        UpsampleMode mode = UpsampleMode::Nearest);
    NodeId add_sum(std::vector<NodeId> inputs, std::string label);
    NodeId add_concat(std::vector<NodeId> inputs, std::string label);
    NodeId add_relu(NodeId in, std::string label);

    const Node& node(NodeId id) const { return nodes_.at(id); }
    const TensorShape& shape(NodeId id) const { return nodes_.at(id).shape; }
    std::span<const Node> nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }

    /// Points input `slot` of `id` at `source` without re-resolving shapes.
    /// For fault injection; validate() reports what breaks.
    void rewire_input(NodeId id, std::size_t slot, NodeId source);

    /// Count of each operator among nodes of the given T block.
    std::map<OpKind, int> census(int block) const;

private:
    NodeId push(Node n);
    void check_input(NodeId in, const std::string& label) const;

    std::vector<Node> nodes_;
    Stage stage_ = Stage::Backbone;
    int block_ = -1;
};

/// Re-checks every node rule (acyclic edges, arity, shape propagation).
/// Empty result means the graph is consistent.
std::vector<ShapeIssue> validate(const DataflowGraph& g);

/// Backbone / basic feature levels, finest first. Spatial sizes must be
/// non-increasing along the list.
struct LevelSpec {
    std::vector<TensorShape> levels;

    /// Throws PreconditionError on empty lists, non-positive dims or
    /// increasing spatial sizes.
    void check() const;
};

/// ResNet-50-like table for a square input: strides 4..256, channel widths
/// 256/512/1024/2048 followed by 512/256/256 for the extra levels. Each level
/// is ceil(previous / 2).
LevelSpec default_levels(int input_size);

/// Parses `channels height width` per line; `#` comments. Throws ConfigError.
LevelSpec parse_levels(std::istream& in);

/// Shrinks a level table so that channels <= max_channels and the finest
/// level is at most max_spatial wide, keeping the halving relation between
/// consecutive levels.
LevelSpec downscale_levels(const LevelSpec& levels, int max_channels = 8, int max_spatial = 16);

struct TpnetOptions {
    int num_t_blocks = 5;
    /// Channels of every T block output and pyramid level.
    int pyramid_channels = 256;
    ConvSpec forward_conv{3, 2, 0, 1};  // out_channels set per level
    UpsampleMode upsample = UpsampleMode::Nearest;
};

struct TBlock {
    int index = 0;
    NodeId x_out = 0;    // aggregated features after the Relu
    NodeId output = 0;   // 1x1 conv feeding the pyramid
    NodeId x_star = 0;   // forward-transfer input that was consumed
};

/// Adds T block `l` to `g`. `level_nodes` holds one node per level;
/// `forward_in` is the previous block's forward transfer or nullopt for the
/// first block. Throws PreconditionError when l + 2 is out of range.
TBlock build_tblock(DataflowGraph& g, std::span<const NodeId> level_nodes, std::size_t l,
                    std::optional<NodeId> forward_in, const TpnetOptions& options = {});

/// Stand-alone fragment: inputs for levels l..l+2 (and X_l* when given),
/// plus one T block.
DataflowGraph build_tblock(const LevelSpec& levels, std::size_t l,
                           std::optional<TensorShape> forward_in,
                           const TpnetOptions& options = {});

/// Adds the strided conv carrying `x_out` to the next block. Stride 2 when
/// that lands on `next_level`'s spatial size, stride 1 when the sizes already
/// agree, ShapeMismatch otherwise.
NodeId build_forward_transfer(DataflowGraph& g, NodeId x_out, const TensorShape& next_level,
                              const TpnetOptions& options = {}, int block = -1);

DataflowGraph build_forward_transfer(const TensorShape& x_out, const TensorShape& next_level,
                                     const TpnetOptions& options = {});

struct Tpnet {
    DataflowGraph graph;
    std::vector<NodeId> level_inputs;
    std::vector<TBlock> blocks;
    /// Forward-transfer conv from block i to block i + 1.
    std::vector<NodeId> forward_transfers;
    /// Final pyramid, finest first.
    std::vector<NodeId> pyramid;
};

/// Chains `num_t_blocks` T blocks with forward transfer and closes with the
/// F block. Throws PreconditionError when the table is too short.
Tpnet build_tpnet(const LevelSpec& levels, const TpnetOptions& options = {});

// --- numeric smoke test -------------------------------------------------

struct NodeStats {
    NodeId id = 0;
    TensorShape shape{};
    double sum = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct SmokeOptions {
    std::uint64_t seed = 0;
    /// Poisons one weight of this conv node with NaN.
    std::optional<NodeId> inject_nan_at;
    /// Refuse graphs with any node larger than this many elements.
    std::size_t max_elements = 1u << 16;
};

/// Executes `g` with naive kernels and seeded random inputs and weights.
/// Checks at every node that the concrete output shape equals the symbolic
/// one, that all values are finite and that Relu outputs are non-negative.
/// Throws NumericFailure naming the first failing node.
std::vector<NodeStats> forward_smoke(const DataflowGraph& g, const SmokeOptions& options);

/// One CSV line per node: id,label,channels,height,width,sum,min,max.
std::string smoke_csv(const DataflowGraph& g, std::span<const NodeStats> stats);

}  // namespace riou::pyramid
