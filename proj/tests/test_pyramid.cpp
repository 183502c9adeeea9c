#include "doctest.h"

#include "riou/errors.hpp"
#include "riou/pyramid.hpp"

#include <cmath>
#include <sstream>

using namespace riou;
using namespace riou::pyramid;

namespace {

LevelSpec three_levels()
{
    return LevelSpec{{{256, 80, 80}, {512, 40, 40}, {1024, 20, 20}}};
}

const Node& find(const DataflowGraph& g, const std::string& label)
{
    for (const Node& n : g.nodes()) {
        if (n.label == label) {
            return n;
        }
    }
    FAIL("no node labelled " << label);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("conv output size")
{
    CHECK(conv_output_size(80, 3, 2, 1) == 40);
    CHECK(conv_output_size(5, 3, 2, 1) == 3);
    CHECK(conv_output_size(80, 1, 1, 0) == 80);
    CHECK_FALSE(conv_output_size(1, 3, 1, 0).has_value());
    CHECK_FALSE(conv_output_size(8, 0, 1, 0).has_value());
}

TEST_CASE("first T block on three levels")
{
    const DataflowGraph g = build_tblock(three_levels(), 0, std::nullopt);
    CHECK(validate(g).empty());
    const Node& out = g.nodes().back();
    CHECK(out.label == "t0.output");
    CHECK(out.shape.height == 80);
    CHECK(out.shape.width == 80);
    CHECK(find(g, "t0.up1").shape == TensorShape{512, 80, 80});
    CHECK(find(g, "t0.up2").shape == TensorShape{1024, 80, 80});
    CHECK(find(g, "t0.k1").shape == TensorShape{256, 80, 80});
    CHECK(find(g, "t0.x_star").op == OpKind::Conv);
    CHECK(find(g, "t0.concat").shape == TensorShape{512, 80, 80});
    CHECK(find(g, "t0.relu").shape == TensorShape{512, 80, 80});

    const auto census = g.census(0);
    CHECK(census.at(OpKind::Upsample) == 2);
    CHECK(census.at(OpKind::Sum) == 2);
    CHECK(census.at(OpKind::Concat) == 1);
    CHECK(census.at(OpKind::Relu) == 1);

    CHECK_THROWS_AS(build_tblock(three_levels(), 1, std::nullopt), PreconditionError);
}

TEST_CASE("shape rules")
{
    DataflowGraph g;
    const NodeId a = g.add_input({256, 80, 80}, "a");
    const NodeId b = g.add_input({512, 40, 40}, "b");
    CHECK_THROWS_AS(g.add_sum({a, b}, "bad_sum"), ShapeMismatch);
    try {
        g.add_sum({a, b}, "bad_sum");
    } catch (const ShapeMismatch& e) {
        CHECK(e.issue().label == "bad_sum");
        CHECK(std::string(e.what()).find("512") != std::string::npos);
    }
    const NodeId c = g.add_input({256, 80, 80}, "c");
    CHECK(g.shape(g.add_concat({a, c}, "cat")).channels == 512);
    CHECK_THROWS_AS(g.add_concat({a, b}, "bad_cat"), ShapeMismatch);
    CHECK(g.shape(g.add_upsample(b, 80, 80, "up")) == TensorShape{512, 80, 80});
    CHECK_THROWS_AS(g.add_relu(99, "dangling"), ShapeMismatch);
    CHECK_THROWS_AS(g.add_input({0, 4, 4}, "zero"), ShapeMismatch);
    CHECK(validate(g).empty());
}

TEST_CASE("forward transfer")
{
    const DataflowGraph g = build_forward_transfer({256, 80, 80}, {512, 40, 40});
    const Node& conv = g.nodes().back();
    CHECK(conv.op == OpKind::Conv);
    CHECK(conv.conv.stride == 2);
    CHECK(conv.conv.kernel == 3);
    CHECK(conv.shape == TensorShape{512, 40, 40});

    CHECK_THROWS_AS(build_forward_transfer({256, 80, 80}, {512, 30, 30}), ShapeMismatch);

    const DataflowGraph same = build_forward_transfer({256, 20, 20}, {256, 20, 20});
    CHECK(same.nodes().back().conv.stride == 1);
    CHECK(same.nodes().back().shape == TensorShape{256, 20, 20});

    // odd sizes: 5 -> 3 with k3 s2 p1
    CHECK(build_forward_transfer({8, 5, 5}, {4, 3, 3}).nodes().back().shape == TensorShape{4, 3, 3});
}

TEST_CASE("default level tables")
{
    const LevelSpec a = default_levels(320);
    REQUIRE(a.levels.size() == 7);
    const int expected[] = {80, 40, 20, 10, 5, 3, 2};
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(a.levels[i].height == expected[i]);
        CHECK(a.levels[i].width == expected[i]);
    }
    CHECK(a.levels[0].channels == 256);
    CHECK(a.levels[3].channels == 2048);

    const LevelSpec b = default_levels(512);
    CHECK(b.levels[0].height == 128);
    CHECK(b.levels.back().height == 2);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(b.levels[i].height >= a.levels[i].height);
    }
}

TEST_CASE("full network")
{
    for (int size : {320, 512}) {
        CAPTURE(size);
        const LevelSpec levels = default_levels(size);
        const Tpnet net = build_tpnet(levels);
        CHECK(validate(net.graph).empty());
        REQUIRE(net.blocks.size() == 5);
        REQUIRE(net.forward_transfers.size() == 4);
        REQUIRE(net.pyramid.size() == levels.levels.size());

        for (const TBlock& blk : net.blocks) {
            const auto census = net.graph.census(blk.index);
            CHECK(census.at(OpKind::Upsample) == 2);
            CHECK(census.at(OpKind::Sum) == 2);
            CHECK(census.at(OpKind::Concat) == 1);
            CHECK(census.at(OpKind::Relu) == 1);
        }
        // each forward transfer is exactly the X* consumed by the next block
        for (std::size_t i = 0; i + 1 < net.blocks.size(); ++i) {
            CHECK(net.blocks[i + 1].x_star == net.forward_transfers[i]);
            CHECK(net.graph.shape(net.forward_transfers[i]).height ==
                  levels.levels[i + 1].height);
            CHECK(net.graph.node(net.forward_transfers[i]).inputs.front() == net.blocks[i].x_out);
        }
        for (std::size_t i = 1; i < net.pyramid.size(); ++i) {
            const TensorShape& hi = net.graph.shape(net.pyramid[i - 1]);
            const TensorShape& lo = net.graph.shape(net.pyramid[i]);
            CHECK(lo.height < hi.height);
            CHECK(lo.width < hi.width);
            CHECK(lo.channels == 256);
        }
    }

    CHECK_THROWS_AS(build_tpnet(default_levels(320), {6}), PreconditionError);
    CHECK_THROWS_AS(build_tpnet(default_levels(320), {0}), PreconditionError);
    CHECK_NOTHROW(build_tpnet(default_levels(320), {3}));
}

TEST_CASE("validate reports a corrupted sum")
{
    CHECK(validate(DataflowGraph{}).empty());

    Tpnet net = build_tpnet(default_levels(320));
    const Node& k1 = find(net.graph, "t1.k1");
    net.graph.rewire_input(k1.id, 1, net.level_inputs[3]);
    const auto issues = validate(net.graph);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].node == k1.id);
    CHECK(issues[0].label == "t1.k1");
}

TEST_CASE("level file parsing")
{
    std::istringstream ok("# c h w\n64 32 32\n128 16 16  # second\n\n256 8 8\n");
    const LevelSpec s = parse_levels(ok);
    REQUIRE(s.levels.size() == 3);
    CHECK(s.levels[1] == TensorShape{128, 16, 16});

    std::istringstream bad("64 32\n");
    CHECK_THROWS_AS(parse_levels(bad), ConfigError);
    std::istringstream junk("64 32 32 extra\n");
    CHECK_THROWS_AS(parse_levels(junk), ConfigError);
    std::istringstream neg("-4 32 32\n");
    CHECK_THROWS_AS(parse_levels(neg), ConfigError);

    LevelSpec growing{{{8, 4, 4}, {8, 8, 8}}};
    CHECK_THROWS_AS(growing.check(), PreconditionError);
}

TEST_CASE("downscaled smoke forward")
{
    const LevelSpec small = downscale_levels(default_levels(320));
    for (const TensorShape& s : small.levels) {
        CHECK(s.channels <= 8);
        CHECK(s.height <= 16);
    }
    const Tpnet net = build_tpnet(small, {5, 8});
    REQUIRE(validate(net.graph).empty());

    const auto stats = forward_smoke(net.graph, {42});
    REQUIRE(stats.size() == net.graph.size());
    for (const NodeStats& s : stats) {
        CHECK(s.shape == net.graph.shape(s.id));
        CHECK(std::isfinite(s.sum));
        if (net.graph.node(s.id).op == OpKind::Relu) {
            CHECK(s.min >= 0.0);
        }
    }
    const auto again = forward_smoke(net.graph, {42});
    CHECK(smoke_csv(net.graph, stats) == smoke_csv(net.graph, again));
    const auto other = forward_smoke(net.graph, {43});
    CHECK(smoke_csv(net.graph, stats) != smoke_csv(net.graph, other));

    TpnetOptions bilinear{5, 8};
    bilinear.upsample = UpsampleMode::Bilinear;
    CHECK_NOTHROW(forward_smoke(build_tpnet(small, bilinear).graph, {1}));
}

TEST_CASE("smoke forward catches a poisoned weight")
{
    const Tpnet net = build_tpnet(downscale_levels(default_levels(320)), {5, 8});
    const NodeId target = net.blocks[2].output;
    SmokeOptions opts{7};
    opts.inject_nan_at = target;
    try {
        forward_smoke(net.graph, opts);
        FAIL("expected NumericFailure");
    } catch (const NumericFailure& e) {
        CHECK(std::string(e.what()).find("t2.output") != std::string::npos);
    }
    CHECK_THROWS_AS(forward_smoke(build_tpnet(default_levels(320)).graph, {1}), PreconditionError);
}

TEST_CASE("NaN injection must target a conv")
{
    const Tpnet net = build_tpnet(downscale_levels(default_levels(320)), {5, 8});
    SmokeOptions opts;
    opts.inject_nan_at = net.level_inputs[0];
    CHECK_THROWS_AS(forward_smoke(net.graph, opts), PreconditionError);
    opts.inject_nan_at = net.graph.size();
    CHECK_THROWS_AS(forward_smoke(net.graph, opts), PreconditionError);
}
