#include "iacolight/io/network_io.hpp"

#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace iacolight;

TEST(RoadnetIo, RoundTripIsExact)
{
    TempDir dir;
    const RoadNetwork net = build_grid(3, 4, GridOptions{17.5, 12.25, 250.0});
    save_roadnet(net, dir / "net.json");
    EXPECT_EQ(load_roadnet(dir / "net.json"), net);
}

TEST(RoadnetIo, MalformedDocumentReportsLineAndColumn)
{
    TempDir dir;
    {
        std::ofstream out(dir / "bad.json");
        out << "{\n  \"rows\": 2,\n  \"cols\": ,\n}\n";
    }
    try
    {
        load_roadnet(dir / "bad.json");
        FAIL() << "expected a parse error";
    }
    catch (const ParseError &e)
    {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(RoadnetIo, DanglingReferenceIsAValidationError)
{
    auto doc = roadnet_to_json(build_grid(2, 2));
    doc["links"][3]["to"] = 500;
    EXPECT_THROW(roadnet_from_json(doc), ValidationError);
}

TEST(RoadnetIo, WrongSchemaVersionOrFieldTypeIsAParseError)
{
    auto doc = roadnet_to_json(build_grid(1, 1));
    auto v2 = doc;
    v2["schema_version"] = 2;
    EXPECT_THROW(roadnet_from_json(v2), ParseError);
    auto typed = doc;
    typed["rows"] = "one";
    EXPECT_THROW(roadnet_from_json(typed), ParseError);
}

TEST(RoadnetIo, MissingFileIsAnIoError)
{
    EXPECT_THROW(load_roadnet("/nonexistent/dir/net.json"), IoError);
}

TEST(FlowIo, RoundTripIsExact)
{
    TempDir dir;
    const RoadNetwork net = build_grid(2, 3);
    ArrivalProfile p;
    p.mean_per_bin = {40.0};
    p.std_per_bin = {5.0};
    p.duration_s = 900.0;
    const FlowSpec flow = generate_flow(p, net, 4);
    save_flow(flow, dir / "flow.json");
    EXPECT_EQ(load_flow(dir / "flow.json", net), flow);
}

TEST(FlowIo, UnsortedEntriesAreStablySorted)
{
    const RoadNetwork net = build_grid(1, 1);
    const std::vector<LinkId> ew{net.in_link(0, Side::East), net.out_link(0, Side::West)};
    const std::vector<LinkId> ns{net.in_link(0, Side::North), net.out_link(0, Side::South)};
    nlohmann::json doc = {{"schema_version", 1},
                          {"flows", {{{"t", 5.0}, {"route", ew}}, {{"t", 1.0}, {"route", ns}}, {{"t", 5.0}, {"route", ns}}}}};
    const FlowSpec f = flow_from_json(doc, net);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f.entries[0].t, 1.0);
    EXPECT_EQ(f.entries[1].route, ew);
    EXPECT_EQ(f.entries[2].route, ns);
}

TEST(FlowIo, RouteThroughAUTurnIsRejected)
{
    const RoadNetwork net = build_grid(1, 1);
    nlohmann::json doc = {{"schema_version", 1},
                          {"flows", {{{"t", 0.0}, {"route", {net.in_link(0, Side::East), net.out_link(0, Side::East)}}}}}};
    EXPECT_THROW(flow_from_json(doc, net), ValidationError);
}

TEST(GenerateFlow, ZeroStdGivesRoundedMeanPerBin)
{
    const RoadNetwork net = build_grid(4, 4);
    ArrivalProfile p;
    p.mean_per_bin = {526.63};
    p.std_per_bin = {0.0};
    p.duration_s = 300.0;
    EXPECT_EQ(generate_flow(p, net, 1).size(), 527u);
    p.duration_s = 3000.0;
    EXPECT_EQ(generate_flow(p, net, 1).size(), 5270u);
}

TEST(GenerateFlow, PartialLastBinStaysInsideTheDuration)
{
    const RoadNetwork net = build_grid(2, 2);
    ArrivalProfile p;
    p.mean_per_bin = {30.0};
    p.duration_s = 450.0;
    const FlowSpec f = generate_flow(p, net, 9);
    EXPECT_EQ(f.size(), 60u);
    for (const auto &e : f.entries)
    {
        EXPECT_GE(e.t, 0.0);
        EXPECT_LT(e.t, 450.0);
    }
}

TEST(GenerateFlow, DeterministicSortedAndValid)
{
    const RoadNetwork net = build_grid(3, 4);
    ArrivalProfile p;
    p.mean_per_bin = {250.70};
    p.std_per_bin = {38.21};
    p.duration_s = 3600.0;
    const FlowSpec a = generate_flow(p, net, 77);
    const FlowSpec b = generate_flow(p, net, 77);
    const FlowSpec c = generate_flow(p, net, 78);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_NO_THROW(validate_flow(a, net));
    EXPECT_TRUE(std::is_sorted(a.entries.begin(), a.entries.end(), [](const FlowEntry &x, const FlowEntry &y) { return x.t < y.t; }));
}

TEST(GenerateFlow, MeanCountMatchesProfileStatistics)
{
    const RoadNetwork net = build_grid(2, 2);
    ArrivalProfile p;
    p.mean_per_bin = {100.0};
    p.std_per_bin = {20.0};
    p.duration_s = 300.0 * 400;
    const double n = static_cast<double>(generate_flow(p, net, 3).size());
    // 400 bins: the sample mean has a standard error of 1 vehicle per bin.
    EXPECT_NEAR(n / 400.0, 100.0, 4.0);
}

TEST(GenerateFlow, OriginWeightsSelectSources)
{
    const RoadNetwork net = build_grid(2, 2);
    ArrivalProfile p;
    p.mean_per_bin = {50.0};
    p.duration_s = 600.0;
    const auto sources = net.source_links();
    p.origin_weights.assign(sources.size(), 0.0);
    p.origin_weights[2] = 1.0;
    for (const auto &e : generate_flow(p, net, 1).entries)
        EXPECT_EQ(e.route.front(), sources[2]);
    p.origin_weights.pop_back();
    EXPECT_THROW(generate_flow(p, net, 1), InvalidConfigError);
}

TEST(ShortestRoutes, StraightAcrossTheGrid)
{
    const RoadNetwork net = build_grid(1, 3);
    const auto routes = shortest_routes(net);
    const auto sources = net.source_links();
    const auto sinks = net.sink_links();
    const LinkId west_in = net.in_link(0, Side::West);
    const LinkId east_out = net.out_link(2, Side::East);
    const auto si = std::find(sources.begin(), sources.end(), west_in) - sources.begin();
    const auto ti = std::find(sinks.begin(), sinks.end(), east_out) - sinks.begin();
    const auto &r = routes[static_cast<std::size_t>(si)][static_cast<std::size_t>(ti)];
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(r.front(), west_in);
    EXPECT_EQ(r.back(), east_out);
}
