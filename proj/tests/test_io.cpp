#include <doctest.h>

#include <filesystem>

#include "stiffkit/errors.hpp"
#include "stiffkit/io.hpp"

using namespace stiffkit;
using namespace stiffkit::io;

TEST_CASE("trajectory json round trip is byte identical")
{
    ode::Trajectory t;
    t.source = ode::Trajectory::Source::network;
    t.vector_steps = true;
    t.states = {{1.0, 0.1}, {0.30000000000000004, -2.5}, {0.7, 1e-12}};
    t.step_sizes = {{0.25, 0.5}, {1.0, 0.2689414213699951}};
    t.stage_boundaries = {0};

    const std::string s1 = dump_json(trajectory_to_json(t));
    const ode::Trajectory back = trajectory_from_json(json::parse(s1));
    const std::string s2 = dump_json(trajectory_to_json(back));
    CHECK(s1 == s2);
    CHECK(back.states == t.states);
    CHECK(back.step_sizes == t.step_sizes);
    CHECK(back.vector_steps);
}

TEST_CASE("scalar-step trajectory serializes steps as plain numbers")
{
    ode::Trajectory t;
    t.states = {{1.0}, {2.0}};
    t.step_sizes = {{0.1}};
    const json j = trajectory_to_json(t);
    CHECK(j["step_sizes"][0].is_number());
    const ode::Trajectory back = trajectory_from_json(j);
    CHECK_FALSE(back.vector_steps);
    CHECK(back.step_sizes[0] == Vec{0.1});
}

TEST_CASE("trajectory loader names the offending field")
{
    json j;
    j["source"] = "ode";
    j["states"] = json::array({json::array({1.0}), json::array({2.0}), json::array({3.0})});
    j["step_sizes"] = json::array({0.1});  // wrong length
    j["stage_boundaries"] = json::array({0});
    CHECK_THROWS_WITH_AS(trajectory_from_json(j),
                         "trajectory: step_sizes length 1 != states length - 1 = 2", ValidationError);

    j["step_sizes"] = json::array({0.1, "x"});
    CHECK_THROWS_AS(trajectory_from_json(j), ValidationError);

    j.erase("states");
    CHECK_THROWS_WITH_AS(trajectory_from_json(j), "trajectory: missing field 'states'", ValidationError);
}

TEST_CASE("model json round trip preserves every parameter")
{
    neural::NetworkConfig c;
    c.input_dim = 3;
    c.stage_widths = {4, 6};
    c.blocks_per_stage = {2, 2};
    c.adaptor = neural::AdaptorKind::stepnet;
    c.bottleneck_ratio = 2;
    c.num_classes = 3;
    c.seed = 9;
    neural::ResidualNetwork net = neural::init_network(c);
    net.stages[1][0].iebn.running_mean[2] = 0.125;  // make a buffer non-trivial

    const std::string s1 = dump_json(model_to_json(net));
    neural::ResidualNetwork back = model_from_json(json::parse(s1));
    const std::string s2 = dump_json(model_to_json(back));
    CHECK(s1 == s2);

    auto r1 = neural::param_refs(net);
    auto r2 = neural::param_refs(back);
    REQUIRE(r1.size() == r2.size());
    for (std::size_t k = 0; k < r1.size(); ++k) CHECK(*r1[k].values == *r2[k].values);
    CHECK(back.stages[1][0].iebn.running_mean[2] == 0.125);
}

TEST_CASE("model without its batch-norm section is rejected for gated kinds")
{
    neural::NetworkConfig c;
    c.input_dim = 2;
    c.stage_widths = {4};
    c.blocks_per_stage = {2};
    c.adaptor = neural::AdaptorKind::stepnet;
    c.bottleneck_ratio = 1;
    c.num_classes = 2;
    c.seed = 1;
    json j = model_to_json(neural::init_network(c));
    j.erase("iebn");
    CHECK_THROWS_WITH_AS(model_from_json(j), "model: missing field 'iebn'", ValidationError);

    json j2 = model_to_json(neural::init_network(c));
    j2["iebn"].erase("stage0.block1");
    CHECK_THROWS_AS(model_from_json(j2), ValidationError);
}

TEST_CASE("records csv round trip")
{
    std::vector<analysis::ExperimentRecord> records(2);
    records[0] = {0, neural::AdaptorKind::none, 1, 0.8125, 3.5, "spirals"};
    records[1] = {1, neural::AdaptorKind::stepnet, 2, 0.96875, 7.25, "spirals"};
    const std::string csv = records_to_csv(records);
    const auto back = records_from_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[1].adaptor == neural::AdaptorKind::stepnet);
    CHECK(back[1].accuracy == 0.96875);
    CHECK(back[0].tns == 3.5);
    CHECK_THROWS_AS(records_from_csv("bogus header\n"), ValidationError);
}

TEST_CASE("dataset json round trip")
{
    const neural::Dataset data = neural::synth_dataset(neural::DatasetKind::moons, 40, 0.1, 2);
    const std::string s1 = dump_json(dataset_to_json(data));
    const neural::Dataset back = dataset_from_json(json::parse(s1));
    CHECK(back.train_x == data.train_x);
    CHECK(back.test_y == data.test_y);
    CHECK(dump_json(dataset_to_json(back)) == s1);
}

TEST_CASE("seventeen-digit dump rejects non-finite values and is stable")
{
    json j;
    j["v"] = 0.1;
    CHECK(dump_json(j) == "{\"v\":0.10000000000000001}\n");
    j["v"] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(dump_json(j), ValidationError);
}

TEST_CASE("atomic write leaves no temp files behind")
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "stiffkit_io_test";
    fs::remove_all(dir);
    const fs::path target = dir / "out.json";
    write_file_atomic(target, "{}\n");
    CHECK(read_file(target) == "{}\n");
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
    fs::remove_all(dir);
}

TEST_CASE("system catalog resolves names and rejects unknowns")
{
    const auto [decay, u0] = resolve_system("decay");
    CHECK(decay.dimension == 1);
    CHECK(u0 == Vec{1.0});
    const auto [stiff, su0] = resolve_system("stiff_sine");
    CHECK(stiff.rhs({0.0}, 0.0)[0] == doctest::Approx(1.0));  // cos(0)
    CHECK_THROWS_AS(resolve_system("nope"), ValidationError);
}
