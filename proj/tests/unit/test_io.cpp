#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "lexirobust/errors.hpp"
#include "lexirobust/io.hpp"
#include "lexirobust/random_instances.hpp"

using namespace lexirobust;
using nlohmann::json;

TEST(DomdpJson, RoundTrip) {
    Rng rng(1);
    const Domdp mdp = random_domdp(3, 2, 0.9, rng);
    const Domdp back = domdp_from_json(domdp_to_json(mdp));
    ASSERT_EQ(back.n_states(), 3u);
    ASSERT_EQ(back.n_actions(), 2u);
    EXPECT_DOUBLE_EQ(back.gamma(), 0.9);
    for (std::size_t u = 0; u < 2; ++u) {
        // Rows are renormalized on load.
        EXPECT_LT((back.transition(u) - mdp.transition(u)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_EQ(back.reward(u), mdp.reward(u));
    }
    EXPECT_EQ(back.mu0(), mdp.mu0());
}

TEST(DomdpJson, LowerRankRewardsAreBroadcast) {
    const json doc = {{"n_states", 2},
                      {"n_actions", 2},
                      {"gamma", 0.5},
                      {"mu0", {1.0, 0.0}},
                      {"P", {{{0.5, 0.5}, {1.0, 0.0}}, {{0.0, 1.0}, {0.5, 0.5}}}},
                      {"R", {{1.0, 2.0}, {3.0, 4.0}}}};
    const Domdp mdp = domdp_from_json(doc.dump());
    EXPECT_DOUBLE_EQ(mdp.r(0, 1, 0), 2.0);
    EXPECT_DOUBLE_EQ(mdp.r(1, 0, 1), 3.0);

    json per_state = doc;
    per_state["R"] = {5.0, 7.0};
    const Domdp by_state = domdp_from_json(per_state.dump());
    EXPECT_DOUBLE_EQ(by_state.r(1, 1, 0), 7.0);
    EXPECT_DOUBLE_EQ(by_state.r(0, 0, 1), 5.0);
}

TEST(DomdpJson, Errors) {
    EXPECT_THROW(domdp_from_json("{not json"), ConfigError);
    EXPECT_THROW(domdp_from_json(R"({"gamma": 0.5})"), InvalidInput);
    const json bad_row = {{"gamma", 0.5},
                          {"mu0", {1.0, 0.0}},
                          {"P", {{{0.5, 0.4}, {1.0, 0.0}}, {{0.0, 1.0}, {0.5, 0.5}}}},
                          {"R", {0.0, 0.0}}};
    try {
        domdp_from_json(bad_row.dump());
        FAIL() << "expected InvalidInput";
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("P[0][0]"), std::string::npos) << e.what();
    }
}

TEST(KernelJson, DenseRoundTripAndRowError) {
    Rng rng(2);
    const NoiseKernel T = random_kernel(4, KernelFamily::dense, rng);
    EXPECT_EQ(kernel_from_json(kernel_to_json(T)).matrix(), T.matrix());
    const json corrupted = {{"n_states", 2}, {"T", {{0.5, 0.5}, {0.45, 0.45}}}};
    try {
        kernel_from_json(corrupted.dump());
        FAIL() << "expected InvalidInput";
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(kernel_from_json(R"({"n_states": 3, "T": [[1, 0], [0, 1]]})"), InvalidInput);
}

TEST(KernelSpecJson, RoundTrip) {
    KernelSpec spec{KernelKind::mixture, 0.5, std::nullopt, {}, {}};
    spec.components.push_back({0.3, {KernelKind::gaussian, 0.7, 2.0, {}, {}}});
    spec.components.push_back({0.7, {KernelKind::deterministic, 0.5, std::nullopt, {1, 0}, {}}});
    const KernelSpec back = kernel_spec_from_json(kernel_spec_to_json(spec));
    ASSERT_EQ(back.components.size(), 2u);
    EXPECT_EQ(back.components[0].kernel.kind, KernelKind::gaussian);
    EXPECT_DOUBLE_EQ(back.components[0].kernel.sigma, 0.7);
    EXPECT_EQ(*back.components[0].kernel.bound, 2.0);
    EXPECT_EQ(back.components[1].kernel.map, (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(kernel_spec_from_json(R"("uniform")").kind, KernelKind::uniform);
    EXPECT_THROW(kernel_spec_from_json(R"({"kind": "laplace"})"), ConfigError);
    EXPECT_THROW(kernel_spec_from_json(R"({"sigma": 1})"), ConfigError);
}

TEST(GridSpecJson, RoundTripAndDefaults) {
    GridSpec spec = default_lava_gap_spec();
    spec.obstacles = {{4, 1}};
    spec.collision_reward = -2.0;
    const GridSpec back = grid_spec_from_json(grid_spec_to_json(spec));
    EXPECT_EQ(back.lava, spec.lava);
    EXPECT_EQ(back.obstacles, spec.obstacles);
    EXPECT_EQ(back.goal, spec.goal);
    EXPECT_DOUBLE_EQ(back.slip, spec.slip);
    EXPECT_DOUBLE_EQ(back.collision_reward, -2.0);
    const GridSpec partial = grid_spec_from_json(R"({"width": 4, "height": 3, "goal": [3, 2]})");
    EXPECT_EQ(partial.width, 4);
    EXPECT_EQ(partial.goal, (Cell{3, 2}));
    EXPECT_DOUBLE_EQ(partial.gamma, GridSpec{}.gamma);
}

TEST(PolicyJson, RoundTripAndErrors) {
    Rng rng(3);
    const Policy pi = random_policy(3, 4, rng);
    EXPECT_EQ(policy_from_json(policy_to_json(pi)).matrix(), pi.matrix());
    EXPECT_THROW(policy_from_json(R"({"pi": [[0.5, 0.6]]})"), InvalidInput);
    EXPECT_THROW(policy_from_json(R"({"pi": [[0.5, 0.5], [1.0]]})"), InvalidInput);
}

TEST(RunRecordJson, OneLinePerCheckpoint) {
    RunRecord record{"kt_uniform", "lava_gap", 4, {}};
    record.checkpoints.resize(3);
    record.checkpoints[2].regrets = {{"T1", 0.25}};
    const std::string text = run_record_to_jsonl(record);
    std::istringstream in(text);
    std::string line;
    std::vector<json> lines;
    while (std::getline(in, line)) lines.push_back(json::parse(line));
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0]["run"], "kt_uniform");
    EXPECT_EQ(lines[2]["regrets"]["T1"], 0.25);
}

TEST(Files, WriteAndRead) {
    const auto dir = std::filesystem::temp_directory_path() / "lexirobust_io_test";
    std::filesystem::remove_all(dir);
    write_text_file(dir / "nested" / "a.txt", "hello\n");
    EXPECT_EQ(read_text_file(dir / "nested" / "a.txt"), "hello\n");
    EXPECT_THROW(read_text_file(dir / "missing.txt"), Error);
    std::filesystem::remove_all(dir);
}
