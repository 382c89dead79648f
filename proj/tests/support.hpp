// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <symlat/agents.hpp>
#include <symlat/chat_client.hpp>
#include <symlat/lattice.hpp>
#include <symlat/model.hpp>
#include <symlat/synth.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace symlat::test
{

inline std::filesystem::path fixture(const std::string& name)
{
    return std::filesystem::path(SYMLAT_FIXTURE_DIR) / name;
}

inline std::string read_fixture(const std::string& name)
{
    auto in = std::ifstream(fixture(name));
    auto buffer = std::stringstream();
    buffer << in.rdbuf();
    return buffer.str();
}

inline UnitCell cell_of(std::vector<Vec3> nodes, std::vector<Edge> edges)
{
    return UnitCell(std::move(nodes), std::move(edges));
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6)
{
    return std::abs(analytic - numeric) / std::max({ floor, std::abs(analytic), std::abs(numeric) });
}

/// Small backbone for tests that need a model but not a good one.
inline ModelConfig tiny_config()
{
    auto c = ModelConfig();
    c.d_lattice = 2;
    c.d_position = 2;
    c.d_edge = 2;
    c.d_semantic = 2;
    c.hidden = 6;
    c.rounds = 2;
    c.predictor_hidden = 4;
    c.max_epochs = 20;
    c.predictor_max_epochs = 60;
    c.predictor_patience = 30;
    c.kl_warmup_epochs = 5;
    return c;
}

inline std::vector<Lattice> tiny_dataset()
{
    return synth_dataset(24, all_families(), 0.04, 5);
}

/// Tiny trained model with a trained predictor; deterministic.
inline const ModelParams& tiny_trained_model()
{
    static const auto params = [] {
        const auto data = tiny_dataset();
        const auto trained = train(data, tiny_config()).params;
        return train_predictor(data, trained).params;
    }();
    return params;
}

inline constexpr const char* kBccRequest = "a lightweight lattice with body-centred symmetry";

/// Full design loop on the scripted BCC transcript; returns the trace text.
inline std::string run_bcc_loop()
{
    auto client = MockChatClient::from_file(fixture("bcc_loop.jsonl"));
    const auto data = tiny_dataset();
    auto config = LoopConfig();
    config.evolution.iterations = 100;
    const auto outcome = run_design_loop(kBccRequest, data, tiny_trained_model(), config, client);
    return dump_trace(outcome.trace);
}

} // namespace symlat::test
