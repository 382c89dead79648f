// SPDX-License-Identifier: Apache-2.0
#include <symlat/agents.hpp>
#include <symlat/errors.hpp>
#include <symlat/lattice_io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace symlat
{

namespace
{

constexpr const char* kDesignerSystem =
    "You are the Designer in a metamaterial design team. Given a design request, identify a simple, "
    "well-documented truss lattice from the literature that best matches it and describe one unit cell.\n"
    "Use fractional coordinates in [0, 1] and zero-based node indices. Reply in exactly this format:\n"
    "\n"
    "Node number: <N>\n"
    "Node coordinates (fractional):\n"
    "(x, y, z)\n"
    "...\n"
    "Edges:\n"
    "(i, j)\n"
    "...\n"
    "\n"
    "A short rationale may follow the edge list.";

constexpr const char* kDesignerReminder =
    "Your previous reply could not be read as a scaffold ({error}). Reply again with the 'Node number:' line, "
    "one '(x, y, z)' line per node and one '(i, j)' line per edge after 'Edges:'.";

constexpr const char* kSupervisorSystem =
    "You are the Supervisor in a metamaterial design team. You judge how well a candidate meets the design "
    "request, using its geometry and its predicted mechanical properties (young, shear, poisson; normalized "
    "desk-scale units).\n"
    "Reply with a single JSON object and nothing else.";

constexpr const char* kScaffoldContract =
    "Return {\"score\": <number in [0, 1]>, \"improved_prompt\": \"<a sharper design request for the Designer>\"}.";

constexpr const char* kStructureContract =
    "Return {\"score\": <number in [0, 1]>, \"improved_properties\": {\"young\": <number>, \"shear\": <number>, "
    "\"poisson\": <number>}} where improved_properties are the property targets the next candidate should reach.";

constexpr const char* kSupervisorReminder =
    "Your previous reply could not be read ({error}). Reply with one JSON object exactly as requested.";

std::string fill(std::string text, const std::string& error)
{
    const auto at = text.find("{error}");
    if (at != std::string::npos)
        text.replace(at, 7, error);
    return text;
}

std::string number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string describe_properties(const PropertyVector& p)
{
    auto out = std::string();
    for (std::size_t k = 0; k < p.names.size(); ++k)
        out += (k == 0 ? "" : ", ") + p.names[k] + " = " + number(p.values[static_cast<Eigen::Index>(k)]);
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k)
{
    auto z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

nlohmann::json cell_json(const UnitCell& cell)
{
    auto nodes = nlohmann::json::array();
    for (const auto& p: cell.nodes())
        nodes.push_back({ p.x(), p.y(), p.z() });
    auto edges = nlohmann::json::array();
    for (const auto& e: cell.edges())
        edges.push_back({ e.a, e.b });
    return { { "nodes", nodes }, { "edges", edges } };
}

nlohmann::json terms_json(const LossTerms& t)
{
    return { { "semantic", t.semantic },
             { "alignment", t.alignment },
             { "unmatched", t.unmatched },
             { "prior", t.prior },
             { "total", t.total } };
}

void round_numbers(nlohmann::json& j)
{
    if (j.is_number_float())
    {
        j = std::strtod(number(j.get<double>()).c_str(), nullptr);
        return;
    }
    if (j.is_array() || j.is_object())
        for (auto& v: j)
            round_numbers(v);
}

template <typename Parse>
auto ask_with_retries(ChatClient& client, const RenderedPrompt& prompt, const char* reminder, int retries,
                      Parse parse) -> decltype(parse(std::string()))
{
    if (retries < 0)
        throw ValidationError("retry budget must be >= 0");
    auto user = prompt.user;
    auto last = std::string();
    for (int attempt = 0; attempt <= retries; ++attempt)
    {
        const auto reply = client.send(prompt.system, user);
        try
        {
            return parse(reply);
        }
        catch (const ParseError& e)
        {
            last = e.what();
            user = prompt.user + "\n\n" + fill(reminder, last);
        }
    }
    throw ParseError("reply unparseable after " + std::to_string(retries + 1) + " attempt(s): " + last);
}

} // namespace

RenderedPrompt designer_prompt(const std::string& request)
{
    return { kDesignerSystem, "Design request: " + request };
}

RenderedPrompt supervisor_scaffold_prompt(const UnitCell& scaffold, const std::string& request,
                                          const PropertyVector& predicted)
{
    auto user = std::ostringstream();
    user << "Task: scaffold review.\n"
         << "Design request: " << request << "\n\n"
         << "Scaffold:\n"
         << format_scaffold_text(scaffold) << "\n"
         << "Predicted properties: " << describe_properties(predicted) << "\n\n"
         << kScaffoldContract;
    return { kSupervisorSystem, user.str() };
}

RenderedPrompt supervisor_structure_prompt(const Lattice& lattice, const std::string& request,
                                           const PropertyVector& predicted)
{
    auto user = std::ostringstream();
    user << "Task: structure review.\n"
         << "Design request: " << request << "\n\n"
         << "Candidate unit cell:\n"
         << format_scaffold_text(lattice.cell()) << "\n"
         << "Predicted properties: " << describe_properties(predicted) << "\n\n"
         << kStructureContract;
    return { kSupervisorSystem, user.str() };
}

UnitCell designer_step(const std::string& request, ChatClient& client, int retries)
{
    if (request.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ValidationError("design request must not be empty");
    return ask_with_retries(client, designer_prompt(request), kDesignerReminder, retries,
                            [](const std::string& reply) { return parse_scaffold_text(reply); });
}

EvaluationResponse parse_evaluation(const std::string& reply, EvaluationKind kind)
{
    const auto open = reply.find('{');
    if (open == std::string::npos)
        throw ParseError("no JSON object in the reply");
    // First balanced {...} block, skipping braces inside strings.
    auto depth = 0;
    auto in_string = false;
    auto escaped = false;
    auto close = std::string::npos;
    for (auto k = open; k < reply.size() && close == std::string::npos; ++k)
    {
        const auto c = reply[k];
        if (in_string)
        {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            close = k;
    }
    if (close == std::string::npos)
        throw ParseError("unterminated JSON object in the reply");

    auto j = nlohmann::json();
    try
    {
        j = nlohmann::json::parse(reply.substr(open, close - open + 1));
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.contains("score") || !j.at("score").is_number())
        throw ParseError("missing numeric 'score'");

    auto out = EvaluationResponse();
    out.score = j.at("score").get<double>();
    if (!(out.score >= 0.0 && out.score <= 1.0))
        throw ValidationError("supervisor score " + number(out.score) + " outside [0, 1]");

    if (kind == EvaluationKind::Scaffold)
    {
        if (!j.contains("improved_prompt") || !j.at("improved_prompt").is_string())
            throw ParseError("missing string 'improved_prompt'");
        out.improved_prompt = j.at("improved_prompt").get<std::string>();
    }
    else
    {
        if (!j.contains("improved_properties") || !j.at("improved_properties").is_object())
            throw ParseError("missing object 'improved_properties'");
        try
        {
            out.improved_properties = properties_from_json(j.at("improved_properties"));
        }
        catch (const ParseError&)
        {
            throw;
        }
        catch (const ValidationError& e)
        {
            throw ParseError(std::string("bad improved_properties: ") + e.what());
        }
    }
    return out;
}

EvaluationResponse supervisor_eval_scaffold(const UnitCell& scaffold, const std::string& request,
                                            const PropertyVector& predicted, ChatClient& client, int retries)
{
    return ask_with_retries(client, supervisor_scaffold_prompt(scaffold, request, predicted), kSupervisorReminder,
                            retries,
                            [](const std::string& r) { return parse_evaluation(r, EvaluationKind::Scaffold); });
}

EvaluationResponse supervisor_eval_structure(const Lattice& lattice, const std::string& request,
                                             const PropertyVector& predicted, ChatClient& client, int retries)
{
    return ask_with_retries(client, supervisor_structure_prompt(lattice, request, predicted), kSupervisorReminder,
                            retries,
                            [](const std::string& r) { return parse_evaluation(r, EvaluationKind::Structure); });
}

std::vector<std::size_t> knn_indices(const PropertyVector& target, std::span<const Lattice> dataset, int k)
{
    if (k < 1)
        throw ValidationError("k must be >= 1");
    auto admitted = std::vector<std::size_t>();
    auto pool = std::vector<Lattice>();
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (dataset[i].properties() && validate_cell(dataset[i].cell()).empty())
        {
            admitted.push_back(i);
            pool.push_back(dataset[i]);
        }
    if (admitted.empty())
        throw ValidationError("no labelled dataset item passes validate_cell");

    const auto norm = Normalization::fit(pool);
    if (target.names != norm.names)
        throw ValidationError("target property names do not match the dataset");
    const auto t = norm.normalize(target.values);

    auto dist = std::vector<double>(pool.size());
    for (std::size_t k2 = 0; k2 < pool.size(); ++k2)
        dist[k2] = (norm.normalize(pool[k2].properties()->values) - t).norm();
    auto order = std::vector<std::size_t>(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    auto out = std::vector<std::size_t>();
    for (std::size_t r = 0; r < order.size() && out.size() < static_cast<std::size_t>(k); ++r)
        out.push_back(admitted[order[r]]);
    return out;
}

LatentState knn_init(const PropertyVector& target, std::span<const Lattice> dataset, const ModelParams& params, int k)
{
    if (dataset.empty())
        throw ValidationError("nearest-neighbour initialization needs a non-empty dataset");
    return encode(dataset[knn_indices(target, dataset, k).front()], params);
}

void LoopConfig::validate() const
{
    if (!(tau_ds >= 0.0 && tau_ds <= 1.0) || !(tau_gs >= 0.0 && tau_gs <= 1.0))
        throw ValidationError("score thresholds must lie in [0, 1]");
    if (max_iters < 1)
        throw ValidationError("max_iters must be >= 1");
    if (knn_k < 1)
        throw ValidationError("knn k must be >= 1");
    if (retries < 0)
        throw ValidationError("retries must be >= 0");
    evolution.validate();
}

DesignOutcome run_design_loop(const std::string& request, std::span<const Lattice> dataset,
                              const ModelParams& params, const LoopConfig& config, ChatClient& client)
{
    config.validate();
    if (dataset.empty())
        throw ValidationError("design loop needs a non-empty dataset");
    if (!params.predictor_trained)
        throw ValidationError("design loop needs a checkpoint with a trained property predictor");

    auto trace = nlohmann::json::object();
    trace["request"] = request;
    trace["config"] = { { "tau_ds", config.tau_ds },         { "tau_gs", config.tau_gs },
                        { "max_iters", config.max_iters },   { "knn_k", config.knn_k },
                        { "operator", operator_name(config.op) }, { "lambda", config.evolution.lambda },
                        { "alpha", config.evolution.alpha }, { "beta", config.evolution.beta },
                        { "seed", config.seed } };

    // Scaffold refinement.
    auto prompt = request;
    auto design = nlohmann::json::array();
    auto best_design = -1.0;
    auto best_scaffold = std::optional<UnitCell>();
    auto best_prompt = request;
    auto best_predicted = PropertyVector();
    for (int t = 1; t <= config.max_iters; ++t)
    {
        const auto scaffold = designer_step(prompt, client, config.retries);
        const auto predicted = predict_properties(Lattice::from_cell(scaffold), params);
        const auto eval = supervisor_eval_scaffold(scaffold, prompt, predicted, client, config.retries);
        design.push_back({ { "iteration", t },
                           { "prompt", prompt },
                           { "scaffold", cell_json(scaffold) },
                           { "predicted", properties_to_json(predicted) },
                           { "score", eval.score },
                           { "improved_prompt", *eval.improved_prompt } });
        if (eval.score > best_design)
        {
            best_design = eval.score;
            best_scaffold = scaffold;
            best_prompt = prompt;
            best_predicted = predicted;
        }
        if (eval.score >= config.tau_ds)
            break;
        prompt = *eval.improved_prompt;
    }
    trace["design"] = design;

    // Structure refinement.
    auto target = best_predicted;
    auto generation = nlohmann::json::array();
    auto best_generation = -1.0;
    auto best = std::optional<Generated>();
    for (int t = 1; t <= config.max_iters; ++t)
    {
        const auto neighbors = knn_indices(target, dataset, config.knn_k);
        const auto pick = neighbors[static_cast<std::size_t>(t - 1) % neighbors.size()];
        auto decode_options = DecodeOptions();
        decode_options.seed = mix_seed(config.seed, static_cast<std::uint64_t>(t));
        decode_options.sample = false;
        auto generated =
            generate_evolved(dataset[pick], *best_scaffold, config.op, params, config.evolution, decode_options);
        const auto predicted = predict_properties(generated.lattice, params);
        const auto eval = supervisor_eval_structure(generated.lattice, best_prompt, predicted, client, config.retries);
        if (eval.improved_properties->names != params.normalization.names)
            throw ValidationError("supervisor property names do not match the model");

        generation.push_back({ { "iteration", t },
                               { "target", properties_to_json(target) },
                               { "neighbor", pick },
                               { "operator", operator_name(config.op) },
                               { "evolution",
                                 { { "iterations", generated.trace.iterations.size() - 1 },
                                   { "initial", terms_json(generated.trace.iterations.front()) },
                                   { "final", terms_json(generated.trace.iterations.back()) } } },
                               { "structure", cell_json(generated.lattice.cell()) },
                               { "predicted", properties_to_json(predicted) },
                               { "score", eval.score },
                               { "improved_properties", properties_to_json(*eval.improved_properties) } });
        if (eval.score > best_generation)
        {
            best_generation = eval.score;
            best = std::move(generated);
            best->properties = predicted;
        }
        if (eval.score >= config.tau_gs)
            break;
        target = *eval.improved_properties;
    }
    trace["generation"] = generation;

    auto out = DesignOutcome{ best->lattice,
                              best->properties,
                              *best_scaffold,
                              best_design,
                              best_generation,
                              best_design < config.tau_ds,
                              best_generation < config.tau_gs,
                              {} };
    trace["result"] = { { "design_score", out.design_score },
                        { "design_below_threshold", out.design_below_threshold },
                        { "generation_score", out.generation_score },
                        { "generation_below_threshold", out.generation_below_threshold },
                        { "lattice", lattice_to_json(out.lattice) },
                        { "properties", properties_to_json(out.properties) } };
    out.trace = std::move(trace);
    return out;
}

std::string dump_trace(const nlohmann::json& trace)
{
    auto copy = trace;
    round_numbers(copy);
    return copy.dump(2) + "\n";
}

} // namespace symlat
