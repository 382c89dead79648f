// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <symlat/errors.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

namespace symlat::cli
{

namespace
{

void require_object(const nlohmann::json& j, const std::string& path)
{
    if (!j.is_object())
        throw ValidationError("config '" + path + "' must be a JSON object");
}

void reject_unknown(const nlohmann::json& j, const std::string& path, std::initializer_list<const char*> known)
{
    require_object(j, path);
    for (const auto& [key, value]: j.items())
    {
        auto found = false;
        for (const auto* k: known)
            found = found || key == k;
        if (!found)
            throw ValidationError("unknown config key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

template <typename T>
void overlay(const nlohmann::json& j, const std::string& path, const char* key, T& field)
{
    if (!j.contains(key))
        return;
    const auto& v = j.at(key);
    auto ok = false;
    if constexpr (std::is_same_v<T, bool>)
        ok = v.is_boolean();
    else if constexpr (std::is_integral_v<T>)
        ok = v.is_number_integer();
    else if constexpr (std::is_floating_point_v<T>)
        ok = v.is_number();
    else
        ok = v.is_string();
    if (!ok)
        throw ValidationError("config key '" + path + "." + key + "' has the wrong type");
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
        if (!v.is_number_unsigned())
            throw ValidationError("config key '" + path + "." + key + "' must be non-negative");
    field = v.get<T>();
}

std::string negation_name(NegationMode mode)
{
    return mode == NegationMode::Strict ? "strict" : "clamp";
}

std::string mass_name(MassMode mode)
{
    return mode == MassMode::Balanced ? "balanced" : "partial";
}

} // namespace

NegationMode parse_negation_mode(const std::string& name)
{
    if (name == "strict")
        return NegationMode::Strict;
    if (name == "clamp")
        return NegationMode::ClampPrecision;
    throw ValidationError("unknown negation mode '" + name + "' (expected strict or clamp)");
}

MassMode parse_mass_mode(const std::string& name)
{
    if (name == "balanced")
        return MassMode::Balanced;
    if (name == "partial")
        return MassMode::Partial;
    throw ValidationError("unknown mass mode '" + name + "' (expected balanced or partial)");
}

void RunConfig::resolve()
{
    model.seed = seed;
    loop.seed = seed;
    if (synth.count < 1)
        throw ValidationError("synth.count must be >= 1");
    if (synth.families.empty())
        throw ValidationError("synth.families must not be empty");
    if (!(synth.jitter >= 0.0))
        throw ValidationError("synth.jitter must be >= 0");
    model.validate();
    evolution.validate();
    metrics.validate();
    loop.evolution = evolution;
    loop.validate();
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c)
{
    reject_unknown(j, "", { "seed", "synth", "model", "evolution", "metrics", "loop" });
    overlay(j, "", "seed", c.seed);

    if (j.contains("synth"))
    {
        const auto& s = j.at("synth");
        reject_unknown(s, "synth", { "count", "families", "jitter" });
        overlay(s, "synth", "count", c.synth.count);
        overlay(s, "synth", "jitter", c.synth.jitter);
        if (s.contains("families"))
        {
            if (!s.at("families").is_array())
                throw ValidationError("config key 'synth.families' must be an array of family names");
            c.synth.families.clear();
            for (const auto& f: s.at("families"))
            {
                if (!f.is_string())
                    throw ValidationError("config key 'synth.families' must be an array of family names");
                c.synth.families.push_back(parse_family(f.get<std::string>()));
            }
        }
    }

    if (j.contains("model"))
    {
        require_object(j.at("model"), "model");
        if (j.at("model").contains("seed"))
            throw ValidationError("unknown config key 'model.seed' (use the top-level seed)");
        c.model = model_config_from_json(j.at("model"), c.model);
    }

    if (j.contains("evolution"))
    {
        const auto& e = j.at("evolution");
        reject_unknown(e, "evolution",
                       { "learning_rate", "iterations", "tau_o", "lambda", "alpha", "beta", "negation", "union_mass",
                         "recompute_plan", "weights", "sinkhorn" });
        overlay(e, "evolution", "learning_rate", c.evolution.learning_rate);
        overlay(e, "evolution", "iterations", c.evolution.iterations);
        overlay(e, "evolution", "tau_o", c.evolution.tau_o);
        overlay(e, "evolution", "lambda", c.evolution.lambda);
        overlay(e, "evolution", "alpha", c.evolution.alpha);
        overlay(e, "evolution", "beta", c.evolution.beta);
        overlay(e, "evolution", "recompute_plan", c.evolution.recompute_plan);
        auto name = std::string();
        if (e.contains("negation"))
        {
            overlay(e, "evolution", "negation", name);
            c.evolution.negation = parse_negation_mode(name);
        }
        if (e.contains("union_mass"))
        {
            overlay(e, "evolution", "union_mass", name);
            c.evolution.union_mass = parse_mass_mode(name);
        }
        if (e.contains("weights"))
        {
            const auto& w = e.at("weights");
            reject_unknown(w, "evolution.weights", { "semantic", "alignment", "unmatched", "prior" });
            overlay(w, "evolution.weights", "semantic", c.evolution.weights.semantic);
            overlay(w, "evolution.weights", "alignment", c.evolution.weights.alignment);
            overlay(w, "evolution.weights", "unmatched", c.evolution.weights.unmatched);
            overlay(w, "evolution.weights", "prior", c.evolution.weights.prior);
        }
        if (e.contains("sinkhorn"))
        {
            const auto& s = e.at("sinkhorn");
            reject_unknown(s, "evolution.sinkhorn", { "entropic_eps", "max_iters", "tol", "mode" });
            overlay(s, "evolution.sinkhorn", "entropic_eps", c.evolution.sinkhorn.entropic_eps);
            overlay(s, "evolution.sinkhorn", "max_iters", c.evolution.sinkhorn.max_iters);
            overlay(s, "evolution.sinkhorn", "tol", c.evolution.sinkhorn.tol);
            if (s.contains("mode"))
            {
                overlay(s, "evolution.sinkhorn", "mode", name);
                c.evolution.sinkhorn.mode = parse_mass_mode(name);
            }
        }
    }

    if (j.contains("metrics"))
    {
        const auto& m = j.at("metrics");
        reject_unknown(m, "metrics", { "eps_sym", "eps_per", "eps_cov", "eps_rep" });
        overlay(m, "metrics", "eps_sym", c.metrics.eps_sym);
        overlay(m, "metrics", "eps_per", c.metrics.eps_per);
        overlay(m, "metrics", "eps_cov", c.metrics.eps_cov);
        overlay(m, "metrics", "eps_rep", c.metrics.eps_rep);
    }

    if (j.contains("loop"))
    {
        const auto& l = j.at("loop");
        reject_unknown(l, "loop", { "tau_ds", "tau_gs", "max_iters", "knn_k", "retries", "operator" });
        overlay(l, "loop", "tau_ds", c.loop.tau_ds);
        overlay(l, "loop", "tau_gs", c.loop.tau_gs);
        overlay(l, "loop", "max_iters", c.loop.max_iters);
        overlay(l, "loop", "knn_k", c.loop.knn_k);
        overlay(l, "loop", "retries", c.loop.retries);
        if (l.contains("operator"))
        {
            auto name = std::string();
            overlay(l, "loop", "operator", name);
            c.loop.op = parse_operator(name);
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ValidationError("cannot open config file " + path.string());
    auto buffer = std::stringstream();
    buffer << in.rdbuf();
    try
    {
        return run_config_from_json(nlohmann::json::parse(buffer.str()));
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError("config file " + path.string() + ": " + e.what());
    }
}

nlohmann::json run_config_to_json(const RunConfig& c)
{
    auto families = nlohmann::json::array();
    for (const auto f: c.synth.families)
        families.push_back(std::string(family_name(f)));
    auto model = model_config_to_json(c.model);
    model.erase("seed");
    const auto& e = c.evolution;
    return {
        { "seed", c.seed },
        { "synth", { { "count", c.synth.count }, { "families", families }, { "jitter", c.synth.jitter } } },
        { "model", model },
        { "evolution",
          { { "learning_rate", e.learning_rate },
            { "iterations", e.iterations },
            { "tau_o", e.tau_o },
            { "lambda", e.lambda },
            { "alpha", e.alpha },
            { "beta", e.beta },
            { "negation", negation_name(e.negation) },
            { "union_mass", mass_name(e.union_mass) },
            { "recompute_plan", e.recompute_plan },
            { "weights",
              { { "semantic", e.weights.semantic },
                { "alignment", e.weights.alignment },
                { "unmatched", e.weights.unmatched },
                { "prior", e.weights.prior } } },
            { "sinkhorn",
              { { "entropic_eps", e.sinkhorn.entropic_eps },
                { "max_iters", e.sinkhorn.max_iters },
                { "tol", e.sinkhorn.tol },
                { "mode", mass_name(e.sinkhorn.mode) } } } } },
        { "metrics",
          { { "eps_sym", c.metrics.eps_sym },
            { "eps_per", c.metrics.eps_per },
            { "eps_cov", c.metrics.eps_cov },
            { "eps_rep", c.metrics.eps_rep } } },
        { "loop",
          { { "tau_ds", c.loop.tau_ds },
            { "tau_gs", c.loop.tau_gs },
            { "max_iters", c.loop.max_iters },
            { "knn_k", c.loop.knn_k },
            { "retries", c.loop.retries },
            { "operator", std::string(operator_name(c.loop.op)) } } },
    };
}

} // namespace symlat::cli
