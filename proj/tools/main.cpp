// SPDX-License-Identifier: Apache-2.0
// symlat: command-line front end. Every successful command writes a single
// JSON document to stdout; errors go to stderr with exit code 1 (invalid
// input) or 2 (runtime failure).
#include "run_config.hpp"

#include <symlat/agents.hpp>
#include <symlat/chat_client.hpp>
#include <symlat/errors.hpp>
#include <symlat/evolution.hpp>
#include <symlat/lattice_io.hpp>
#include <symlat/metrics.hpp>
#include <symlat/model.hpp>
#include <symlat/synth.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace symlat;

namespace
{

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct LoadedSet
{
    std::vector<fs::path> files;
    std::vector<Lattice> lattices;
};

// Files listed in manifest.json, in manifest order, when a manifest exists.
// Otherwise every *.json file except manifest.json, in path order.
LoadedSet load_directory(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw ValidationError("not a directory: " + dir.string());
    auto out = LoadedSet();
    const auto manifest_path = dir / "manifest.json";
    if (fs::is_regular_file(manifest_path))
    {
        auto in = std::ifstream(manifest_path);
        json manifest;
        try
        {
            manifest = json::parse(in);
        }
        catch (const json::exception& e)
        {
            throw ValidationError("malformed manifest " + manifest_path.string() + ": " + e.what());
        }
        if (!manifest.is_object() || !manifest.contains("files") || !manifest["files"].is_array())
            throw ValidationError("manifest has no files array: " + manifest_path.string());
        for (const auto& entry: manifest["files"])
        {
            if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string())
                throw ValidationError("manifest entry without file: " + manifest_path.string());
            out.files.push_back(dir / entry["file"].get<std::string>());
        }
    }
    else
    {
        for (const auto& entry: fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json" && entry.path().filename() != "manifest.json")
                out.files.push_back(entry.path());
        std::sort(out.files.begin(), out.files.end());
    }
    if (out.files.empty())
        throw ValidationError("no lattice files in " + dir.string());
    for (const auto& f: out.files)
        out.lattices.push_back(read_lattice_file(f));
    return out;
}

std::string read_text(const fs::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    auto buffer = std::stringstream();
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    auto out = std::ofstream(path, std::ios::binary);
    if (!(out << text))
        throw Error("cannot write " + path.string());
}

// A lattice JSON file or a plain-text scaffold block.
UnitCell read_scaffold(const fs::path& path)
{
    const auto text = read_text(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{')
        return parse_lattice(text).cell();
    return parse_scaffold_text(text);
}

json gaussian_json(const DiagGaussian& g)
{
    auto mean = json::array();
    auto sd = json::array();
    for (Eigen::Index k = 0; k < g.dim(); ++k)
    {
        mean.push_back(g.mean()[k]);
        sd.push_back(g.std()[k]);
    }
    return { { "mean", mean }, { "std", sd } };
}

json latent_json(const LatentState& s)
{
    auto pos = json::array();
    auto edge = json::array();
    for (std::size_t i = 0; i < s.node_count(); ++i)
    {
        pos.push_back(gaussian_json(s.position[i]));
        edge.push_back(gaussian_json(s.edge[i]));
    }
    return { { "lattice", gaussian_json(s.lattice) },
             { "semantic", gaussian_json(s.semantic) },
             { "position", pos },
             { "edge", edge } };
}

json terms_json(const LossTerms& t)
{
    return { { "semantic", t.semantic },
             { "alignment", t.alignment },
             { "unmatched", t.unmatched },
             { "prior", t.prior },
             { "total", t.total } };
}

json breakdown_json(const LossBreakdown& b)
{
    return { { "rec_lattice", b.rec_lattice },   { "rec_position", b.rec_position },
             { "rec_edge", b.rec_edge },         { "rec_properties", b.rec_properties },
             { "kl_lattice", b.kl_lattice },     { "kl_position", b.kl_position },
             { "kl_edge", b.kl_edge },           { "kl_semantic", b.kl_semantic },
             { "total", b.total } };
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json r2_json(const std::vector<Lattice>& data, const ModelParams& params)
{
    const auto& names = params.normalization.names;
    const auto dims = static_cast<Eigen::Index>(names.size());
    auto truth = Eigen::MatrixXd(static_cast<Eigen::Index>(data.size()), dims);
    auto pred = truth;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        if (!data[i].properties())
            throw ValidationError("every lattice needs property labels");
        truth.row(static_cast<Eigen::Index>(i)) = data[i].properties()->values.transpose();
        pred.row(static_cast<Eigen::Index>(i)) = predict_properties(data[i], params).values.transpose();
    }
    auto out = json::object();
    for (Eigen::Index k = 0; k < dims; ++k)
    {
        const auto mean = truth.col(k).mean();
        const auto ss_tot = (truth.col(k).array() - mean).square().sum();
        const auto ss_res = (truth.col(k) - pred.col(k)).squaredNorm();
        out[names[static_cast<std::size_t>(k)]] = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    }
    return out;
}

void emit(const json& j)
{
    std::cout << j.dump(2) << "\n";
}

void print_error(const std::string& kind, const std::string& message)
{
    std::cerr << json{ { "error", kind }, { "message", message } }.dump() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    auto app = CLI::App("Symbolic latent evolution toolkit for truss-lattice metamaterials", "symlat");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "symlat 0.1.0");

    auto config_path = std::string();
    auto seed = std::uint64_t(0);
    app.add_option("--config", config_path, "JSON run configuration (flags override it)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "global seed (default 7)");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic lattice set and manifest");
    auto synth_out = std::string();
    auto synth_count = 0;
    auto synth_families = std::vector<std::string>();
    auto synth_jitter = 0.0;
    synth->add_option("--out", synth_out, "output directory")->required();
    auto* count_opt = synth->add_option("--count", synth_count, "number of lattices (default 200)");
    auto* families_opt =
        synth->add_option("--families", synth_families, "comma-separated families: cubic,bcc,fcc,octet")
            ->delimiter(',');
    auto* jitter_opt = synth->add_option("--jitter", synth_jitter, "uniform coordinate noise (default 0.03)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the latent model on a lattice directory");
    auto data_dir = std::string();
    auto out_path = std::string();
    auto epochs = 0;
    auto lr = 0.0;
    auto conditional = false;
    train_cmd->add_option("--data", data_dir, "directory of lattice JSON files")->required();
    train_cmd->add_option("--out", out_path, "checkpoint path")->required();
    auto* epochs_opt = train_cmd->add_option("--epochs", epochs, "maximum epochs (default 300)");
    auto* lr_opt = train_cmd->add_option("--lr", lr, "Adam learning rate (default 3e-3)");
    auto* cond_opt = train_cmd->add_flag("--conditional", conditional, "condition decoder heads on properties");

    // train-predictor
    auto* train_pred = app.add_subcommand("train-predictor", "fit the property head on a frozen backbone");
    auto checkpoint = std::string();
    train_pred->add_option("--data", data_dir, "directory of labelled lattice JSON files")->required();
    train_pred->add_option("--checkpoint", checkpoint, "input checkpoint")->required()->check(CLI::ExistingFile);
    train_pred->add_option("--out", out_path, "output checkpoint")->required();

    // encode / predict
    auto input = std::string();
    auto* encode_cmd = app.add_subcommand("encode", "print the latent Gaussians of a lattice");
    encode_cmd->add_option("--checkpoint", checkpoint, "checkpoint")->required()->check(CLI::ExistingFile);
    encode_cmd->add_option("--input", input, "lattice JSON file")->required()->check(CLI::ExistingFile);
    auto* predict_cmd = app.add_subcommand("predict", "predict mechanical properties of a lattice");
    predict_cmd->add_option("--checkpoint", checkpoint, "checkpoint with a trained predictor")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--input", input, "lattice JSON file")->required()->check(CLI::ExistingFile);

    // evolve
    auto* evolve_cmd = app.add_subcommand("evolve", "apply a symbolic operator in latent space and decode");
    auto source = std::string();
    auto scaffold = std::string();
    auto op_name = std::string("mix");
    auto lambda = 0.0;
    auto alpha = 0.0;
    auto beta = 0.0;
    auto iters = 0;
    auto trace_out = std::string();
    auto dump_plan = false;
    evolve_cmd->add_option("--checkpoint", checkpoint, "checkpoint")->required()->check(CLI::ExistingFile);
    evolve_cmd->add_option("--source", source, "source lattice JSON")->required()->check(CLI::ExistingFile);
    evolve_cmd->add_option("--scaffold", scaffold, "scaffold: lattice JSON or scaffold text")
        ->required()
        ->check(CLI::ExistingFile);
    evolve_cmd->add_option("--op", op_name, "union | mix | intersect | negate")
        ->check(CLI::IsMember({ "union", "mix", "intersect", "negate" }));
    auto* lambda_opt = evolve_cmd->add_option("--lambda", lambda, "mix weight toward the scaffold (default 0.5)");
    auto* alpha_opt = evolve_cmd->add_option("--alpha", alpha, "negate preservation strength (default 1)");
    auto* beta_opt = evolve_cmd->add_option("--beta", beta, "negate suppression strength (default 0.5)");
    auto* iters_opt = evolve_cmd->add_option("--iters", iters, "optimization iterations (default 300)");
    evolve_cmd->add_option("--trace-out", trace_out, "write per-iteration loss terms as JSON");
    evolve_cmd->add_option("--out", out_path, "write the decoded lattice JSON");
    evolve_cmd->add_flag("--dump-plan", dump_plan, "include the transport plan in the output");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "validity and diversity report for a lattice directory");
    auto reference = std::string();
    auto eps = std::array<double, 4>{};
    metrics_cmd->add_option("--dir", data_dir, "directory of lattice JSON files")->required();
    metrics_cmd->add_option("--reference", reference, "reference directory for coverage recall");
    auto* eps_sym_opt = metrics_cmd->add_option("--eps-sym", eps[0], "symmetry tolerance (default 0.05)");
    auto* eps_per_opt = metrics_cmd->add_option("--eps-per", eps[1], "periodicity tolerance (default 0.05)");
    auto* eps_cov_opt = metrics_cmd->add_option("--eps-cov", eps[2], "coverage tolerance (default 0.15)");
    auto* eps_rep_opt = metrics_cmd->add_option("--eps-rep", eps[3], "repeat tolerance (default 0.05)");

    // agent-loop
    auto* loop_cmd = app.add_subcommand("agent-loop", "run the Designer/Supervisor loops");
    auto prompt = std::string();
    auto mock = std::string();
    auto live = false;
    auto tau_ds = 0.0;
    auto tau_gs = 0.0;
    auto max_iters = 0;
    loop_cmd->add_option("--prompt", prompt, "design request")->required();
    auto* mock_opt = loop_cmd->add_option("--mock", mock, "JSONL mock transcript")->check(CLI::ExistingFile);
    auto* live_opt = loop_cmd->add_flag("--live", live, "use CHAT_ENDPOINT / CHAT_MODEL / CHAT_API_KEY");
    mock_opt->excludes(live_opt);
    loop_cmd->add_option("--checkpoint", checkpoint, "checkpoint with a trained predictor")
        ->required()
        ->check(CLI::ExistingFile);
    loop_cmd->add_option("--data", data_dir, "labelled dataset for nearest-neighbour initialization")->required();
    auto* loop_op_opt = loop_cmd->add_option("--op", op_name, "operator inside structure refinement (default mix)")
                            ->check(CLI::IsMember({ "union", "mix", "intersect", "negate" }));
    auto* loop_lambda_opt = loop_cmd->add_option("--lambda", lambda, "mix weight (default 0.5)");
    auto* tau_ds_opt = loop_cmd->add_option("--tau-ds", tau_ds, "scaffold score threshold (default 0.6)");
    auto* tau_gs_opt = loop_cmd->add_option("--tau-gs", tau_gs, "structure score threshold (default 0.6)");
    auto* max_iters_opt = loop_cmd->add_option("--max-iters", max_iters, "iterations per phase (default 3)");
    loop_cmd->add_option("--trace-out", trace_out, "also write the trace to this file");

    // export-tiled
    auto* export_cmd = app.add_subcommand("export-tiled", "tile a lattice into a Cartesian point/edge cloud");
    auto reps = std::vector<int>{ 2, 2, 2 };
    export_cmd->add_option("--input", input, "lattice JSON file")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--reps", reps, "repetitions along l1,l2,l3 (default 2,2,2)")
        ->delimiter(',')
        ->expected(3);
    export_cmd->add_option("--out", out_path, "also write the cloud to this file");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        print_error("usage", e.what());
        return kExitValidation;
    }

    try
    {
        auto config = config_path.empty() ? cli::RunConfig() : cli::load_run_config(config_path);
        if (seed_opt->count() > 0)
            config.seed = seed;
        if (count_opt->count() > 0)
            config.synth.count = synth_count;
        if (families_opt->count() > 0)
        {
            config.synth.families.clear();
            for (const auto& f: synth_families)
                config.synth.families.push_back(parse_family(f));
        }
        if (jitter_opt->count() > 0)
            config.synth.jitter = synth_jitter;
        if (epochs_opt->count() > 0)
            config.model.max_epochs = epochs;
        if (lr_opt->count() > 0)
            config.model.learning_rate = lr;
        if (cond_opt->count() > 0)
            config.model.conditional = conditional;
        if (lambda_opt->count() > 0 || loop_lambda_opt->count() > 0)
            config.evolution.lambda = lambda;
        if (alpha_opt->count() > 0)
            config.evolution.alpha = alpha;
        if (beta_opt->count() > 0)
            config.evolution.beta = beta;
        if (iters_opt->count() > 0)
            config.evolution.iterations = iters;
        if (eps_sym_opt->count() > 0)
            config.metrics.eps_sym = eps[0];
        if (eps_per_opt->count() > 0)
            config.metrics.eps_per = eps[1];
        if (eps_cov_opt->count() > 0)
            config.metrics.eps_cov = eps[2];
        if (eps_rep_opt->count() > 0)
            config.metrics.eps_rep = eps[3];
        if (loop_op_opt->count() > 0)
            config.loop.op = parse_operator(op_name);
        if (tau_ds_opt->count() > 0)
            config.loop.tau_ds = tau_ds;
        if (tau_gs_opt->count() > 0)
            config.loop.tau_gs = tau_gs;
        if (max_iters_opt->count() > 0)
            config.loop.max_iters = max_iters;
        config.resolve();

        if (synth->parsed())
        {
            const auto data =
                synth_dataset(config.synth.count, config.synth.families, config.synth.jitter, config.seed);
            const auto dir = fs::path(synth_out);
            fs::create_directories(dir);
            auto files = json::array();
            auto families = json::array();
            for (const auto f: config.synth.families)
                families.push_back(std::string(family_name(f)));
            for (std::size_t k = 0; k < data.size(); ++k)
            {
                const auto family = std::string(family_name(config.synth.families[k % config.synth.families.size()]));
                char stem[64];
                std::snprintf(stem, sizeof stem, "%s-%04zu", family.c_str(), k);
                const auto lattice = data[k].with_name(stem);
                const auto file = std::string(stem) + ".json";
                write_lattice_file(dir / file, lattice);
                files.push_back({ { "file", file },
                                  { "name", stem },
                                  { "family", family },
                                  { "properties", properties_to_json(*lattice.properties()) } });
            }
            const json manifest = { { "count", data.size() },
                                    { "families", families },
                                    { "jitter", config.synth.jitter },
                                    { "seed", config.seed },
                                    { "files", files } };
            write_text(dir / "manifest.json", manifest.dump(2) + "\n");
            emit({ { "command", "synth" },
                   { "out", dir.string() },
                   { "count", data.size() },
                   { "manifest", (dir / "manifest.json").string() } });
        }
        else if (train_cmd->parsed())
        {
            const auto set = load_directory(data_dir);
            const auto report = train(set.lattices, config.model);
            if (report.diverged)
                throw NumericalError("training diverged (non-finite loss)");
            save_checkpoint(out_path, report.params);
            emit({ { "command", "train" },
                   { "checkpoint", out_path },
                   { "structures", set.lattices.size() },
                   { "epochs", report.epochs.size() },
                   { "best_epoch", report.best_epoch },
                   { "initial_loss", breakdown_json(report.epochs.front()) },
                   { "best_loss", breakdown_json(report.epochs[static_cast<std::size_t>(report.best_epoch)]) },
                   { "parameter_count", report.params.parameter_count() },
                   { "backbone_hash", hex(report.params.backbone_hash()) } });
        }
        else if (train_pred->parsed())
        {
            const auto set = load_directory(data_dir);
            const auto params = load_checkpoint(checkpoint);
            const auto report = train_predictor(set.lattices, params);
            save_checkpoint(out_path, report.params);
            const auto best = static_cast<std::size_t>(report.best_epoch);
            emit({ { "command", "train-predictor" },
                   { "checkpoint", out_path },
                   { "best_epoch", report.best_epoch },
                   { "train_mse", report.train_mse.at(best) },
                   { "validation_mse", report.validation_mse.empty() ? json(nullptr) : json(report.validation_mse.at(best)) },
                   { "r2", r2_json(set.lattices, report.params) },
                   { "backbone_hash", hex(report.params.backbone_hash()) } });
        }
        else if (encode_cmd->parsed())
        {
            const auto params = load_checkpoint(checkpoint);
            const auto lattice = read_lattice_file(input);
            emit({ { "command", "encode" }, { "input", input }, { "latent", latent_json(encode(lattice, params)) } });
        }
        else if (predict_cmd->parsed())
        {
            const auto params = load_checkpoint(checkpoint);
            const auto lattice = read_lattice_file(input);
            emit({ { "command", "predict" },
                   { "input", input },
                   { "properties", properties_to_json(predict_properties(lattice, params)) } });
        }
        else if (evolve_cmd->parsed())
        {
            const auto params = load_checkpoint(checkpoint);
            const auto src = read_lattice_file(source);
            const auto scaf = read_scaffold(scaffold);
            const auto op = parse_operator(op_name);
            auto decode_options = DecodeOptions();
            decode_options.seed = config.seed;
            decode_options.sample = false;
            const auto g = generate_evolved(src, scaf, op, params, config.evolution, decode_options);
            const auto properties =
                params.predictor_trained ? predict_properties(g.lattice, params) : g.properties;

            auto trace = json::array();
            for (const auto& t: g.trace.iterations)
                trace.push_back(terms_json(t));
            if (!trace_out.empty())
                write_text(trace_out, json{ { "operator", operator_name(op) }, { "iterations", trace } }.dump(2) + "\n");
            if (!out_path.empty())
                write_lattice_file(out_path, g.lattice);

            auto out = json{ { "command", "evolve" },
                             { "operator", operator_name(op) },
                             { "source", source },
                             { "scaffold", scaffold },
                             { "iterations", g.trace.iterations.size() - 1 },
                             { "initial_loss", terms_json(g.trace.iterations.front()) },
                             { "final_loss", terms_json(g.trace.iterations.back()) },
                             { "rho", g.target.plan.rho },
                             { "unmatched", g.target.unmatched },
                             { "appended", g.target.appended },
                             { "distance_to_source", structure_distance(g.lattice.cell(), src.cell()) },
                             { "distance_to_scaffold", structure_distance(g.lattice.cell(), scaf) },
                             { "lattice", lattice_to_json(g.lattice) },
                             { "properties", properties_to_json(properties) } };
            if (dump_plan)
            {
                auto rows = json::array();
                for (Eigen::Index i = 0; i < g.target.plan.plan.rows(); ++i)
                {
                    auto row = json::array();
                    for (Eigen::Index j = 0; j < g.target.plan.plan.cols(); ++j)
                        row.push_back(g.target.plan.plan(i, j));
                    rows.push_back(row);
                }
                out["plan"] = rows;
            }
            emit(out);
        }
        else if (metrics_cmd->parsed())
        {
            const auto set = load_directory(data_dir);
            auto cells = std::vector<UnitCell>();
            auto per = json::array();
            for (std::size_t k = 0; k < set.lattices.size(); ++k)
            {
                const auto& l = set.lattices[k];
                cells.push_back(l.cell());
                auto violations = json::array();
                for (const auto& v: validate_cell(l.cell()))
                    violations.push_back(to_string(v));
                per.push_back({ { "file", set.files[k].filename().string() },
                                { "nodes", l.cell().size() },
                                { "edges", l.cell().edges().size() },
                                { "symmetry", symmetry_score(l.cell(), config.metrics.eps_sym) },
                                { "periodic", periodicity_valid(l, config.metrics.eps_per) },
                                { "violations", violations } });
            }
            auto cov = json(nullptr);
            if (!reference.empty())
            {
                const auto ref = load_directory(reference);
                auto ref_cells = std::vector<UnitCell>();
                for (const auto& l: ref.lattices)
                    ref_cells.push_back(l.cell());
                cov = coverage_recall(cells, ref_cells, config.metrics.eps_cov);
            }
            emit({ { "command", "metrics" },
                   { "count", cells.size() },
                   { "v_s", symmetry_validity(cells, config.metrics.eps_sym) },
                   { "v_p", periodicity_validity(set.lattices, config.metrics.eps_per) },
                   { "cov_r", cov },
                   { "repeat_ratio", repeat_ratio(cells, config.metrics.eps_rep) },
                   { "per_structure", per } });
        }
        else if (loop_cmd->parsed())
        {
            if (mock_opt->count() == 0 && !live)
                throw ValidationError("agent-loop needs --mock <file> or --live");
            const auto params = load_checkpoint(checkpoint);
            const auto set = load_directory(data_dir);
            auto client = std::unique_ptr<ChatClient>();
            if (live)
                client = std::make_unique<HttpChatClient>(HttpChatConfig::from_env());
            else
                client = std::make_unique<MockChatClient>(MockChatClient::from_file(mock));
            const auto outcome = run_design_loop(prompt, set.lattices, params, config.loop, *client);
            const auto text = dump_trace(outcome.trace);
            if (!trace_out.empty())
                write_text(trace_out, text);
            std::cout << text;
        }
        else if (export_cmd->parsed())
        {
            const auto lattice = read_lattice_file(input);
            const auto cloud = tile(lattice, { reps[0], reps[1], reps[2] });
            auto points = json::array();
            for (const auto& p: cloud.points)
                points.push_back({ p.x(), p.y(), p.z() });
            auto edges = json::array();
            for (const auto& e: cloud.edges)
                edges.push_back({ e.a, e.b });
            const json out = { { "command", "export-tiled" },
                               { "reps", reps },
                               { "points", points },
                               { "edges", edges } };
            if (!out_path.empty())
                write_text(out_path, out.dump(2) + "\n");
            emit(out);
        }
    }
    catch (const ValidationError& e)
    {
        print_error("validation", e.what());
        return kExitValidation;
    }
    catch (const NegationInfeasible& e)
    {
        print_error("negation_infeasible", e.what());
        return kExitRuntime;
    }
    catch (const std::exception& e)
    {
        print_error("runtime", e.what());
        return kExitRuntime;
    }
    return 0;
}
