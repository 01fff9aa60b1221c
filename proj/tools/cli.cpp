#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "batchline/http_service.hpp"
#include "batchline/ingest.hpp"
#include "batchline/planner.hpp"
#include "batchline/reasoner.hpp"
#include "batchline/ruledsl.hpp"
#include "batchline/schema.hpp"
#include "batchline/service.hpp"
#include "batchline/synthetic.hpp"

namespace batchline {

namespace {

using nlohmann::json;

struct Failure {
    std::string message;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{"cannot open " + path};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text)) throw Failure{"cannot write " + path};
}

// Rule files failing validation stop the command with every diagnostic listed.
RuleSet checked_rules(const std::string& path, const Schema& schema, std::ostream& err) {
    RuleSet rules = load_ruleset_file(path);
    bool ok = true;
    for (const auto& rule : rules) {
        for (const auto& d : validate_rule(rule, schema)) {
            err << path << ": rule '" << rule.name << "': " << d.describe() << "\n";
            ok = false;
        }
    }
    if (!ok) throw Failure{"rule validation failed"};
    return rules;
}

std::string stringify(const json& doc) { return doc.dump(2) + "\n"; }

struct Common {
    std::string schema;
    std::string data;
    std::string rules;
    bool no_enrich = false;
    bool block = false;
};

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"batchline: drug-sample knowledge graph, rule evaluation and expert review"};
    app.name("batchline");
    app.require_subcommand(1);

    Common c;
    std::string out_path, format = "tsv", input, log_path, addr, static_dir, skip_log;
    bool summary_only = false;
    SyntheticOptions synth;

    auto* load = app.add_subcommand("load", "Ingest a dataset and print ingest statistics");
    load->add_option("--schema", c.schema, "Schema JSON")->required()->check(CLI::ExistingFile);
    load->add_option("--data", c.data, "Dataset manifest or .triples file")->required()->check(CLI::ExistingFile);
    load->add_option("--out", out_path, "Write the populated graph here");
    load->add_option("--skip-log", skip_log, "Write skipped values as JSON lines here");

    auto* enrich = app.add_subcommand("enrich", "Ingest, materialize entailments and print statistics");
    enrich->add_option("--schema", c.schema)->required()->check(CLI::ExistingFile);
    enrich->add_option("--data", c.data)->required()->check(CLI::ExistingFile);
    enrich->add_option("--out", out_path, "Write the enriched graph here");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate match rules over all candidate pairs");
    evaluate->add_option("--schema", c.schema)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--rules", c.rules)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--data", c.data)->required()->check(CLI::ExistingFile);
    evaluate->add_flag("--block-by-drugtype", c.block, "Only pair samples sharing a drug type");
    evaluate->add_flag("--no-enrich", c.no_enrich, "Skip materialization before evaluating");
    evaluate->add_option("--format", format, "tsv or json")->check(CLI::IsMember({"tsv", "json"}));
    evaluate->add_option("--out", out_path, "Write the report here instead of stdout");
    evaluate->add_flag("--summary-only", summary_only, "Print only verdict counts (streams pairs)");

    auto* report = app.add_subcommand("report", "Render a saved JSON report");
    report->add_option("--input", input, "Report written by evaluate --format json")->required()->check(CLI::ExistingFile);
    report->add_option("--format", format, "tsv, json or summary")->check(CLI::IsMember({"tsv", "json", "summary"}));

    auto* serve = app.add_subcommand("serve", "Serve the review API");
    serve->add_option("--schema", c.schema)->required()->check(CLI::ExistingFile);
    serve->add_option("--rules", c.rules)->required()->check(CLI::ExistingFile);
    serve->add_option("--data", c.data)->required()->check(CLI::ExistingFile);
    serve->add_option("--log", log_path, "Decision log (JSON lines)")->required();
    serve->add_option("--addr", addr, "host:port; defaults to $BATCHLINE_ADDR, then 127.0.0.1:8080");
    serve->add_option("--static", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
    serve->add_flag("--no-enrich", c.no_enrich);
    serve->add_flag("--block-by-drugtype", c.block);

    auto* replay = app.add_subcommand("replay", "Rebuild the session from a decision log");
    replay->add_option("--schema", c.schema)->required()->check(CLI::ExistingFile);
    replay->add_option("--rules", c.rules)->required()->check(CLI::ExistingFile);
    replay->add_option("--data", c.data)->required()->check(CLI::ExistingFile);
    replay->add_option("--log", log_path)->required()->check(CLI::ExistingFile);
    replay->add_flag("--no-enrich", c.no_enrich);
    replay->add_flag("--block-by-drugtype", c.block);
    replay->add_option("--out", out_path, "Write the resulting graph here");

    auto* generate = app.add_subcommand("generate-synthetic", "Write a seeded synthetic dataset");
    generate->add_option("--out", out_path, "Output directory")->required();
    generate->add_option("--samples", synth.samples, "Number of samples")->check(CLI::PositiveNumber);
    generate->add_option("--seed", synth.seed, "Random seed");
    generate->add_option("--close-fraction", synth.close_fraction)->check(CLI::Range(0.0, 1.0));

    std::vector<std::string> argv_store{"batchline"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (load->parsed()) {
            Schema schema = load_schema_file(c.schema);
            LoadedDataset data = load_dataset(c.data, schema);
            if (!out_path.empty()) write_file(out_path, data.graph.serialize());
            if (!skip_log.empty()) write_file(skip_log, data.stats.skip_log_jsonl());
            out << stringify(json{{"dataset", data.id},
                                  {"ingest", data.stats.to_json()},
                                  {"graphSize", data.graph.size()},
                                  {"contentHash", data.graph.content_hash()}});
        } else if (enrich->parsed()) {
            Schema schema = load_schema_file(c.schema);
            LoadedDataset data = load_dataset(c.data, schema);
            auto stats = materialize(data.graph, schema);
            json violations = json::array();
            for (const auto& v : check_consistency(data.graph, schema)) violations.push_back(v.to_json());
            if (!out_path.empty()) write_file(out_path, data.graph.serialize());
            json doc = stats.to_json();
            doc["dataset"] = data.id;
            doc["contentHash"] = data.graph.content_hash();
            doc["violations"] = violations;
            out << stringify(doc);
        } else if (evaluate->parsed()) {
            Schema schema = load_schema_file(c.schema);
            RuleSet rules = checked_rules(c.rules, schema, err);
            LoadedDataset data = load_dataset(c.data, schema);
            if (!c.no_enrich) materialize(data.graph, schema);
            EvaluationOptions options;
            options.block = c.block;
            std::string text;
            if (summary_only) {
                text = stringify(evaluate_ruleset(rules, data.graph, schema, options, PairSink{}).to_json());
            } else {
                MatchReport r = evaluate_ruleset(rules, data.graph, schema, options, data.id);
                text = format == "json" ? stringify(r.to_json()) : r.to_tsv();
            }
            if (out_path.empty()) out << text;
            else write_file(out_path, text);
        } else if (report->parsed()) {
            MatchReport r = MatchReport::from_json(json::parse(slurp(input)));
            if (format == "json") out << stringify(r.to_json());
            else if (format == "summary") out << stringify(r.summary.to_json());
            else out << r.to_tsv();
        } else if (serve->parsed()) {
            ServiceOptions options;
            if (const char* env = std::getenv("BATCHLINE_ADDR"); env && *env) options = parse_address(env, options);
            if (!addr.empty()) options = parse_address(addr, options);
            if (!static_dir.empty()) options.static_dir = static_dir;
            Schema schema = load_schema_file(c.schema);
            checked_rules(c.rules, schema, err);
            SessionConfig config{c.schema, c.rules, c.data, log_path, !c.no_enrich, {}};
            config.evaluation.block = c.block;
            HttpService service(Session::open(config), options);
            int port = service.bind();
            err << "listening on " << options.host << ":" << port << "\n";
            service.run();
        } else if (replay->parsed()) {
            Schema schema = load_schema_file(c.schema);
            checked_rules(c.rules, schema, err);
            SessionConfig config{c.schema, c.rules, c.data, std::nullopt, !c.no_enrich, {}};
            config.evaluation.block = c.block;
            Session session = Session::open(config);
            session.replay(read_decisions(std::filesystem::path(log_path)));
            if (!out_path.empty()) write_file(out_path, session.graph().serialize());
            json batches = json::array();
            for (const auto& b : session.batches()) batches.push_back(json{{"id", b.id}, {"members", b.members}});
            std::map<std::string, std::size_t> counts;
            for (const auto& [pair, st] : session.statuses()) ++counts[std::string(to_string(st))];
            out << stringify(json{{"decisions", session.decisions().size()},
                                  {"statuses", counts},
                                  {"batches", batches},
                                  {"graphSize", session.graph().size()},
                                  {"contentHash", session.graph().content_hash()}});
        } else if (generate->parsed()) {
            SyntheticDataset data = generate_synthetic(synth);
            write_synthetic(data, out_path);
            std::size_t rows = 0;
            for (const auto& t : data.tables) rows += t.rows.size();
            out << stringify(json{{"dataset", data.id}, {"tables", data.tables.size()}, {"rows", rows},
                                  {"manifest", (std::filesystem::path(out_path) / "dataset.json").string()}});
        }
    } catch (const Failure& f) {
        err << "error: " << f.message << "\n";
        return 1;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        for (const auto& d : e.diagnostics()) err << "  " << d.describe() << "\n";
        return 1;
    } catch (const MappingError& e) {
        err << "error: " << e.what() << "\n";
        for (const auto& p : e.problems()) err << "  " << p << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace batchline
