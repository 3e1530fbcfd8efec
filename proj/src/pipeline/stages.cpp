#include "detox/pipeline/stages.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "detox/augment.hpp"
#include "detox/backends/registry.hpp"
#include "detox/corpus.hpp"
#include "detox/decode.hpp"
#include "detox/evalkit.hpp"
#include "detox/orpo.hpp"
#include "detox/sft.hpp"
#include "detox/text.hpp"

namespace detox::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

MissingArtifactError::MissingArtifactError(fs::path path, std::string producer)
    : Error("missing artifact " + path.string() + "; run the '" + producer + "' stage first"),
      path_(std::move(path)),
      producer_(std::move(producer)) {}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"augment",     "filter",     "mix",      "train-sft", "generate",
                                                   "rerank",      "build-prefs", "train-orpo", "evaluate", "report"};
    return names;
}

namespace {

fs::path require_artifact(fs::path path, const std::string& producer) {
    if (!fs::exists(path)) throw MissingArtifactError(std::move(path), producer);
    return path;
}

fs::path require_config_path(const std::optional<fs::path>& p, const std::string& key) {
    if (!p) throw ConfigError("config key '" + key + "' is required by this stage");
    if (!fs::exists(*p)) throw IoError("input file " + p->string() + " (from '" + key + "') does not exist");
    return *p;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::string body;
    for (const auto& l : lines) {
        body += l;
        body += '\n';
    }
    write_text(path, body);
}

std::string safe_file_stem(const std::string& name) {
    std::string out;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("system") : out;
}

std::string model_stage(const std::string& model) {
    if (model == "sft") return "train-sft";
    if (model == "orpo") return "train-orpo";
    throw ConfigError("unknown --model '" + model + "' (expected sft or orpo)");
}

fs::path inference_input_path(const StageContext& ctx) {
    if (ctx.options.split == "orpo") return require_config_path(ctx.config.paths.orpo_prompts, "paths.orpo_prompts");
    if (ctx.options.split == "eval") return require_config_path(ctx.config.paths.eval_pairs, "paths.eval_pairs");
    throw ConfigError("unknown --split '" + ctx.options.split + "' (expected orpo or eval)");
}

std::string run_tag(const StageOptions& o) { return o.split + "-" + o.model; }

StageRecord stage_augment(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    const auto en_path = require_config_path(cfg.paths.en_pairs, "paths.en_pairs");
    const auto english = corpus::read_pairs(en_path);
    auto translator = backends::make_translator(cfg.backends.translator, ctx.seed);
    const auto translated = augment::translate_corpus(english, cfg.targets, *translator, cfg.backends.batch.batch_size);

    StageRecord rec{"augment", ctx.seed, {en_path}, {}, 0.0};
    const auto dir = ctx.run.stage_dir("augment");
    for (Language lang : cfg.targets) {
        const auto out = dir / ("translated." + std::string(language_code(lang)) + ".jsonl");
        corpus::write_pairs(translated.at(lang), out);
        rec.outputs.push_back(out);
    }
    return rec;
}

StageRecord stage_filter(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    const auto en_path = require_config_path(cfg.paths.en_pairs, "paths.en_pairs");
    const auto english = corpus::read_pairs(en_path);
    StageRecord rec{"filter", ctx.seed, {en_path}, {}, 0.0};

    augment::TranslatedCorpus translated;
    for (Language lang : cfg.targets) {
        const auto p = require_artifact(ctx.run.path("augment/translated." + std::string(language_code(lang)) + ".jsonl"),
                                        "augment");
        translated.emplace(lang, corpus::read_pairs(p));
        rec.inputs.push_back(p);
    }
    auto tox = backends::make_toxicity_scorer(cfg.backends.toxicity);
    auto sim = backends::make_similarity_scorer(cfg.backends.similarity);
    const auto result = augment::filter_corpus(english, translated, *tox, *sim, cfg.filter, cfg.backends.batch);

    const auto dir = ctx.run.stage_dir("filter");
    corpus::Dataset all("translations");
    ojson langs = ojson::object();
    std::size_t total_kept = 0;
    for (Language lang : cfg.targets) {
        const auto& kept = result.kept.at(lang);
        const auto out = dir / ("kept." + std::string(language_code(lang)) + ".jsonl");
        corpus::write_pairs(kept, out);
        rec.outputs.push_back(out);
        for (const auto& p : kept) all.add(p);
        langs[std::string(language_code(lang))] = {{"translated", translated.at(lang).size()}, {"kept", kept.size()}};
        total_kept += kept.size();
    }
    const auto all_path = dir / "translations.jsonl";
    corpus::write_pairs(all, all_path);
    const auto verdicts_path = dir / "verdicts.jsonl";
    augment::write_verdicts(result.verdicts, verdicts_path);
    const auto hist_path = dir / "histogram.csv";
    augment::write_histogram_csv(result.hist, hist_path);

    ojson stats;
    stats["thresholds"] = cfg.resolved["filter"];
    stats["source_pairs"] = english.size();
    stats["scored_pairs"] = result.hist.scored_pairs;
    stats["kept_pairs"] = total_kept;
    stats["languages"] = langs;
    const auto stats_path = dir / "stats.json";
    write_json(stats_path, stats);
    rec.outputs.insert(rec.outputs.end(), {all_path, verdicts_path, hist_path, stats_path});
    return rec;
}

fs::path mixture_source(const StageContext& ctx, const MixturePart& part) {
    const auto& p = ctx.config.paths;
    const std::string& from = part.from;
    if (from == "stage:filter") return require_artifact(ctx.run.path("filter/translations.jsonl"), "filter");
    if (from == "paths.en_pairs") return require_config_path(p.en_pairs, from);
    if (from == "paths.ru_pairs") return require_config_path(p.ru_pairs, from);
    if (from == "paths.multilingual_pairs") return require_config_path(p.multilingual_pairs, from);
    if (from.starts_with("paths.") || from.starts_with("stage:")) {
        throw ConfigError("mixture entry '" + part.name + "' has unknown source '" + from + "'");
    }
    fs::path file = from;
    if (file.is_relative()) file = ctx.config.base_dir / file;
    if (!fs::exists(file)) throw IoError("mixture entry '" + part.name + "': " + file.string() + " does not exist");
    return file;
}

StageRecord stage_mix(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    StageRecord rec{"mix", ctx.seed, {}, {}, 0.0};
    std::vector<corpus::Dataset> parts;
    corpus::MixtureSpec spec;
    for (const auto& part : cfg.mixture) {
        const auto src = mixture_source(ctx, part);
        auto ds = corpus::read_pairs(src);
        ds.set_name(part.name);
        parts.push_back(std::move(ds));
        spec.entries.push_back({part.name, part.expected});
        rec.inputs.push_back(src);
    }
    const auto mixture = corpus::assemble_mixture(parts, spec);
    const auto sp = corpus::split(mixture, cfg.val_fraction, ctx.seed);

    const auto dir = ctx.run.stage_dir("mix");
    const auto mix_path = dir / "mixture.jsonl";
    const auto train_path = dir / "train.jsonl";
    const auto val_path = dir / "val.jsonl";
    corpus::write_pairs(mixture, mix_path);
    corpus::write_pairs(sp.train, train_path);
    corpus::write_pairs(sp.val, val_path);

    ojson stats;
    ojson entries = ojson::array();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        entries.push_back({{"name", parts[i].name()}, {"size", parts[i].size()}});
    }
    stats["entries"] = entries;
    stats["total"] = mixture.size();
    stats["train"] = sp.train.size();
    stats["val"] = sp.val.size();
    ojson by_lang = ojson::object();
    const auto counts = corpus::stats_by_language(mixture);
    for (Language lang : kAllLanguages) {
        if (counts[language_index(lang)] > 0) by_lang[std::string(language_code(lang))] = counts[language_index(lang)];
    }
    stats["languages"] = by_lang;
    const auto stats_path = dir / "stats.json";
    write_json(stats_path, stats);
    rec.outputs = {mix_path, train_path, val_path, stats_path};
    return rec;
}

void write_training_outputs(const sft::TrainReport& report, const backends::GenerativeModel& model, const fs::path& dir,
                            StageRecord& rec) {
    const auto model_path = dir / "model.bin";
    model.save(model_path);
    const auto csv = dir / "report.csv";
    const auto json = dir / "report.json";
    sft::write_report_csv(report, csv);
    sft::write_report_json(report, json);
    rec.outputs.insert(rec.outputs.end(), {model_path, csv, json});
    for (std::size_t e = 1; e <= report.epochs.size(); ++e) {
        rec.outputs.push_back(dir / "checkpoints" / ("epoch-" + std::to_string(e) + ".bin"));
    }
}

sft::CheckpointFn checkpoint_writer(const fs::path& dir) {
    fs::create_directories(dir);
    return [dir](std::size_t epoch, const backends::GenerativeModel& m) {
        m.save(dir / ("epoch-" + std::to_string(epoch) + ".bin"));
    };
}

StageRecord stage_train_sft(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    const auto train_path = require_artifact(ctx.run.path("mix/train.jsonl"), "mix");
    const auto val_path = require_artifact(ctx.run.path("mix/val.jsonl"), "mix");
    const auto train = sft::make_examples(corpus::read_pairs(train_path), cfg.prefixes);
    const auto val = sft::make_examples(corpus::read_pairs(val_path), cfg.prefixes);

    std::vector<std::string> texts;
    texts.reserve(2 * (train.size() + val.size()));
    for (const auto* set : {&train, &val}) {
        for (const auto& ex : *set) {
            texts.push_back(ex.prompt);
            texts.push_back(ex.target);
        }
    }
    auto model = backends::make_model(cfg.backends.model, texts, ctx.seed);

    sft::TrainConfig tc = cfg.train;
    tc.seed = ctx.seed;
    tc.run_id = "sft";
    const auto dir = ctx.run.stage_dir("train-sft");
    const auto report = sft::train_sft(*model, train, val, tc, checkpoint_writer(dir / "checkpoints"));

    StageRecord rec{"train-sft", ctx.seed, {train_path, val_path}, {}, 0.0};
    write_training_outputs(report, *model, dir, rec);
    return rec;
}

StageRecord stage_generate(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    const auto input_path = inference_input_path(ctx);
    const auto producer = model_stage(ctx.options.model);
    const auto model_path = require_artifact(ctx.run.path(producer + "/model.bin"), producer);
    const auto inputs = read_inference_inputs(input_path);
    const auto model = backends::load_model(model_path);
    model->set_training(false);

    std::vector<decode::CandidateSet> sets;
    std::vector<std::string> errors;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const decode::DetoxInput in{inputs[i].id, inputs[i].lang, inputs[i].toxic};
        try {
            sets.push_back(decode::generate_candidates(*model, in, cfg.decode, cfg.prefixes));
        } catch (const Error& e) {
            errors.push_back(ojson({{"index", i}, {"id", in.id}, {"message", e.what()}}).dump());
            std::cerr << "warning: generation failed for '" << in.id << "': " << e.what() << '\n';
        }
    }
    const auto dir = ctx.run.stage_dir("generate");
    const auto tag = run_tag(ctx.options);
    const auto out = dir / (tag + ".jsonl");
    const auto err = dir / (tag + ".errors.jsonl");
    decode::write_candidate_sets(sets, out);
    write_lines(err, errors);
    return StageRecord{"generate", ctx.seed, {input_path, model_path}, {out, err}, 0.0};
}

StageRecord stage_rerank(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    (void)model_stage(ctx.options.model);
    const auto tag = run_tag(ctx.options);
    const auto in_path = require_artifact(ctx.run.path("generate/" + tag + ".jsonl"), "generate");
    auto sets = decode::read_candidate_sets(in_path);
    auto tox = backends::make_toxicity_scorer(cfg.backends.toxicity);
    auto sim = backends::make_similarity_scorer(cfg.backends.similarity);

    std::vector<std::string> best_lines;
    for (auto& cset : sets) {
        if (cset.candidates.empty()) continue;
        decode::score_candidates(cset, *tox, *sim, cfg.backends.batch);
        const auto& best = decode::select_best(cset);
        ojson line;
        line["id"] = cset.id;
        line["lang"] = std::string(language_code(cset.lang));
        line["source_toxic"] = cset.source_toxic;
        line["output"] = best.text;
        line["relevance"] = best.relevance;
        line["sim"] = best.sim;
        line["neutrality"] = best.neutrality;
        line["logprob_norm"] = best.logprob_norm;
        best_lines.push_back(line.dump());
    }
    const auto dir = ctx.run.stage_dir("rerank");
    const auto out = dir / (tag + ".jsonl");
    const auto best = dir / (tag + ".best.jsonl");
    decode::write_candidate_sets(sets, out);
    write_lines(best, best_lines);
    return StageRecord{"rerank", ctx.seed, {in_path}, {out, best}, 0.0};
}

/// Train ids look like "<mixture entry>/<original id>".
std::string original_id(const std::string& id) {
    const auto slash = id.find('/');
    return slash == std::string::npos ? id : id.substr(slash + 1);
}

StageRecord stage_build_prefs(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    const auto in_path = require_artifact(ctx.run.path("rerank/orpo-sft.jsonl"), "rerank");
    const auto sets = decode::read_candidate_sets(in_path);
    StageRecord rec{"build-prefs", ctx.seed, {in_path}, {}, 0.0};

    ojson overlap;
    const auto train_path = ctx.run.path("mix/train.jsonl");
    if (fs::exists(train_path)) {
        rec.inputs.push_back(train_path);
        std::set<std::string> ids;
        std::set<std::string> texts;
        for (const auto& p : corpus::read_pairs(train_path)) {
            ids.insert(original_id(p.id));
            texts.insert(std::string(text::trim(p.toxic)));
        }
        ojson hits = ojson::array();
        for (const auto& cset : sets) {
            if (ids.contains(cset.id) || texts.contains(std::string(text::trim(cset.source_toxic)))) {
                hits.push_back(cset.id);
            }
        }
        if (!hits.empty()) {
            std::cerr << "warning: " << hits.size()
                      << " ORPO prompt(s) also appear in the SFT training split (see build-prefs/overlap.json)\n";
        }
        overlap["checked"] = true;
        overlap["overlapping"] = hits;
    } else {
        std::cerr << "warning: mix/train.jsonl not found; skipping the SFT/ORPO overlap check\n";
        overlap["checked"] = false;
        overlap["overlapping"] = ojson::array();
    }

    const auto prefs = orpo::build_preference_set(sets, cfg.orpo);
    const auto dir = ctx.run.stage_dir("build-prefs");
    const auto out = dir / "prefs.jsonl";
    const auto overlap_path = dir / "overlap.json";
    orpo::write_preferences(prefs, out);
    write_json(overlap_path, overlap);
    rec.outputs = {out, overlap_path};
    return rec;
}

StageRecord stage_train_orpo(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    const auto model_path = require_artifact(ctx.run.path("train-sft/model.bin"), "train-sft");
    const auto prefs_path = require_artifact(ctx.run.path("build-prefs/prefs.jsonl"), "build-prefs");
    auto model = backends::load_model(model_path);
    const auto prefs = orpo::read_preferences(prefs_path);
    if (prefs.empty()) throw TrainingError("no preference pairs in " + prefs_path.string());

    orpo::OrpoConfig oc = cfg.orpo;
    oc.train.seed = ctx.seed;
    oc.train.run_id = "orpo";
    const auto dir = ctx.run.stage_dir("train-orpo");
    const auto report = orpo::train_orpo(*model, prefs, oc, {}, checkpoint_writer(dir / "checkpoints"));

    StageRecord rec{"train-orpo", ctx.seed, {model_path, prefs_path}, {}, 0.0};
    write_training_outputs(report, *model, dir, rec);
    return rec;
}

StageRecord stage_evaluate(const StageContext& ctx) {
    const auto& cfg = ctx.config;
    (void)model_stage(ctx.options.model);
    const auto eval_path = require_config_path(cfg.paths.eval_pairs, "paths.eval_pairs");
    const auto best_path = require_artifact(ctx.run.path("rerank/eval-" + ctx.options.model + ".best.jsonl"), "rerank");

    std::map<std::string, std::optional<std::string>> references;
    for (const auto& in : read_inference_inputs(eval_path)) references[in.id] = in.reference;

    std::vector<evalkit::EvalRecord> records;
    std::ifstream in(best_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            evalkit::EvalRecord r;
            r.id = j.at("id").get<std::string>();
            const auto code = j.at("lang").get<std::string>();
            const auto lang = parse_language(code);
            if (!lang) throw FormatError("unknown language '" + code + "'");
            r.lang = *lang;
            r.source_toxic = j.at("source_toxic").get<std::string>();
            r.output = j.at("output").get<std::string>();
            if (auto it = references.find(r.id); it != references.end()) r.reference = it->second;
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("malformed record at line " + std::to_string(line_no) + " of " + best_path.string() +
                              ": " + e.what());
        }
    }
    auto tox = backends::make_toxicity_scorer(cfg.backends.toxicity);
    auto sim = backends::make_similarity_scorer(cfg.backends.similarity);
    const auto report = evalkit::joint_score(records, *tox, *sim, cfg.backends.batch);

    const std::string system = ctx.options.system.empty() ? ctx.options.model : ctx.options.system;
    const auto dir = ctx.run.stage_dir("evaluate");
    const auto stem = safe_file_stem(system);
    const auto json_path = dir / (stem + ".json");
    const auto md_path = dir / (stem + ".md");
    write_text(json_path, evalkit::report_to_json(report, system) + "\n");
    const std::vector<std::pair<std::string, evalkit::JointReport>> one = {{system, report}};
    write_text(md_path, evalkit::render_leaderboard(one));
    return StageRecord{"evaluate", ctx.seed, {eval_path, best_path}, {json_path, md_path}, 0.0};
}

StageRecord stage_report(const StageContext& ctx) {
    StageRecord rec{"report", ctx.seed, {}, {}, 0.0};
    const auto eval_dir = ctx.run.path("evaluate");
    std::vector<fs::path> files;
    if (fs::is_directory(eval_dir)) {
        for (const auto& entry : fs::directory_iterator(eval_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& extra : ctx.options.include_reports) {
        if (!fs::exists(extra)) throw IoError("report file " + extra.string() + " does not exist");
        files.push_back(extra);
    }
    if (files.empty()) throw MissingArtifactError(eval_dir / "<system>.json", "evaluate");

    std::vector<std::pair<std::string, evalkit::JointReport>> reports;
    for (const auto& f : files) {
        std::ifstream in(f);
        const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        reports.push_back(evalkit::report_from_json(body));
        rec.inputs.push_back(f);
    }
    const auto dir = ctx.run.stage_dir("report");
    const auto out = dir / "leaderboard.md";
    write_text(out, evalkit::render_leaderboard(reports));
    rec.outputs = {out};
    return rec;
}

}  // namespace

std::vector<InferenceInput> read_inference_inputs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<InferenceInput> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::string where = " at line " + std::to_string(line_no) + " of " + path.string();
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError("malformed record" + where + ": " + e.what());
        }
        try {
            InferenceInput item;
            item.id = j.at("id").get<std::string>();
            const auto code = j.at("lang").get<std::string>();
            const auto lang = parse_language(code);
            if (!lang) throw FormatError("unknown language '" + code + "'" + where);
            item.lang = *lang;
            item.toxic = j.at("toxic").get<std::string>();
            if (text::trim(item.toxic).empty()) throw FormatError("empty toxic text" + where);
            if (j.contains("neutral") && !j["neutral"].is_null()) item.reference = j["neutral"].get<std::string>();
            if (!seen.insert(item.id).second) throw FormatError("duplicate id '" + item.id + "'" + where);
            out.push_back(std::move(item));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("malformed record" + where + ": " + e.what());
        }
    }
    return out;
}

StageRecord run_stage(std::string_view name, const StageContext& ctx) {
    if (name == "augment") return stage_augment(ctx);
    if (name == "filter") return stage_filter(ctx);
    if (name == "mix") return stage_mix(ctx);
    if (name == "train-sft") return stage_train_sft(ctx);
    if (name == "generate") return stage_generate(ctx);
    if (name == "rerank") return stage_rerank(ctx);
    if (name == "build-prefs") return stage_build_prefs(ctx);
    if (name == "train-orpo") return stage_train_orpo(ctx);
    if (name == "evaluate") return stage_evaluate(ctx);
    if (name == "report") return stage_report(ctx);
    throw ConfigError("unknown stage '" + std::string(name) + "'");
}

}  // namespace detox::pipeline
