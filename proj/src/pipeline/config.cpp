#include "detox/pipeline/config.hpp"

#include <fstream>

#include "detox/backends/registry.hpp"
#include "detox/error.hpp"
#include "detox/text.hpp"

namespace detox::pipeline {

namespace {

using ojson = nlohmann::ordered_json;

/// Backend selection tables and free-form maps are replaced, not merged.
bool is_opaque(const std::string& path) {
    return path == "backends.toxicity" || path == "backends.similarity" || path == "backends.translator" ||
           path == "backends.model" || path == "prefixes.overrides" || path == "mixture" || path == "orpo.train";
}

void overlay(ojson& base, const nlohmann::json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string child = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + child + "'");
        auto& slot = base[key];
        if (is_opaque(child) || !slot.is_object() || value.is_null()) {
            slot = value;
        } else {
            overlay(slot, value, child);
        }
    }
}

/// Fills the default params of a backend selection whose kind matches.
void expand_selection(ojson& selection, const nlohmann::json& defaults) {
    if (!selection.is_object() || !selection.contains("kind")) return;
    if (selection["kind"] != defaults["kind"]) return;
    ojson params = defaults["params"];
    if (selection.contains("params") && selection["params"].is_object()) {
        for (const auto& [k, v] : selection["params"].items()) params[k] = v;
    }
    selection["params"] = params;
}

std::optional<std::filesystem::path> opt_path(const ojson& j, const std::filesystem::path& base) {
    if (j.is_null()) return std::nullopt;
    std::filesystem::path p = j.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

sft::TrainConfig parse_train(const ojson& j) {
    sft::TrainConfig t;
    t.learning_rate = j.at("learning_rate").get<double>();
    t.global_batch_size = j.at("global_batch_size").get<std::size_t>();
    t.device_batch_size = j.at("device_batch_size").get<std::size_t>();
    t.weight_decay = j.at("weight_decay").get<double>();
    const auto schedule = j.at("schedule").get<std::string>();
    if (schedule == "cosine") {
        t.schedule = sft::Schedule::cosine;
    } else if (schedule == "constant") {
        t.schedule = sft::Schedule::constant;
    } else {
        throw ConfigError("unknown train.schedule '" + schedule + "'");
    }
    t.epochs = j.at("epochs").get<std::size_t>();
    const auto& ad = j.at("adapter");
    if (ad.at("enabled").get<bool>()) {
        t.adapter = backends::AdapterConfig{ad.at("rank").get<std::size_t>(), ad.at("alpha").get<double>(),
                                            ad.at("dropout").get<double>()};
    }
    t.validate();
    return t;
}

Language parse_lang(const ojson& j, const std::string& where) {
    const auto code = j.get<std::string>();
    auto lang = parse_language(code);
    if (!lang) throw ConfigError("unknown language '" + code + "' in " + where);
    return *lang;
}

}  // namespace

ojson default_config() {
    ojson train = {
        {"learning_rate", 1e-5}, {"global_batch_size", 8}, {"device_batch_size", 8}, {"weight_decay", 0.01},
        {"schedule", "cosine"},  {"epochs", 4},
        {"adapter", {{"enabled", false}, {"rank", 32}, {"alpha", 32.0}, {"dropout", 0.1}}},
    };
    ojson cfg;
    cfg["seed"] = 0;
    cfg["paths"] = {{"run_dir", nullptr},      {"en_pairs", nullptr},     {"ru_pairs", nullptr},
                    {"multilingual_pairs", nullptr}, {"orpo_prompts", nullptr}, {"eval_pairs", nullptr}};
    cfg["backends"] = {
        {"batch_size", backends::kDefaultBatchSize},
        {"workers", 1},
        {"toxicity", backends::default_toxicity_selection()},
        {"similarity", backends::default_similarity_selection()},
        {"translator", backends::default_translator_selection()},
        {"model", backends::default_model_selection()},
    };
    cfg["augment"] = {{"targets", {"am", "ar", "de", "es", "hi", "ru", "uk", "zh"}}};
    cfg["filter"] = {{"toxic_min", 0.9}, {"neutral_max", 0.1}, {"sim_min", 0.8}, {"similarity_sides", "both"}};
    cfg["prefixes"] = {{"default", sft::kDefaultPrefix}, {"overrides", ojson::object()}};
    cfg["mixture"] = ojson::array({
        {{"name", "en_paradetox"}, {"from", "paths.en_pairs"}, {"expected", 19700}},
        {{"name", "ru_paradetox"}, {"from", "paths.ru_pairs"}, {"expected", 11100}},
        {{"name", "translations"}, {"from", "stage:filter"}, {"expected", 40500}},
        {{"name", "multilingual_paradetox"}, {"from", "paths.multilingual_pairs"}, {"expected", 3600}},
    });
    cfg["split"] = {{"val_fraction", corpus::kDefaultValFraction}};
    cfg["train"] = train;
    cfg["orpo"] = {{"beta", 0.1}, {"pairing", "best_vs_all"}, {"epsilon", 1e-7}, {"train", ojson::object()}};
    cfg["decode"] = {{"num_beams", 10},          {"num_groups", 5},   {"diversity_penalty", 2.5},
                     {"repetition_penalty", 1.2}, {"max_new_tokens", 64}, {"shortlist_k", 5},
                     {"length_norm", "by_length"}};
    return cfg;
}

PipelineConfig parse_config(const nlohmann::json& user, const std::filesystem::path& base_dir) {
    ojson merged = default_config();
    try {
        overlay(merged, user, "");

        // orpo.train holds overrides of train keys; resolve to a full table.
        ojson orpo_train = merged["train"];
        const ojson overrides = merged["orpo"]["train"];
        if (!overrides.is_object()) throw ConfigError("'orpo.train' must be an object");
        overlay(orpo_train, overrides, "orpo.train");
        merged["orpo"]["train"] = orpo_train;

        auto& be = merged["backends"];
        expand_selection(be["toxicity"], backends::default_toxicity_selection());
        expand_selection(be["similarity"], backends::default_similarity_selection());
        expand_selection(be["translator"], backends::default_translator_selection());
        expand_selection(be["model"], backends::default_model_selection());
        if (auto& tr = be["translator"]; tr.is_object() && tr.value("kind", "") == "table" &&
                                          tr["params"].is_object() && tr["params"].value("table", ojson()).is_string()) {
            const std::filesystem::path table = tr["params"]["table"].get<std::string>();
            if (table.is_relative()) tr["params"]["table"] = (base_dir / table).string();
        }

        PipelineConfig cfg;
        cfg.base_dir = base_dir;
        cfg.seed = merged["seed"].get<std::uint64_t>();

        const auto& paths = merged["paths"];
        cfg.paths.run_dir = opt_path(paths["run_dir"], base_dir);
        cfg.paths.en_pairs = opt_path(paths["en_pairs"], base_dir);
        cfg.paths.ru_pairs = opt_path(paths["ru_pairs"], base_dir);
        cfg.paths.multilingual_pairs = opt_path(paths["multilingual_pairs"], base_dir);
        cfg.paths.orpo_prompts = opt_path(paths["orpo_prompts"], base_dir);
        cfg.paths.eval_pairs = opt_path(paths["eval_pairs"], base_dir);

        cfg.backends.batch.batch_size = be["batch_size"].get<std::size_t>();
        cfg.backends.batch.workers = be["workers"].get<std::size_t>();
        if (cfg.backends.batch.batch_size == 0 || cfg.backends.batch.workers == 0) {
            throw ConfigError("backends.batch_size and backends.workers must be positive");
        }
        cfg.backends.toxicity = be["toxicity"];
        cfg.backends.similarity = be["similarity"];
        cfg.backends.translator = be["translator"];
        cfg.backends.model = be["model"];
        // Fail early on bad scorer tables; translators and models are built by their stages.
        (void)backends::make_toxicity_scorer(cfg.backends.toxicity);
        (void)backends::make_similarity_scorer(cfg.backends.similarity);

        for (const auto& t : merged["augment"]["targets"]) cfg.targets.push_back(parse_lang(t, "augment.targets"));

        const auto& f = merged["filter"];
        cfg.filter.toxic_min = f["toxic_min"].get<double>();
        cfg.filter.neutral_max = f["neutral_max"].get<double>();
        cfg.filter.sim_min = f["sim_min"].get<double>();
        cfg.filter.sides = augment::parse_similarity_sides(f["similarity_sides"].get<std::string>());
        cfg.filter.validate();

        cfg.prefixes = sft::PrefixTable(merged["prefixes"]["default"].get<std::string>());
        const auto& over = merged["prefixes"]["overrides"];
        if (!over.is_object()) throw ConfigError("'prefixes.overrides' must be an object");
        for (const auto& [code, prefix] : over.items()) {
            cfg.prefixes.set(parse_lang(ojson(code), "prefixes.overrides"), prefix.get<std::string>());
        }

        if (!merged["mixture"].is_array()) throw ConfigError("'mixture' must be an array");
        for (auto& entry : merged["mixture"]) {
            for (const auto& [k, _] : entry.items()) {
                if (k != "name" && k != "from" && k != "expected") throw ConfigError("unknown config key 'mixture[]." + k + "'");
            }
            MixturePart part;
            part.name = entry.at("name").get<std::string>();
            part.from = entry.at("from").get<std::string>();
            if (!entry.contains("expected")) entry["expected"] = nullptr;
            if (!entry["expected"].is_null()) {
                const auto n = entry["expected"].get<long long>();
                if (n <= 0) throw ConfigError("mixture entry '" + part.name + "' needs a positive expected count");
                part.expected = static_cast<std::size_t>(n);
            }
            cfg.mixture.push_back(std::move(part));
        }

        cfg.val_fraction = merged["split"]["val_fraction"].get<double>();
        if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) throw ConfigError("split.val_fraction must lie in (0, 1)");

        cfg.train = parse_train(merged["train"]);
        const auto& o = merged["orpo"];
        cfg.orpo.beta = o["beta"].get<double>();
        cfg.orpo.pairing = orpo::parse_pairing(o["pairing"].get<std::string>());
        cfg.orpo.epsilon = o["epsilon"].get<double>();
        cfg.orpo.train = parse_train(o["train"]);
        cfg.orpo.validate();

        const auto& d = merged["decode"];
        cfg.decode.num_beams = d["num_beams"].get<std::size_t>();
        cfg.decode.num_groups = d["num_groups"].get<std::size_t>();
        cfg.decode.diversity_penalty = d["diversity_penalty"].get<double>();
        cfg.decode.repetition_penalty = d["repetition_penalty"].get<double>();
        cfg.decode.max_new_tokens = d["max_new_tokens"].get<std::size_t>();
        cfg.decode.shortlist_k = d["shortlist_k"].get<std::size_t>();
        cfg.decode.length_norm = decode::parse_length_norm(d["length_norm"].get<std::string>());
        cfg.decode.validate();

        cfg.resolved = std::move(merged);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config value: ") + e.what());
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json user;
    try {
        user = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(user, std::filesystem::absolute(path).parent_path());
}

std::uint64_t derive_stage_seed(std::uint64_t root, std::string_view stage) { return root + text::fnv1a64(stage); }

}  // namespace detox::pipeline
