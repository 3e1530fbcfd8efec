#include "detox/backends/registry.hpp"

#include <fstream>

#include "detox/backends/http_translator.hpp"
#include "detox/backends/mock_scorers.hpp"
#include "detox/backends/ngram_model.hpp"
#include "detox/error.hpp"
#include "detox/text.hpp"

namespace detox::backends {

namespace {

/// Overlays `given` onto `defaults`, rejecting keys absent from defaults.
nlohmann::json resolve_params(const nlohmann::json& defaults, const nlohmann::json& selection, const std::string& what) {
    nlohmann::json params = defaults;
    if (!selection.contains("params") || selection.at("params").is_null()) return params;
    const auto& given = selection.at("params");
    if (!given.is_object()) throw ConfigError(what + ".params must be an object");
    for (const auto& [key, value] : given.items()) {
        if (!params.contains(key)) throw ConfigError("unknown key '" + key + "' in " + what + ".params");
        params[key] = value;
    }
    return params;
}

std::string kind_of(const nlohmann::json& selection, const std::string& what) {
    if (!selection.is_object() || !selection.contains("kind")) throw ConfigError(what + " needs a 'kind'");
    for (const auto& [key, _] : selection.items()) {
        if (key != "kind" && key != "params") throw ConfigError("unknown key '" + key + "' in " + what);
    }
    return selection.at("kind").get<std::string>();
}

Language lang_or_throw(const std::string& code) {
    auto lang = parse_language(code);
    if (!lang) throw ConfigError("unknown language '" + code + "' in translation table");
    return *lang;
}

}  // namespace

nlohmann::json default_toxicity_selection() {
    nlohmann::json lexicon = nlohmann::json::object();
    for (const char* w : {"stupid", "idiot", "dumb", "moron", "damn", "crap", "shit", "fuck", "fucking", "bitch",
                          "bastard", "ass", "liar"}) {
        lexicon[w] = 7.0;
    }
    return {{"kind", "hash"}, {"params", {{"lexicon", lexicon}, {"bias", -4.0}, {"jitter", 0.0}}}};
}

nlohmann::json default_similarity_selection() {
    return {{"kind", "hash_embedding"}, {"params", {{"dim", 256}}}};
}

nlohmann::json default_translator_selection() {
    return {{"kind", "table"}, {"params", {{"table", nullptr}, {"drop_word_prob", 0.0}}}};
}

nlohmann::json default_model_selection() {
    return {{"kind", "ngram"}, {"params", {{"tokenizer", "word"}, {"window", 3}, {"init_scale", 0.0}}}};
}

std::unique_ptr<ToxicityScorer> make_toxicity_scorer(const nlohmann::json& selection) {
    const std::string kind = kind_of(selection, "toxicity");
    if (kind != "hash") throw ConfigError("unknown toxicity.kind '" + kind + "'");
    const auto params = resolve_params(default_toxicity_selection().at("params"), selection, "toxicity");
    return std::make_unique<HashToxicityScorer>(params.at("lexicon").get<std::map<std::string, double>>(),
                                                params.at("bias").get<double>(), params.at("jitter").get<double>());
}

std::unique_ptr<SimilarityScorer> make_similarity_scorer(const nlohmann::json& selection) {
    const std::string kind = kind_of(selection, "similarity");
    if (kind != "hash_embedding") throw ConfigError("unknown similarity.kind '" + kind + "'");
    const auto params = resolve_params(default_similarity_selection().at("params"), selection, "similarity");
    const auto dim = params.at("dim").get<std::size_t>();
    if (dim == 0) throw ConfigError("similarity.params.dim must be positive");
    return std::make_unique<HashEmbeddingSimilarity>(dim);
}

std::unique_ptr<Translator> make_translator(const nlohmann::json& selection, std::uint64_t seed) {
    const std::string kind = kind_of(selection, "translator");
    if (kind == "table") {
        const auto params = resolve_params(default_translator_selection().at("params"), selection, "translator");
        std::map<TableTranslator::Key, std::string> table;
        if (!params.at("table").is_null()) {
            const std::string path = params.at("table").get<std::string>();
            std::ifstream in(path);
            if (!in) throw IoError("cannot open translation table " + path);
            std::string line;
            while (std::getline(in, line)) {
                if (text::trim(line).empty()) continue;
                const auto row = nlohmann::json::parse(line);
                table[{lang_or_throw(row.at("src")), lang_or_throw(row.at("tgt")), row.at("text").get<std::string>()}] =
                    row.at("translation").get<std::string>();
            }
        }
        const double drop = params.at("drop_word_prob").get<double>();
        return std::make_unique<TableTranslator>(std::move(table), drop > 0.0 ? word_drop_noise(drop) : NoiseHook{},
                                                 seed);
    }
    if (kind == "http") {
        const nlohmann::json defaults = {{"endpoint", ""},       {"credential_env", kTranslatorCredentialEnv},
                                         {"timeout_s", 30},      {"max_retries", 3},
                                         {"backoff_ms", 500},    {"multiplier", 2.0}};
        const auto params = resolve_params(defaults, selection, "translator");
        HttpTranslatorOptions opts;
        opts.endpoint = params.at("endpoint").get<std::string>();
        opts.credential_env = params.at("credential_env").get<std::string>();
        opts.timeout = std::chrono::seconds(params.at("timeout_s").get<long>());
        RetryPolicy policy;
        policy.max_retries = params.at("max_retries").get<std::size_t>();
        policy.backoff = std::chrono::milliseconds(params.at("backoff_ms").get<long>());
        policy.multiplier = params.at("multiplier").get<double>();
        return std::make_unique<RetryingTranslator>(std::make_unique<HttpTranslationClient>(opts), policy);
    }
    throw ConfigError("unknown translator.kind '" + kind + "'");
}

std::unique_ptr<GenerativeModel> make_model(const nlohmann::json& selection, std::span<const std::string> corpus,
                                            std::uint64_t seed) {
    const std::string kind = kind_of(selection, "model");
    if (kind != "ngram") throw ConfigError("unknown model.kind '" + kind + "'");
    const auto params = resolve_params(default_model_selection().at("params"), selection, "model");
    const std::string tok = params.at("tokenizer").get<std::string>();
    if (tok != "word" && tok != "char") throw ConfigError("model.params.tokenizer must be 'word' or 'char'");
    NgramModelOptions opts;
    opts.window = params.at("window").get<std::size_t>();
    opts.init_scale = params.at("init_scale").get<double>();
    opts.seed = seed;
    return std::make_unique<NgramToyModel>(
        Vocabulary::build(corpus, tok == "word" ? TokenizerKind::word : TokenizerKind::character), opts);
}

std::unique_ptr<GenerativeModel> load_model(const std::filesystem::path& path) { return NgramToyModel::load(path); }

}  // namespace detox::backends
