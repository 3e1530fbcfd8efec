#include "toy_tasks.hpp"

#include <random>

#include "detox/text.hpp"

namespace detox::toy {

namespace {

std::vector<std::string> random_words(std::mt19937_64& rng) {
    const auto& words = filler_words();
    std::uniform_int_distribution<std::size_t> len(3, 6);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::vector<std::string> out(len(rng));
    for (auto& w : out) w = words[pick(rng)];
    return out;
}

}  // namespace

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {"alpha", "bravo", "cedar", "delta", "ember", "fjord", "grove",
                                                   "harbor", "iris",  "jetty", "kiln",  "lumen", "maple", "nectar",
                                                   "orbit", "pixel", "quartz", "river", "sable", "tundra"};
    return words;
}

std::vector<sft::Example> copy_task(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const sft::PrefixTable prefixes;
    std::vector<sft::Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto text = text::join(random_words(rng), " ");
        out.push_back({sft::build_prompt(Language::en, text, prefixes), text});
    }
    return out;
}

std::vector<sft::Example> bad_to_good_task(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const sft::PrefixTable prefixes;
    std::vector<sft::Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto words = random_words(rng);
        const std::size_t at = std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng);
        auto toxic = words;
        toxic[at] = "BAD";
        words[at] = "GOOD";
        out.push_back({sft::build_prompt(Language::en, text::join(toxic, " "), prefixes), text::join(words, " ")});
    }
    return out;
}

std::vector<orpo::PreferencePair> good_preference_pairs(std::size_t n, std::uint64_t seed) {
    std::vector<orpo::PreferencePair> out;
    const auto examples = bad_to_good_task(n, seed);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        std::string rejected = ex.target;
        rejected.replace(rejected.find("GOOD"), 4, "BAD");
        out.push_back({"pref-" + std::to_string(i), ex.prompt, ex.target, rejected, Language::en, 1.0, 0.0});
    }
    return out;
}

std::unique_ptr<backends::NgramToyModel> make_model(std::uint64_t seed, std::size_t window) {
    std::vector<std::string> corpus = filler_words();
    corpus.push_back("Detoxify: BAD GOOD");
    return std::make_unique<backends::NgramToyModel>(
        backends::Vocabulary::build(corpus, backends::TokenizerKind::word),
        backends::NgramModelOptions{window, 0.0, seed});
}

sft::TrainConfig toy_train_config(std::size_t epochs, std::uint64_t seed) {
    sft::TrainConfig cfg;
    cfg.learning_rate = kToyLearningRate;
    cfg.epochs = epochs;
    cfg.seed = seed;
    return cfg;
}

}  // namespace detox::toy
