#include "detox/backends/ngram_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "detox/error.hpp"
#include "json.hpp"

namespace detox::backends {

namespace {

constexpr char kMagic[8] = {'D', 'T', 'X', 'N', 'G', 'R', 'M', '1'};

void log_softmax_inplace(std::vector<double>& x) {
    const double mx = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (double& v : x) v -= lse;
}

void adamw(std::vector<double>& param, std::vector<double>& grad, std::vector<double>& m, std::vector<double>& v,
           const OptimizerStep& step, std::uint64_t t, bool decay) {
    const double c1 = 1.0 - std::pow(step.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(step.beta2, static_cast<double>(t));
    const double shrink = decay ? 1.0 - step.learning_rate * step.weight_decay : 1.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = step.beta1 * m[i] + (1.0 - step.beta1) * g;
        v[i] = step.beta2 * v[i] + (1.0 - step.beta2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        param[i] = param[i] * shrink - step.learning_rate * mhat / (std::sqrt(vhat) + step.epsilon);
        grad[i] = 0.0;
    }
}

void write_doubles(std::ofstream& out, const std::vector<double>& xs) {
    out.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& xs) {
    in.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
    if (!in) throw FormatError("truncated model file");
}

}  // namespace

double GenerativeModel::train_step(std::span<const WeightedSequence> batch, const OptimizerStep& step) {
    if (batch.empty()) return 0.0;
    std::vector<WeightedSequence> uniform(batch.begin(), batch.end());
    for (auto& item : uniform) item.weight = 1.0 / static_cast<double>(uniform.size());
    const double loss = accumulate_gradient(uniform);
    apply_gradients(step);
    return loss;
}

NgramToyModel::NgramToyModel(Vocabulary vocab, NgramModelOptions opts) : vocab_(std::move(vocab)), opts_(opts) {
    if (opts_.window == 0) throw ConfigError("ngram window must be positive");
    if (vocab_.size() <= Vocabulary::kFirstRegular) throw ConfigError("ngram model needs a non-empty vocabulary");
    const std::size_t n = v() * v();
    tables_.assign(1 + opts_.window, std::vector<double>(n, 0.0));
    if (opts_.init_scale > 0.0) {
        std::mt19937_64 rng(opts_.seed);
        std::normal_distribution<double> dist(0.0, opts_.init_scale);
        for (auto& t : tables_) {
            for (double& w : t) w = dist(rng);
        }
    }
    bias_.assign(v(), 0.0);
    grad_tables_.assign(tables_.size(), std::vector<double>(n, 0.0));
    m_tables_ = grad_tables_;
    v_tables_ = grad_tables_;
    grad_bias_.assign(v(), 0.0);
    m_bias_ = grad_bias_;
    v_bias_ = grad_bias_;
}

double& NgramToyModel::weight(std::size_t table, TokenId feature, TokenId next) {
    return tables_.at(table).at(static_cast<std::size_t>(feature) * v() + next);
}

double NgramToyModel::gradient(std::size_t table, TokenId feature, TokenId next) const {
    return grad_tables_.at(table).at(static_cast<std::size_t>(feature) * v() + next);
}

void NgramToyModel::features(std::span<const TokenId> prompt, std::span<const TokenId> prefix, std::size_t t,
                             std::vector<TokenId>& out) const {
    out.resize(tables_.size());
    out[0] = t == 0 ? Vocabulary::kBos : prefix[t - 1];
    for (std::size_t k = 0; k < opts_.window; ++k) {
        const std::size_t pos = t + k;
        out[k + 1] = pos < prompt.size() ? prompt[pos] : Vocabulary::kPad;
    }
    for (TokenId f : out) {
        if (f >= v()) throw BackendError("token id " + std::to_string(f) + " outside the vocabulary");
    }
}

void NgramToyModel::logits(const std::vector<TokenId>& feats, const std::vector<double>* adapter_mask,
                           std::vector<double>& out) const {
    const std::size_t vs = v();
    out.assign(bias_.begin(), bias_.end());
    for (std::size_t j = 0; j < tables_.size(); ++j) {
        const double* row = tables_[j].data() + static_cast<std::size_t>(feats[j]) * vs;
        for (std::size_t i = 0; i < vs; ++i) out[i] += row[i];
    }
    if (!adapter_) return;
    const std::size_t r = adapter_->cfg.rank;
    const double scale = adapter_->cfg.alpha / static_cast<double>(r);
    for (std::size_t j = 0; j < tables_.size(); ++j) {
        const double s = scale * (adapter_mask ? (*adapter_mask)[j] : 1.0);
        if (s == 0.0) continue;
        const double* h = adapter_->a[j].data() + static_cast<std::size_t>(feats[j]) * r;
        for (std::size_t k = 0; k < r; ++k) {
            if (h[k] == 0.0) continue;
            const double* brow = adapter_->b[j].data() + k * vs;
            const double hk = s * h[k];
            for (std::size_t i = 0; i < vs; ++i) out[i] += hk * brow[i];
        }
    }
}

std::vector<double> NgramToyModel::next_logprobs(std::span<const TokenId> prompt,
                                                 std::span<const TokenId> prefix) const {
    std::vector<TokenId> feats;
    features(prompt, prefix, prefix.size(), feats);
    std::vector<double> out;
    logits(feats, nullptr, out);
    log_softmax_inplace(out);
    return out;
}

SequenceScore NgramToyModel::sequence_logprob(std::span<const TokenId> prompt,
                                              std::span<const TokenId> completion) const {
    SequenceScore score;
    std::vector<TokenId> feats;
    std::vector<double> lp;
    for (std::size_t t = 0; t <= completion.size(); ++t) {
        features(prompt, completion, t, feats);
        logits(feats, nullptr, lp);
        log_softmax_inplace(lp);
        const TokenId target = t < completion.size() ? completion[t] : eos_token();
        if (target >= v()) throw BackendError("token id " + std::to_string(target) + " outside the vocabulary");
        score.per_token.push_back(lp[target]);
        score.total += lp[target];
    }
    return score;
}

double NgramToyModel::accumulate_gradient(std::span<const WeightedSequence> batch) {
    const std::size_t vs = v();
    double objective = 0.0;
    std::vector<TokenId> feats;
    std::vector<double> lp;
    std::vector<double> mask(tables_.size(), 1.0);
    std::vector<double> delta(vs);

    for (const auto& item : batch) {
        if (item.weight == 0.0) continue;
        const std::size_t positions = item.completion.size() + 1;
        const double coef = item.weight / static_cast<double>(positions);
        for (std::size_t t = 0; t < positions; ++t) {
            features(item.prompt, item.completion, t, feats);
            const bool dropout = adapter_ && training_ && adapter_->cfg.dropout > 0.0;
            if (dropout) {
                std::bernoulli_distribution drop(adapter_->cfg.dropout);
                const double keep_scale = 1.0 / (1.0 - adapter_->cfg.dropout);
                for (double& m : mask) m = drop(adapter_->rng) ? 0.0 : keep_scale;
            }
            logits(feats, dropout ? &mask : nullptr, lp);
            log_softmax_inplace(lp);
            const TokenId target = t < item.completion.size() ? item.completion[t] : eos_token();
            if (target >= vs) throw BackendError("token id " + std::to_string(target) + " outside the vocabulary");
            objective -= coef * lp[target];

            for (std::size_t i = 0; i < vs; ++i) delta[i] = coef * std::exp(lp[i]);
            delta[target] -= coef;

            if (!adapter_) {
                for (std::size_t j = 0; j < tables_.size(); ++j) {
                    double* g = grad_tables_[j].data() + static_cast<std::size_t>(feats[j]) * vs;
                    for (std::size_t i = 0; i < vs; ++i) g[i] += delta[i];
                }
                for (std::size_t i = 0; i < vs; ++i) grad_bias_[i] += delta[i];
                continue;
            }
            const std::size_t r = adapter_->cfg.rank;
            const double scale = adapter_->cfg.alpha / static_cast<double>(r);
            for (std::size_t j = 0; j < tables_.size(); ++j) {
                const double s = scale * (dropout ? mask[j] : 1.0);
                if (s == 0.0) continue;
                const std::size_t row = static_cast<std::size_t>(feats[j]) * r;
                const double* h = adapter_->a[j].data() + row;
                double* ga = adapter_->grad_a[j].data() + row;
                for (std::size_t k = 0; k < r; ++k) {
                    const double* brow = adapter_->b[j].data() + k * vs;
                    double* gb = adapter_->grad_b[j].data() + k * vs;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < vs; ++i) {
                        gb[i] += s * h[k] * delta[i];
                        acc += brow[i] * delta[i];
                    }
                    ga[k] += s * acc;
                }
            }
        }
    }
    return objective;
}

void NgramToyModel::apply_gradients(const OptimizerStep& step) {
    ++adam_steps_;
    if (!adapter_) {
        for (std::size_t j = 0; j < tables_.size(); ++j) {
            adamw(tables_[j], grad_tables_[j], m_tables_[j], v_tables_[j], step, adam_steps_, true);
        }
        adamw(bias_, grad_bias_, m_bias_, v_bias_, step, adam_steps_, false);
        return;
    }
    for (std::size_t j = 0; j < tables_.size(); ++j) {
        adamw(adapter_->a[j], adapter_->grad_a[j], adapter_->m_a[j], adapter_->v_a[j], step, adam_steps_, true);
        adamw(adapter_->b[j], adapter_->grad_b[j], adapter_->m_b[j], adapter_->v_b[j], step, adam_steps_, true);
    }
}

void NgramToyModel::zero_gradients() {
    for (auto& g : grad_tables_) std::fill(g.begin(), g.end(), 0.0);
    std::fill(grad_bias_.begin(), grad_bias_.end(), 0.0);
    if (adapter_) {
        for (auto& g : adapter_->grad_a) std::fill(g.begin(), g.end(), 0.0);
        for (auto& g : adapter_->grad_b) std::fill(g.begin(), g.end(), 0.0);
    }
}

std::size_t NgramToyModel::trainable_parameter_count() const {
    if (!adapter_) return tables_.size() * v() * v() + v();
    return tables_.size() * 2 * v() * adapter_->cfg.rank;
}

std::size_t NgramToyModel::parameter_count() const {
    const std::size_t base = tables_.size() * v() * v() + v();
    return adapter_ ? base + trainable_parameter_count() : base;
}

void NgramToyModel::enable_adapter(const AdapterConfig& cfg, std::uint64_t seed) {
    if (cfg.rank == 0 || !(cfg.alpha > 0.0)) throw ConfigError("adapter rank and alpha must be positive");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("adapter dropout must lie in [0, 1)");
    if (adapter_) throw ConfigError("adapter already enabled");
    Adapter ad{cfg, {}, {}, {}, {}, {}, {}, {}, {}, std::mt19937_64(seed ^ 0xada97e5ULL)};
    const std::size_t n = v() * cfg.rank;
    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.rank)));
    std::mt19937_64 init_rng(seed);
    for (std::size_t j = 0; j < tables_.size(); ++j) {
        std::vector<double> a(n);
        for (double& x : a) x = init(init_rng);
        ad.a.push_back(std::move(a));
        ad.b.emplace_back(n, 0.0);
        ad.grad_a.emplace_back(n, 0.0);
        ad.grad_b.emplace_back(n, 0.0);
        ad.m_a.emplace_back(n, 0.0);
        ad.v_a.emplace_back(n, 0.0);
        ad.m_b.emplace_back(n, 0.0);
        ad.v_b.emplace_back(n, 0.0);
    }
    adapter_ = std::move(ad);
    adam_steps_ = 0;
}

std::unique_ptr<GenerativeModel> NgramToyModel::clone() const { return std::make_unique<NgramToyModel>(*this); }

void NgramToyModel::assign(const GenerativeModel& other) {
    const auto* src = dynamic_cast<const NgramToyModel*>(&other);
    if (src == nullptr) throw BackendError("cannot assign a " + other.kind() + " model to an ngram model");
    *this = *src;
}

void NgramToyModel::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json header;
    header["kind"] = kind();
    header["tokenizer"] = vocab_.kind() == TokenizerKind::word ? "word" : "char";
    header["window"] = opts_.window;
    header["pieces"] = vocab_.pieces();
    if (adapter_) {
        header["adapter"] = {{"rank", adapter_->cfg.rank},
                             {"alpha", adapter_->cfg.alpha},
                             {"dropout", adapter_->cfg.dropout}};
    } else {
        header["adapter"] = nullptr;
    }
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : tables_) write_doubles(out, t);
    write_doubles(out, bias_);
    if (adapter_) {
        for (const auto& a : adapter_->a) write_doubles(out, a);
        for (const auto& b : adapter_->b) write_doubles(out, b);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::unique_ptr<NgramToyModel> NgramToyModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError(path.string() + " is not an ngram model");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError("truncated model header in " + path.string());

    const auto header = nlohmann::json::parse(text);
    const auto kind = header.at("tokenizer").get<std::string>() == "word" ? TokenizerKind::word : TokenizerKind::character;
    NgramModelOptions opts;
    opts.window = header.at("window").get<std::size_t>();
    auto model = std::make_unique<NgramToyModel>(
        Vocabulary::from_pieces(header.at("pieces").get<std::vector<std::string>>(), kind), opts);
    for (auto& t : model->tables_) read_doubles(in, t);
    read_doubles(in, model->bias_);
    if (!header.at("adapter").is_null()) {
        const auto& ad = header.at("adapter");
        AdapterConfig cfg{ad.at("rank").get<std::size_t>(), ad.at("alpha").get<double>(), ad.at("dropout").get<double>()};
        model->enable_adapter(cfg, 0);
        for (auto& a : model->adapter_->a) read_doubles(in, a);
        for (auto& b : model->adapter_->b) read_doubles(in, b);
    }
    return model;
}

}  // namespace detox::backends
