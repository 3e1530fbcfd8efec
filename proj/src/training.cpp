#include "detox/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "detox/error.hpp"

namespace detox::training {

sft::TrainReport run_loop(backends::GenerativeModel& model, std::size_t n_examples, const sft::TrainConfig& cfg,
                          const LoopHooks& hooks, const sft::CheckpointFn& on_epoch) {
    cfg.validate();
    if (n_examples == 0) throw TrainingError("training set is empty");
    const auto started = std::chrono::steady_clock::now();

    sft::TrainReport report;
    model.set_training(false);
    report.initial_val_loss = hooks.validate();
    if (hooks.margin) report.initial_margin = hooks.margin();
    if (cfg.epochs == 0) return report;

    const std::size_t steps_per_epoch = (n_examples + cfg.global_batch_size - 1) / cfg.global_batch_size;
    report.total_steps = cfg.epochs * steps_per_epoch;

    std::unique_ptr<backends::GenerativeModel> best;
    double best_val = 0.0;
    std::size_t step = 0;
    std::vector<std::size_t> order(n_examples);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed + epoch);
        std::shuffle(order.begin(), order.end(), rng);

        model.set_training(true);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < steps_per_epoch; ++b) {
            const std::size_t begin = b * cfg.global_batch_size;
            const std::size_t end = std::min(n_examples, begin + cfg.global_batch_size);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);

            model.zero_gradients();
            double loss = 0.0;
            for (std::size_t m = 0; m < batch.size(); m += cfg.device_batch_size) {
                loss += hooks.accumulate(batch.subspan(m, std::min(cfg.device_batch_size, batch.size() - m)),
                                         batch.size());
            }
            if (!std::isfinite(loss)) {
                std::string ids;
                for (std::size_t i : batch) {
                    if (!ids.empty()) ids += ", ";
                    ids += hooks.describe ? hooks.describe(i) : std::to_string(i);
                }
                throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                                    std::to_string(epoch) + "), batch [" + ids + "]");
            }
            const double lr = cfg.schedule == sft::Schedule::cosine
                                  ? sft::cosine_lr(step, report.total_steps, cfg.learning_rate)
                                  : cfg.learning_rate;
            model.apply_gradients({lr, cfg.weight_decay});
            report.step_losses.push_back(loss);
            epoch_loss += loss;
            ++step;
        }
        model.set_training(false);

        sft::EpochRow row;
        row.epoch = epoch;
        row.train_loss = epoch_loss / static_cast<double>(steps_per_epoch);
        row.val_loss = hooks.validate();
        if (hooks.margin) row.margin = hooks.margin();
        report.epochs.push_back(row);
        if (on_epoch) on_epoch(epoch, model);

        if (!best || row.val_loss < best_val) {
            best = model.clone();
            best_val = row.val_loss;
            report.selected_epoch = epoch;
        }
    }
    if (report.selected_epoch != cfg.epochs) model.assign(*best);
    report.selected_checkpoint = sft::checkpoint_tag(cfg.run_id, report.selected_epoch);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace detox::training
