#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "detox/sft.hpp"

// Epoch/batch/schedule loop shared by supervised and preference training.
namespace detox::training {

struct LoopHooks {
    /// Accumulates the gradient for `members` (indices into the training set)
    /// as part of a global batch of `batch_size`; returns that share of the
    /// batch loss.
    std::function<double(std::span<const std::size_t> members, std::size_t batch_size)> accumulate;
    /// Validation loss in eval mode.
    std::function<double()> validate;
    /// Optional preference margin, tracked per epoch.
    std::function<std::optional<double>()> margin;
    /// Human-readable id of a training item, for diagnostics.
    std::function<std::string(std::size_t)> describe;
};

sft::TrainReport run_loop(backends::GenerativeModel& model, std::size_t n_examples, const sft::TrainConfig& cfg,
                          const LoopHooks& hooks, const sft::CheckpointFn& on_epoch);

}  // namespace detox::training
