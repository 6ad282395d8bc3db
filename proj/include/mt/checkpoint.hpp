#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>

#include "mt/adam.hpp"
#include "mt/model.hpp"

namespace mt {

// Binary snapshot of a training run. `opt.m` / `opt.v` are only meaningful
// when has_optimizer is set; a checkpoint without optimizer state can be
// decoded from but not resumed.
struct Checkpoint {
  ModelConfig config;
  Seq2SeqParams<float> params;
  uint64_t updates = 0;
  double valid_loss = std::numeric_limits<double>::quiet_NaN();
  bool has_optimizer = false;
  AdamState<float> opt;
};

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mt
