#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fcnbc/adam.hpp"
#include "fcnbc/msnet.hpp"

namespace fcnbc {

/// Checkpoint layout (little-endian):
///   magic "FCNBCCKP", u32 version,
///   u32 length + MSNetConfig as JSON text,
///   u32 layer count, then per layer u32 out, u32 in, u32 kernel,
///   per layer: out*in*k*k f32 weights followed by out f32 biases,
///   u8 has_adam; if set: i64 step, f64 beta1, beta2, epsilon, lr, then the
///   u32 block count, per block u32 size + first and second moments as f32,
///   u32 length + trainer state JSON text (may be empty).
struct Checkpoint {
  MSNet<float> model;
  std::optional<AdamState<float>> adam;
  std::string trainer_state;
};

void save_checkpoint(const std::filesystem::path& path, const MSNet<float>& model, const AdamState<float>* adam,
                     const std::string& trainer_state = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fcnbc
