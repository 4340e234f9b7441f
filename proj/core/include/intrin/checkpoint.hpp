#ifndef INTRIN_CHECKPOINT_HPP
#define INTRIN_CHECKPOINT_HPP

#include <filesystem>
#include <optional>

#include "intrin/adam.hpp"
#include "intrin/network.hpp"

namespace intrin {

// Versioned binary checkpoint: JSON header (config, optimizer hyperparams)
// followed by raw little-endian float blocks for parameters, running stats
// and optimizer moments. save -> load -> save is bit-stable.
struct Checkpoint {
  MirrorLinkNet<float> net;
  std::optional<AdamState<float>> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, MirrorLinkNet<float>& net,
                     const AdamState<float>* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace intrin

#endif  // INTRIN_CHECKPOINT_HPP
