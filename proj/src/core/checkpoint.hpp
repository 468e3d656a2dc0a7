#ifndef ATP_CHECKPOINT_HPP
#define ATP_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "core/mdn_model.hpp"
#include "core/preprocess.hpp"

namespace atp {

// Checkpoint = JSON manifest (config, seed, epoch, normalizer, named tensor
// table) at `path` plus a flat little-endian float64 payload at `path`.bin,
// tensors concatenated in table order, column-major within each tensor.
struct Checkpoint {
  ModelParams params;
  Normalizer normalizer;
  std::uint64_t seed = 0;
  int epoch = 0;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace atp

#endif
