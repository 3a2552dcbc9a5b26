#ifndef HCCTC_NUMERICS_CHECKPOINT_HPP_
#define HCCTC_NUMERICS_CHECKPOINT_HPP_

#include <string>
#include <vector>

#include "hcctc/numerics/tensor.hpp"

namespace hcctc {

/// One archive entry: a named tensor with its declared shape and
/// single-precision payload, row-major.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

using Checkpoint = std::vector<CheckpointEntry>;

// Byte layout is documented in docs/formats.md.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

template <typename S>
Checkpoint to_checkpoint(const ParameterSet<S>& params) {
  Checkpoint ckpt;
  ckpt.reserve(params.size());
  for (const auto& p : params) {
    CheckpointEntry e{p.name, p.shape, {}};
    e.data.resize(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) e.data[static_cast<std::size_t>(i)] = static_cast<float>(p.value.data()[i]);
    ckpt.push_back(std::move(e));
  }
  return ckpt;
}

/// Copies checkpoint values into an existing parameter set. Every parameter
/// must be present with a matching shape.
template <typename S>
void load_into(const Checkpoint& ckpt, ParameterSet<S>& params) {
  if (ckpt.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.size()) + " entries, model expects " +
                          std::to_string(params.size()));
  for (const auto& e : ckpt) {
    if (!params.contains(e.name)) throw CheckpointError("checkpoint entry not in model: " + e.name);
    auto& p = params[params.index_of(e.name)];
    if (p.shape != e.shape)
      throw CheckpointError("shape mismatch for " + e.name + ": checkpoint " + shape_string(e.shape) + ", model " +
                            shape_string(p.shape));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<S>(e.data[static_cast<std::size_t>(i)]);
  }
}

/// Arithmetic mean per entry. All checkpoints must agree on names, order and
/// shapes; the first disagreement is reported by name.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts);

}  // namespace hcctc

#endif  // HCCTC_NUMERICS_CHECKPOINT_HPP_
