#ifndef DUALCYCLE_CHECKPOINT_H_
#define DUALCYCLE_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "dualcycle/params.h"

namespace dualcycle {

// Checkpoint file: a text manifest (kind, dataset hashes, parameter names
// and shapes) followed by the raw little-endian 64-bit float arrays in
// manifest order. The label-space and vocabulary hashes must match on load.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::string& kind, std::uint64_t label_space_hash,
                     std::uint64_t vocab_hash);

// Loads values into an already-constructed store; names and shapes must
// match exactly.
void load_checkpoint(const std::string& path, ParamStore& store,
                     const std::string& kind, std::uint64_t label_space_hash,
                     std::uint64_t vocab_hash);

}  // namespace dualcycle

#endif  // DUALCYCLE_CHECKPOINT_H_
