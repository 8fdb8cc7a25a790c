#ifndef DUALCYCLE_HASH_H_
#define DUALCYCLE_HASH_H_

#include <cstdint>
#include <string>
#include <string_view>

namespace dualcycle {

// FNV-1a 64-bit, used for cheap content fingerprints (vocab/label space).
std::uint64_t fnv1a64(std::string_view data);

std::string hex64(std::uint64_t v);

// SHA-1 hex digest of a buffer; used as the content hash of the dataset
// manifest echoed into reports.
std::string sha1_hex(std::string_view data);

}  // namespace dualcycle

#endif  // DUALCYCLE_HASH_H_
