#include "dualcycle/checkpoint.h"

#include <fstream>
#include <sstream>

#include "dualcycle/hash.h"

namespace dualcycle {

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::string& kind, std::uint64_t label_space_hash,
                     std::uint64_t vocab_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << "dualcycle-checkpoint v1\n";
  out << "kind " << kind << "\n";
  out << "label_space_hash " << hex64(label_space_hash) << "\n";
  out << "vocab_hash " << hex64(vocab_hash) << "\n";
  out << "params " << store.size() << "\n";
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Param& p = store[i];
    out << "param " << p.name;
    for (int d : p.value.shape()) out << " " << d;
    out << "\n";
  }
  out << "end-header\n";
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Param& p = store[i];
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path);
}

void load_checkpoint(const std::string& path, ParamStore& store,
                     const std::string& kind, std::uint64_t label_space_hash,
                     std::uint64_t vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  auto next = [&]() {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint " + path);
    return line;
  };
  if (next() != "dualcycle-checkpoint v1")
    throw IoError("not a checkpoint file: " + path);
  std::string expect_kind = "kind " + kind;
  if (next() != expect_kind)
    throw ContractError("checkpoint kind mismatch in " + path + ": " + line);
  if (next() != "label_space_hash " + hex64(label_space_hash))
    throw ContractError("checkpoint label space differs from the loaded dataset");
  if (next() != "vocab_hash " + hex64(vocab_hash))
    throw ContractError("checkpoint vocabulary differs from the loaded dataset");
  std::istringstream count_line(next());
  std::string word;
  std::size_t count = 0;
  count_line >> word >> count;
  if (word != "params" || count != store.size())
    throw ContractError("checkpoint parameter count mismatch in " + path);
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ps(next());
    std::string tag, name;
    ps >> tag >> name;
    std::vector<int> shape;
    int d;
    while (ps >> d) shape.push_back(d);
    const Param& p = store[i];
    if (tag != "param" || name != p.name || shape != p.value.shape())
      throw ContractError("checkpoint parameter mismatch at " + name);
  }
  if (next() != "end-header") throw IoError("malformed checkpoint header");
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store[i];
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint payload in " + path);
  }
}

}  // namespace dualcycle
