#pragma once
// Checkpoint container: a `key=value` text header closed by an empty line,
// then named MEMT blocks, each introduced by a line `@<name>`.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "memcom/config_file.hpp"
#include "memcom/tensor.hpp"
#include "memcom/tensor_io.hpp"

namespace memcom {

inline constexpr const char* kCheckpointTag = "MEMCOM-CHECKPOINT 1";

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct Checkpoint {
    KeyValues header;
    std::vector<NamedTensor> tensors;

    const Tensor& get(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const KeyValues& header,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                      DType dtype = DType::F64);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace memcom
