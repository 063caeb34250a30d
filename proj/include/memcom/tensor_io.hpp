#pragma once
// MEMT binary tensor blocks:
//   "MEMT" | u8 dtype | u8 rank | rank x u64 extent (LE) | payload (LE)
// dtype: 0 = f64, 1 = f32, 2 = f16 payload, 3 = i8 payload.
// i8 payloads store round(x / scale); the scale travels outside the block.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "memcom/tensor.hpp"

namespace memcom {

enum class DType : std::uint8_t { F64 = 0, F32 = 1, F16 = 2, I8 = 3 };

std::size_t dtype_bytes(DType dtype);

void write_tensor(std::ostream& out, const Tensor& t, DType dtype = DType::F64, double i8_scale = 1.0);
Tensor read_tensor(std::istream& in, double i8_scale = 1.0);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::F64);
Tensor load_tensor(const std::filesystem::path& path);

std::uint16_t float_to_half(float x);
float half_to_float(std::uint16_t h);

}  // namespace memcom
