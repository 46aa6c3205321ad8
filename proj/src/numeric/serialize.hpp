#pragma once

#include <iosfwd>
#include <string>

#include "numeric/tensor.hpp"

namespace masklab::numeric {

// "VMT1" binary tensor: magic, u32 rank, rank x u32 dims, little-endian f32
// payload, row-major. Gradient/requires_grad flags are not persisted.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

void write_u32(std::ostream& os, std::uint32_t v);
std::uint32_t read_u32(std::istream& is);

}  // namespace masklab::numeric
