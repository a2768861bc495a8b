#pragma once

// UQR1 checkpoints.
//
//   UQR1\n
//   spec depth=<d> base_channels=<c> height=<h> width=<w> task=<recon|multitask>\n
//   param <name> <d0,d1,...> <byte offset into payload>\n   (one per parameter)
//   \n
//   <little-endian f32 payload in manifest order>
//
// Loading validates everything before building the model, so a bad file
// never yields a partially populated parameter set.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "core/heteronet.hpp"

namespace uqr::checkpoint {

std::vector<std::uint8_t> encode(const net::Model& model);
net::Model decode(std::span<const std::uint8_t> bytes);

void save(const std::filesystem::path& path, const net::Model& model);
net::Model load(const std::filesystem::path& path);

}  // namespace uqr::checkpoint
