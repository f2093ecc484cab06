#pragma once

// PNG reading and writing. Tensors are [C,H,W] with values in [0,1].

#include <filesystem>

#include "ian/tensor.hpp"

namespace ian {

/// 8- or 16-bit RGB PNG -> [3,H,W].
Tensor load_image(const std::filesystem::path& path);

/// 8- or 16-bit single-channel PNG -> [1,H,W].
Tensor load_gray(const std::filesystem::path& path);

/// Clamps to [0,1] and quantises with round-half-away-from-zero.
void save_image(const Tensor& img, const std::filesystem::path& path);   // [3,H,W] or [1,3,H,W], 8-bit
void save_gray16(const Tensor& img, const std::filesystem::path& path);  // [1,H,W] or [1,1,H,W], 16-bit

}  // namespace ian
