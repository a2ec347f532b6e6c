#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aegn/nn.hpp"

namespace aegn {

struct ConvBlockConfig {
    std::string name;
    int in_ch = 1;
    int out_ch = 1;

    bool operator==(const ConvBlockConfig&) const = default;
};

// A network is a chain of convolution blocks (spline conv, ELU, frozen
// batch norm), two max-pooling stages splitting the chain into a fine and
// a coarse level, up to two residual skips, and a global-max readout with
// a linear head. Block indices below are 1-based.
struct ArchitectureConfig {
    std::string preset = "custom";
    int kernel_size = 2;
    int degree = 1;
    int input_width = 1;
    std::vector<ConvBlockConfig> blocks;
    // y_k = block_k(y_{k-1}) + y_{k-1}; 0 means no such skip.
    int skip_identity_after = 0;
    // y_k = block_k(y_{k-1}) + P y_{k-1} with a learned no-bias projection.
    int skip_project_after = 0;
    // First entry: last block of the fine level. Second entry: last block
    // overall, pooled again before the readout.
    std::array<int, 2> pool_after{0, 0};
    std::array<int, 3> voxel_dims{12, 16, 16};
    int outputs = 2;

    bool operator==(const ArchitectureConfig&) const = default;

    int num_blocks() const { return static_cast<int>(blocks.size()); }
    int head_width() const { return blocks.empty() ? input_width : blocks.back().out_ch; }
    // 0 for fine-level blocks, 1 for coarse-level blocks (1-based index).
    int level_of_block(int k) const { return k <= pool_after[0] ? 0 : 1; }
};

// Classifier for 2-class recognition streams: widths 1 -> 8 -> 16 -> 16 ->
// 16 -> 32 -> 32 -> 32 on a 2^3 kernel grid.
ArchitectureConfig recognition_preset(int classes = 2, int degree = 1);
// Detector head: widths 1 -> 16 -> 32 -> 32 -> 32 -> 128 -> 128 -> 128 on
// an 8^3 grid; outputs one score per class plus 5 box regressors.
ArchitectureConfig detection_preset(int classes = 2, int degree = 1);

// Structural soundness: chained widths, skip and pool placement, positive
// dimensions. Throws with the offending block named.
void validate_architecture(const ArchitectureConfig& config);

std::string architecture_to_json(const ArchitectureConfig& config);
ArchitectureConfig architecture_from_json(const std::string& text);

struct ConvBlock {
    SplineKernel conv;
    BatchNorm bn;
};

struct Model {
    ArchitectureConfig config;
    std::vector<ConvBlock> blocks;
    LinearLayer skip_proj; // used when config.skip_project_after > 0
    LinearLayer head;
};

// Deterministic Xavier-uniform weights for conv kernels and linear maps,
// identity batch norm statistics, zero biases.
Model random_init(const ArchitectureConfig& config, uint64_t seed);

// Binary weight file: magic "AEGW", version, embedded architecture JSON,
// tensor blocks in a fixed order, CRC-32 over all tensor payloads.
void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

// Raises a shape error naming the first mismatching component when the
// loaded architecture differs from the expected one.
void require_matching_architecture(const ArchitectureConfig& loaded,
                                   const ArchitectureConfig& expected);

} // namespace aegn
