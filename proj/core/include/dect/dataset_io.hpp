#pragma once

#include <string>
#include <vector>

#include "dect/phantom.hpp"

namespace dect {

// On-disk slice collection. Annotation presence is file-wide: every sample
// in a file carries the same optional fields, as declared by the header
// flags.
struct Dataset {
    int height = 0;
    int width = 0;
    bool has_mono = false;
    bool has_labels = false;
    std::vector<SampleRecord> samples;
};

Dataset dataset_from_samples(std::vector<SampleRecord> samples, DatasetRole role);

// Binary layout (all little-endian):
//   magic "DECT", u32 version=1, u32 n_samples, u32 height, u32 width,
//   u8 flags (bit0 mono present, bit1 labels present), then per sample:
//   u32 patient_id, f32[H*W] poly, [f32[H*W] mono], [u8 label].
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

}  // namespace dect
