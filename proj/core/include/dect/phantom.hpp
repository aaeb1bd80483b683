#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dect {

// Mean intensity and noise level of one tissue type in both energy domains,
// in Hounsfield units. The monoenergetic (40 keV) column has lower noise for
// every class and a much brighter iodine-filled vessel, which is what makes
// the translated domain diagnostically easier.
struct TissueClass {
    std::string name;
    double hu_poly = 0.0;
    double hu_mono40 = 0.0;
    double noise_poly = 0.0;
    double noise_mono = 0.0;
};

// Contrast-to-noise ratio between two classes within one domain.
inline double cnr_poly(const TissueClass& a, const TissueClass& b) {
    const double dm = a.hu_poly - b.hu_poly;
    return std::abs(dm) / std::sqrt(a.noise_poly * a.noise_poly + b.noise_poly * b.noise_poly);
}
inline double cnr_mono(const TissueClass& a, const TissueClass& b) {
    const double dm = a.hu_mono40 - b.hu_mono40;
    return std::abs(dm) / std::sqrt(a.noise_mono * a.noise_mono + b.noise_mono * b.noise_mono);
}

enum TissueId : int { kAir = 0, kLung = 1, kSoftTissue = 2, kVessel = 3, kEmbolism = 4 };

struct PhantomSpec {
    int height = 64;
    int width = 64;
    double lesion_prob = 0.5;
    int vessel_count_min = 2;
    int vessel_count_max = 5;
    // Vessel radius as a fraction of min(height, width); defect radius as a
    // fraction of its host vessel's radius.
    double vessel_radius_frac_min = 0.045;
    double vessel_radius_frac_max = 0.08;
    double defect_frac_min = 0.3;
    double defect_frac_max = 0.7;
    std::array<TissueClass, 5> classes = {{
        {"air", -1000.0, -1000.0, 20.0, 12.0},
        {"lung", -800.0, -780.0, 40.0, 24.0},
        {"soft_tissue", 40.0, 55.0, 50.0, 30.0},
        {"contrast_vessel", 350.0, 900.0, 60.0, 35.0},
        {"embolism", 60.0, 80.0, 50.0, 30.0},
    }};

    void validate() const;
};

// One slice. Training samples carry exactly one of {mono, label}; evaluation
// samples carry both. Pixels are normalized to [-1, 1].
struct SampleRecord {
    uint32_t patient_id = 0;
    int height = 0;
    int width = 0;
    std::vector<float> poly;
    std::optional<std::vector<float>> mono;
    std::optional<uint8_t> label;
};

enum class DatasetRole { paired, labeled, eval };

std::string to_string(DatasetRole role);
DatasetRole parse_dataset_role(const std::string& s);

// clamp(hu, -1000, 1000) / 1000
float hu_to_normalized(double hu);

// Fully deterministic in (patient_id, slice_seed): the torso/lung geometry is
// drawn from a patient-level stream and everything else (vessels, lesion,
// noise) from a per-slice stream. Returns a record with both domains and the
// lesion label.
SampleRecord render_phantom(const PhantomSpec& spec, uint32_t patient_id, uint32_t slice_seed);

// Same rendering plus the per-pixel tissue assignment (one TissueId per
// pixel); used by diagnostics and statistical tests.
struct RenderedSlice {
    SampleRecord record;
    std::vector<uint8_t> class_map;
};
RenderedSlice render_phantom_with_classes(const PhantomSpec& spec, uint32_t patient_id,
                                          uint32_t slice_seed);

// Renders n_patients x slices_per_patient records and strips annotations
// according to the role. Patient ids are namespaced by (seed, index) so
// datasets generated with different seeds never share a patient.
std::vector<SampleRecord> make_dataset(const PhantomSpec& spec, int n_patients, int slices_per_patient,
                                       DatasetRole role, uint64_t seed);

}  // namespace dect
