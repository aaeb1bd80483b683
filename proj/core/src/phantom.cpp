#include "dect/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "dect/error.hpp"
#include "dect/rng.hpp"

namespace dect {

void PhantomSpec::validate() const {
    if (height < 16 || width < 16) throw ContractError("phantom image must be at least 16x16");
    if (lesion_prob < 0.0 || lesion_prob > 1.0) throw ContractError("lesion_prob must lie in [0, 1]");
    if (vessel_count_min < 1 || vessel_count_max < vessel_count_min)
        throw ContractError("invalid vessel count range");
    if (vessel_radius_frac_min <= 0.0 || vessel_radius_frac_max < vessel_radius_frac_min ||
        vessel_radius_frac_max >= 0.5)
        throw ContractError("vessel radius fractions must satisfy 0 < min <= max < 0.5");
    if (defect_frac_min <= 0.0 || defect_frac_max < defect_frac_min || defect_frac_max >= 1.0)
        throw ContractError("defect fractions must satisfy 0 < min <= max < 1");
    for (const auto& c : classes) {
        if (!(c.noise_mono < c.noise_poly))
            throw ContractError("class '" + c.name + "' must have lower mono noise than poly noise");
    }
    // The whole point of the 40 keV domain: the lesion stands out more.
    if (!(cnr_mono(classes[kVessel], classes[kEmbolism]) > cnr_poly(classes[kVessel], classes[kEmbolism])))
        throw ContractError("mono-domain vessel/embolism CNR must exceed the poly-domain CNR");
}

std::string to_string(DatasetRole role) {
    switch (role) {
        case DatasetRole::paired: return "paired";
        case DatasetRole::labeled: return "labeled";
        case DatasetRole::eval: return "eval";
    }
    throw ContractError("unknown dataset role");
}

DatasetRole parse_dataset_role(const std::string& s) {
    if (s == "paired") return DatasetRole::paired;
    if (s == "labeled") return DatasetRole::labeled;
    if (s == "eval") return DatasetRole::eval;
    throw UsageError("unknown role '" + s + "' (expected paired|labeled|eval)");
}

float hu_to_normalized(double hu) {
    return static_cast<float>(std::clamp(hu, -1000.0, 1000.0) / 1000.0);
}

namespace {

struct Ellipse {
    double cx, cy, ax, ay;
    bool contains(double x, double y) const {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay;
        return dx * dx + dy * dy <= 1.0;
    }
};

struct Circle {
    double cx, cy, r;
    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        return dx * dx + dy * dy <= r * r;
    }
};

void fill_ellipse(std::vector<uint8_t>& map, int h, int w, const Ellipse& e, uint8_t cls) {
    const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ay)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(e.cy + e.ay)));
    const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.ax)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(e.cx + e.ax)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (e.contains(x, y)) map[static_cast<size_t>(y) * w + x] = cls;
}

// Returns the number of pixels painted so callers can guarantee visibility
// of very small structures.
int fill_circle(std::vector<uint8_t>& map, int h, int w, const Circle& c, uint8_t cls) {
    int painted = 0;
    const int y0 = std::max(0, static_cast<int>(std::floor(c.cy - c.r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.cy + c.r)));
    const int x0 = std::max(0, static_cast<int>(std::floor(c.cx - c.r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.cx + c.r)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (c.contains(x, y)) {
                map[static_cast<size_t>(y) * w + x] = cls;
                ++painted;
            }
    return painted;
}

}  // namespace

SampleRecord render_phantom(const PhantomSpec& spec, uint32_t patient_id, uint32_t slice_seed) {
    return render_phantom_with_classes(spec, patient_id, slice_seed).record;
}

RenderedSlice render_phantom_with_classes(const PhantomSpec& spec, uint32_t patient_id,
                                          uint32_t slice_seed) {
    spec.validate();
    const int h = spec.height, w = spec.width;
    const double mind = std::min(h, w);

    // Patient-level anatomy stream: every slice of a patient shares its torso
    // and lung geometry; distinct patients never share a stream.
    Rng patient_rng(mix64(0xA11A70u, patient_id));
    const Ellipse torso{w / 2.0 + patient_rng.uniform(-0.03, 0.03) * w,
                        h / 2.0 + patient_rng.uniform(-0.03, 0.03) * h,
                        (0.40 + patient_rng.uniform(-0.02, 0.02)) * w,
                        (0.34 + patient_rng.uniform(-0.02, 0.02)) * h};
    Ellipse lungs[2];
    for (int side = 0; side < 2; ++side) {
        const double dir = side == 0 ? -1.0 : 1.0;
        lungs[side] = Ellipse{torso.cx + dir * (0.185 + patient_rng.uniform(-0.01, 0.01)) * w,
                              torso.cy + patient_rng.uniform(-0.02, 0.02) * h,
                              (0.135 + patient_rng.uniform(-0.015, 0.015)) * w,
                              (0.22 + patient_rng.uniform(-0.02, 0.02)) * h};
    }

    // Slice-level stream: vessels, lesion placement, pixel noise.
    Rng rng(mix64(0x51c3u, patient_id, slice_seed));

    std::vector<uint8_t> cls_map(static_cast<size_t>(h) * w, kAir);
    fill_ellipse(cls_map, h, w, torso, kSoftTissue);
    for (const auto& lung : lungs) fill_ellipse(cls_map, h, w, lung, kLung);

    const int n_vessels = static_cast<int>(rng.uniform_int(spec.vessel_count_min, spec.vessel_count_max));
    std::vector<Circle> vessels;
    for (int v = 0; v < n_vessels; ++v) {
        const int side = static_cast<int>(rng.uniform_int(0, 1));
        const auto& lung = lungs[side];
        const double r = rng.uniform(spec.vessel_radius_frac_min, spec.vessel_radius_frac_max) * mind;
        // Rejection-sample the center inside the shrunken lung so the vessel
        // stays fully within lung tissue.
        double px = lung.cx, py = lung.cy;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double u = rng.uniform(-1.0, 1.0), s = rng.uniform(-1.0, 1.0);
            if (u * u + s * s > 1.0) continue;
            px = lung.cx + u * std::max(lung.ax - r, 0.5);
            py = lung.cy + s * std::max(lung.ay - r, 0.5);
            break;
        }
        vessels.push_back(Circle{px, py, r});
        fill_circle(cls_map, h, w, vessels.back(), kVessel);
    }

    uint8_t label = 0;
    if (rng.bernoulli(spec.lesion_prob)) {
        label = 1;
        const auto& host = vessels[static_cast<size_t>(rng.uniform_int(0, n_vessels - 1))];
        const double frac = rng.uniform(spec.defect_frac_min, spec.defect_frac_max);
        const double rd = frac * host.r;
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const double dist = rng.uniform(0.0, std::max(host.r - rd, 0.0) * 0.85);
        Circle defect{host.cx + dist * std::cos(angle), host.cy + dist * std::sin(angle), rd};
        if (fill_circle(cls_map, h, w, defect, kEmbolism) == 0) {
            // Sub-pixel defect: mark the nearest pixel so a positive label
            // always has image support.
            const int py = std::clamp(static_cast<int>(std::lround(defect.cy)), 0, h - 1);
            const int px = std::clamp(static_cast<int>(std::lround(defect.cx)), 0, w - 1);
            cls_map[static_cast<size_t>(py) * w + px] = kEmbolism;
        }
    }

    RenderedSlice out;
    SampleRecord& rec = out.record;
    rec.patient_id = patient_id;
    rec.height = h;
    rec.width = w;
    rec.poly.resize(cls_map.size());
    std::vector<float> mono(cls_map.size());
    for (size_t i = 0; i < cls_map.size(); ++i) {
        const auto& c = spec.classes[cls_map[i]];
        rec.poly[i] = hu_to_normalized(c.hu_poly + rng.normal() * c.noise_poly);
    }
    for (size_t i = 0; i < cls_map.size(); ++i) {
        const auto& c = spec.classes[cls_map[i]];
        mono[i] = hu_to_normalized(c.hu_mono40 + rng.normal() * c.noise_mono);
    }
    rec.mono = std::move(mono);
    rec.label = label;
    out.class_map = std::move(cls_map);
    return out;
}

namespace {

uint32_t namespaced_patient_id(uint64_t seed, int index) {
    if (index < 0 || index >= (1 << 16)) throw ContractError("patient index must fit in 16 bits");
    return (static_cast<uint32_t>(seed & 0xFFFFu) << 16) | static_cast<uint32_t>(index);
}

}  // namespace

std::vector<SampleRecord> make_dataset(const PhantomSpec& spec, int n_patients, int slices_per_patient,
                                       DatasetRole role, uint64_t seed) {
    if (n_patients < 1 || slices_per_patient < 1)
        throw ContractError("make_dataset needs at least one patient and one slice");
    std::vector<SampleRecord> out;
    out.reserve(static_cast<size_t>(n_patients) * slices_per_patient);
    for (int p = 0; p < n_patients; ++p) {
        const uint32_t pid = namespaced_patient_id(seed, p);
        for (int s = 0; s < slices_per_patient; ++s) {
            SampleRecord rec = render_phantom(spec, pid, static_cast<uint32_t>(s));
            switch (role) {
                case DatasetRole::paired:
                    rec.label.reset();
                    break;
                case DatasetRole::labeled:
                    rec.mono.reset();
                    break;
                case DatasetRole::eval:
                    break;
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace dect
