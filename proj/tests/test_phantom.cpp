#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "dect/phantom.hpp"
#include "dect/error.hpp"

using namespace dect;

TEST_SUITE("phantom") {
    TEST_CASE("rendering is bit-deterministic in (patient_id, slice_seed)") {
        PhantomSpec spec;
        auto a = render_phantom(spec, 42, 7);
        auto b = render_phantom(spec, 42, 7);
        CHECK(a.poly == b.poly);
        CHECK(*a.mono == *b.mono);
        CHECK(*a.label == *b.label);

        auto c = render_phantom(spec, 42, 8);
        CHECK(a.poly != c.poly);
    }

    TEST_CASE("different patients share no geometry stream") {
        PhantomSpec spec;
        auto a = render_phantom_with_classes(spec, 1, 0);
        auto b = render_phantom_with_classes(spec, 2, 0);
        CHECK(a.class_map != b.class_map);
    }

    TEST_CASE("lesion_prob zero forces label zero") {
        PhantomSpec spec;
        spec.lesion_prob = 0.0;
        for (uint32_t s = 0; s < 16; ++s) {
            auto rec = render_phantom(spec, 5, s);
            CHECK(*rec.label == 0);
        }
    }

    TEST_CASE("positive labels always come with embolism pixels") {
        PhantomSpec spec;
        spec.lesion_prob = 1.0;
        for (uint32_t s = 0; s < 16; ++s) {
            auto slice = render_phantom_with_classes(spec, 6, s);
            CHECK(*slice.record.label == 1);
            int defect_pixels = 0;
            for (uint8_t c : slice.class_map) defect_pixels += (c == kEmbolism);
            CHECK(defect_pixels > 0);
        }
    }

    TEST_CASE("mono domain separates vessel from defect more than poly") {
        // Near-noiseless rendering: pixel values sit at the class means, so
        // the rendered contrast reduces to the table contrast.
        PhantomSpec spec;
        for (auto& c : spec.classes) {
            c.noise_poly = 1e-9;
            c.noise_mono = 1e-10;
        }
        spec.lesion_prob = 1.0;
        auto slice = render_phantom_with_classes(spec, 3, 1);
        double vessel_poly = 0, vessel_mono = 0, defect_poly = 0, defect_mono = 0;
        int nv = 0, nd = 0;
        for (size_t i = 0; i < slice.class_map.size(); ++i) {
            if (slice.class_map[i] == kVessel) {
                vessel_poly += slice.record.poly[i];
                vessel_mono += (*slice.record.mono)[i];
                ++nv;
            } else if (slice.class_map[i] == kEmbolism) {
                defect_poly += slice.record.poly[i];
                defect_mono += (*slice.record.mono)[i];
                ++nd;
            }
        }
        REQUIRE(nv > 0);
        REQUIRE(nd > 0);
        const double poly_contrast = std::abs(vessel_poly / nv - defect_poly / nd);
        const double mono_contrast = std::abs(vessel_mono / nv - defect_mono / nd);
        CHECK(mono_contrast == doctest::Approx(std::abs(0.900 - 0.080)).epsilon(1e-4));
        CHECK(poly_contrast == doctest::Approx(std::abs(0.350 - 0.060)).epsilon(1e-4));
        CHECK(mono_contrast > poly_contrast);
    }

    TEST_CASE("class table: mono CNR exceeds poly CNR and mono noise is lower") {
        PhantomSpec spec;
        const auto& vessel = spec.classes[kVessel];
        const auto& defect = spec.classes[kEmbolism];
        CHECK(cnr_mono(vessel, defect) > cnr_poly(vessel, defect));
        for (const auto& c : spec.classes) CHECK(c.noise_mono < c.noise_poly);
        CHECK_NOTHROW(spec.validate());
    }

    TEST_CASE("all emitted pixels lie in [-1, 1]") {
        PhantomSpec spec;
        for (uint32_t s = 0; s < 8; ++s) {
            auto rec = render_phantom(spec, 9, s);
            for (float v : rec.poly) {
                CHECK(v >= -1.0f);
                CHECK(v <= 1.0f);
            }
            for (float v : *rec.mono) {
                CHECK(v >= -1.0f);
                CHECK(v <= 1.0f);
            }
        }
    }

    TEST_CASE("hu_to_normalized clamps and scales") {
        CHECK(hu_to_normalized(0.0) == 0.0f);
        CHECK(hu_to_normalized(2500.0) == 1.0f);
        CHECK(hu_to_normalized(-1000.0) == -1.0f);
        CHECK(hu_to_normalized(500.0) == 0.5f);
    }

    TEST_CASE("empirical soft-tissue noise is within 10% of the spec value") {
        PhantomSpec spec;
        std::vector<double> poly_vals, mono_vals;
        for (uint32_t s = 0; poly_vals.size() < 20000; ++s) {
            auto slice = render_phantom_with_classes(spec, 11, s);
            for (size_t i = 0; i < slice.class_map.size(); ++i) {
                if (slice.class_map[i] != kSoftTissue) continue;
                poly_vals.push_back(slice.record.poly[i]);
                mono_vals.push_back((*slice.record.mono)[i]);
            }
        }
        auto stddev = [](const std::vector<double>& v) {
            double mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0;
            for (double x : v) var += (x - mean) * (x - mean);
            return std::sqrt(var / static_cast<double>(v.size()));
        };
        const double poly_sd = stddev(poly_vals);
        const double mono_sd = stddev(mono_vals);
        CHECK(poly_sd == doctest::Approx(50.0 / 1000.0).epsilon(0.10));
        CHECK(mono_sd == doctest::Approx(30.0 / 1000.0).epsilon(0.10));
    }

    TEST_CASE("make_dataset role contracts and counting") {
        PhantomSpec spec;
        auto paired = make_dataset(spec, 5, 10, DatasetRole::paired, 1);
        CHECK(paired.size() == 50);
        std::set<uint32_t> ids;
        for (const auto& r : paired) {
            CHECK(r.mono.has_value());
            CHECK_FALSE(r.label.has_value());
            ids.insert(r.patient_id);
        }
        CHECK(ids.size() == 5);

        auto labeled = make_dataset(spec, 2, 3, DatasetRole::labeled, 2);
        for (const auto& r : labeled) {
            CHECK_FALSE(r.mono.has_value());
            CHECK(r.label.has_value());
        }
        auto eval = make_dataset(spec, 2, 3, DatasetRole::eval, 3);
        for (const auto& r : eval) {
            CHECK(r.mono.has_value());
            CHECK(r.label.has_value());
        }
    }

    TEST_CASE("datasets with different seeds use disjoint patient ids") {
        PhantomSpec spec;
        auto a = make_dataset(spec, 3, 1, DatasetRole::labeled, 1);
        auto b = make_dataset(spec, 3, 1, DatasetRole::labeled, 2);
        std::set<uint32_t> ids_a, ids_b;
        for (const auto& r : a) ids_a.insert(r.patient_id);
        for (const auto& r : b) ids_b.insert(r.patient_id);
        for (uint32_t id : ids_a) CHECK(ids_b.count(id) == 0);
    }

    TEST_CASE("label prevalence stays near lesion_prob") {
        PhantomSpec spec;
        spec.lesion_prob = 0.5;
        auto ds = make_dataset(spec, 50, 40, DatasetRole::labeled, 17);  // 2000 slices
        double mean = 0;
        for (const auto& r : ds) mean += *r.label;
        mean /= static_cast<double>(ds.size());
        CHECK(mean > 0.45);
        CHECK(mean < 0.55);
    }

    TEST_CASE("spec validation rejects inverted noise ordering") {
        PhantomSpec spec;
        spec.classes[0].noise_mono = spec.classes[0].noise_poly + 1.0;
        CHECK_THROWS_AS(spec.validate(), ContractError);
    }
}
