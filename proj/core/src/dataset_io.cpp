#include "dect/dataset_io.hpp"

#include "dect/error.hpp"
#include "dect/io_util.hpp"

namespace dect {

namespace {
constexpr char kMagic[4] = {0x44, 0x45, 0x43, 0x54};  // "DECT"
constexpr uint32_t kVersion = 1;
}  // namespace

Dataset dataset_from_samples(std::vector<SampleRecord> samples, DatasetRole role) {
    if (samples.empty()) throw ContractError("dataset needs at least one sample");
    Dataset ds;
    ds.height = samples.front().height;
    ds.width = samples.front().width;
    ds.has_mono = role != DatasetRole::labeled;
    ds.has_labels = role != DatasetRole::paired;
    ds.samples = std::move(samples);
    return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
    const size_t hw = static_cast<size_t>(ds.height) * ds.width;
    detail::ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<uint32_t>(ds.samples.size()));
    w.u32(static_cast<uint32_t>(ds.height));
    w.u32(static_cast<uint32_t>(ds.width));
    w.u8(static_cast<uint8_t>((ds.has_mono ? 1 : 0) | (ds.has_labels ? 2 : 0)));
    for (const auto& s : ds.samples) {
        if (s.height != ds.height || s.width != ds.width)
            throw ContractError("sample dimensions differ from dataset header");
        if (s.poly.size() != hw) throw ContractError("poly buffer does not match image size");
        if (ds.has_mono != s.mono.has_value() || ds.has_labels != s.label.has_value())
            throw ContractError("sample annotations do not match dataset flags");
        w.u32(s.patient_id);
        w.f32_span(s.poly.data(), hw);
        if (ds.has_mono) {
            if (s.mono->size() != hw) throw ContractError("mono buffer does not match image size");
            w.f32_span(s.mono->data(), hw);
        }
        if (ds.has_labels) {
            if (*s.label > 1) throw ContractError("label must be 0 or 1");
            w.u8(*s.label);
        }
    }
    detail::atomic_write_file(path, w.bytes);
}

Dataset load_dataset(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::ByteReader r{bytes, 0, "dataset '" + path + "'"};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw IntegrityError("'" + path + "' is not a DECT dataset (bad magic)");
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw IntegrityError("'" + path + "' has unsupported version " + std::to_string(version));
    const uint32_t n = r.u32();
    Dataset ds;
    ds.height = static_cast<int>(r.u32());
    ds.width = static_cast<int>(r.u32());
    if (ds.height <= 0 || ds.width <= 0 || ds.height > 1 << 14 || ds.width > 1 << 14)
        throw IntegrityError("'" + path + "' declares implausible image size");
    const uint8_t flags = r.u8();
    if (flags & ~0x3u) throw IntegrityError("'" + path + "' has unknown flag bits");
    ds.has_mono = flags & 1;
    ds.has_labels = flags & 2;
    const size_t hw = static_cast<size_t>(ds.height) * ds.width;
    ds.samples.resize(n);
    for (auto& s : ds.samples) {
        s.patient_id = r.u32();
        s.height = ds.height;
        s.width = ds.width;
        s.poly.resize(hw);
        r.f32_span(s.poly.data(), hw);
        if (ds.has_mono) {
            s.mono.emplace(hw);
            r.f32_span(s.mono->data(), hw);
        }
        if (ds.has_labels) {
            const uint8_t label = r.u8();
            if (label > 1) throw IntegrityError("'" + path + "' contains a label outside {0,1}");
            s.label = label;
        }
    }
    if (!r.done())
        throw IntegrityError("'" + path + "' has " + std::to_string(bytes.size() - r.pos) +
                             " trailing bytes after the declared samples");
    return ds;
}

}  // namespace dect
