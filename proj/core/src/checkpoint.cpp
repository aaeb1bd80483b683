#include "dect/checkpoint.hpp"

#include <filesystem>
#include <sstream>

#include "dect/error.hpp"
#include "dect/io_util.hpp"

namespace dect {

namespace {

namespace fs = std::filesystem;

struct ManifestEntry {
    std::string name;
    std::vector<int> dims;
    uint64_t offset = 0;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : dims) n *= d;
        return n;
    }
};

std::vector<std::pair<std::string, Parameter<float>*>> named_params(GeneratorNet<float>* gen,
                                                                    ClassifierNet<float>* cls) {
    std::vector<std::pair<std::string, Parameter<float>*>> out;
    if (gen)
        for (Parameter<float>* p : gen->parameters()) out.emplace_back("gen." + p->name, p);
    if (cls)
        for (Parameter<float>* p : cls->parameters()) out.emplace_back("cls." + p->name, p);
    return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& dir) {
    std::vector<ManifestEntry> entries;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.size() < 3)
            throw IntegrityError("checkpoint '" + dir + "': malformed manifest line '" + line + "'");
        e.name = tokens.front();
        for (size_t i = 1; i + 1 < tokens.size(); ++i) {
            const int64_t d = detail::parse_int(tokens[i]);
            if (d <= 0) throw IntegrityError("checkpoint '" + dir + "': non-positive dimension in '" + line + "'");
            e.dims.push_back(static_cast<int>(d));
        }
        e.offset = static_cast<uint64_t>(detail::parse_int(tokens.back()));
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw IntegrityError("checkpoint '" + dir + "': empty manifest");
    return entries;
}

}  // namespace

void save_checkpoint(const std::string& dir, const TrainConfig& config, int fold, int epoch,
                     GeneratorNet<float>* gen, ClassifierNet<float>* cls, bool with_optimizer_state) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec && !fs::is_directory(dir)) throw IoError("cannot create checkpoint directory '" + dir + "'");

    auto params = named_params(gen, cls);
    if (params.empty()) throw ContractError("checkpoint holds no networks");

    std::string manifest;
    detail::ByteWriter blob;
    detail::ByteWriter optim;
    for (auto& [name, p] : params) {
        manifest += name;
        for (int d : p->value.shape()) manifest += ' ' + std::to_string(d);
        manifest += ' ' + std::to_string(blob.bytes.size()) + '\n';
        blob.f32_span(p->value.values().data(), p->value.values().size());
        if (with_optimizer_state) {
            optim.f32_span(p->adam_m.data(), p->adam_m.size());
            optim.f32_span(p->adam_v.data(), p->adam_v.size());
            optim.u32(static_cast<uint32_t>(p->step_count));
        }
    }

    std::string config_text;
    for (const auto& line : serialize_config(config)) config_text += line + '\n';
    config_text += "fold=" + std::to_string(fold) + '\n';
    config_text += "epoch=" + std::to_string(epoch) + '\n';

    detail::atomic_write_text((fs::path(dir) / "manifest.txt").string(), manifest);
    detail::atomic_write_file((fs::path(dir) / "params.bin").string(), blob.bytes);
    detail::atomic_write_text((fs::path(dir) / "config.txt").string(), config_text);
    const std::string optim_path = (fs::path(dir) / "optim.bin").string();
    if (with_optimizer_state) {
        detail::atomic_write_file(optim_path, optim.bytes);
    } else if (fs::exists(optim_path)) {
        fs::remove(optim_path);
    }
}

Checkpoint load_checkpoint(const std::string& dir) {
    const auto manifest_bytes = detail::read_file((fs::path(dir) / "manifest.txt").string());
    const auto blob = detail::read_file((fs::path(dir) / "params.bin").string());
    const auto config_bytes = detail::read_file((fs::path(dir) / "config.txt").string());

    Checkpoint ckpt;
    {
        std::istringstream in(std::string(config_bytes.begin(), config_bytes.end()));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw IntegrityError("checkpoint '" + dir + "': malformed config line '" + line + "'");
            const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
            try {
                if (key == "fold") ckpt.fold = static_cast<int>(detail::parse_int(value));
                else if (key == "epoch") ckpt.epoch = static_cast<int>(detail::parse_int(value));
                else apply_config_line(ckpt.config, key, value);
            } catch (const UsageError& e) {
                throw IntegrityError("checkpoint '" + dir + "': " + e.what());
            }
        }
    }

    const auto entries = parse_manifest(std::string(manifest_bytes.begin(), manifest_bytes.end()), dir);
    bool any_gen = false, any_cls = false;
    for (const auto& e : entries) {
        if (e.name.starts_with("gen.")) any_gen = true;
        else if (e.name.starts_with("cls.")) any_cls = true;
        else throw IntegrityError("checkpoint '" + dir + "': unknown parameter namespace in '" + e.name + "'");
    }
    if (any_gen)
        ckpt.gen = init_generator<float>(ckpt.config.gen_base_channels, ckpt.config.gen_blocks, ckpt.config.seed);
    if (any_cls)
        ckpt.cls = init_classifier<float>(ckpt.config.cls_base_channels, ckpt.config.cls_stages, ckpt.config.seed);

    auto params = named_params(ckpt.gen ? &*ckpt.gen : nullptr, ckpt.cls ? &*ckpt.cls : nullptr);
    if (params.size() != entries.size())
        throw IntegrityError("checkpoint '" + dir + "': manifest lists " + std::to_string(entries.size()) +
                             " parameters but the configured networks have " + std::to_string(params.size()));

    // The optimizer blob, when present, follows the manifest order exactly.
    const std::string optim_path = (fs::path(dir) / "optim.bin").string();
    std::vector<char> optim_bytes;
    if (fs::exists(optim_path)) {
        optim_bytes = detail::read_file(optim_path);
        ckpt.has_optimizer_state = true;
    }
    detail::ByteReader optim{optim_bytes, 0, "checkpoint '" + dir + "' optim.bin"};

    uint64_t expected_offset = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        auto& [name, p] = params[i];
        if (e.name != name)
            throw IntegrityError("checkpoint '" + dir + "': manifest entry '" + e.name +
                                 "' does not match expected parameter '" + name + "'");
        if (e.dims != p->value.shape())
            throw IntegrityError("checkpoint '" + dir + "': parameter '" + e.name + "' has dims " +
                                 shape_str(e.dims) + " but the configured network expects " +
                                 shape_str(p->value.shape()));
        if (e.offset != expected_offset)
            throw IntegrityError("checkpoint '" + dir + "': parameter '" + e.name + "' at offset " +
                                 std::to_string(e.offset) + ", expected " + std::to_string(expected_offset));
        const size_t count = static_cast<size_t>(e.numel());
        if (e.offset + count * sizeof(float) > blob.size())
            throw IntegrityError("checkpoint '" + dir + "': blob truncated at parameter '" + e.name + "'");
        std::memcpy(p->value.mutable_values().data(), blob.data() + e.offset, count * sizeof(float));
        expected_offset += count * sizeof(float);
        if (ckpt.has_optimizer_state) {
            optim.f32_span(p->adam_m.data(), count);
            optim.f32_span(p->adam_v.data(), count);
            p->step_count = optim.u32();
        }
    }
    if (expected_offset != blob.size())
        throw IntegrityError("checkpoint '" + dir + "': blob has " + std::to_string(blob.size()) +
                             " bytes but the manifest accounts for " + std::to_string(expected_offset));
    if (ckpt.has_optimizer_state && !optim.done())
        throw IntegrityError("checkpoint '" + dir + "': optim.bin has trailing bytes");
    return ckpt;
}

}  // namespace dect
