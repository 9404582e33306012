#include "rangefuse/lut.hpp"

#include "rangefuse/errors.hpp"
#include "rangefuse/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rangefuse {

namespace {

using nlohmann::json;

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_reals(std::string& out, const std::vector<double>& values) {
    out += '[';
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k) out += ", ";
        out += format_real(values[k]);
    }
    out += ']';
}

void append_ints(std::string& out, const std::vector<int>& values) {
    out += '[';
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k) out += ", ";
        out += std::to_string(values[k]);
    }
    out += ']';
}

const json& field(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ContractError(std::string("LUT JSON: missing field '") + name + "'");
    return *it;
}

template <class T>
T get_as(const json& obj, const char* name) {
    const json& v = field(obj, name);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ContractError(std::string("LUT JSON: field '") + name + "' has the wrong type");
    }
}

std::vector<double> get_reals(const json& obj, const char* name) {
    const json& v = field(obj, name);
    if (!v.is_array()) throw ContractError(std::string("LUT JSON: field '") + name + "' must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ContractError(std::string("LUT JSON: non-numeric value in '") + name + "'");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace

std::string_view to_string(EntrySource source) {
    switch (source) {
        case EntrySource::em: return "em";
        case EntrySource::fallback_small: return "fallback_small";
        case EntrySource::fallback_undetermined: return "fallback_undetermined";
    }
    return "em";
}

EntrySource parse_entry_source(std::string_view name) {
    if (name == "em") return EntrySource::em;
    if (name == "fallback_small") return EntrySource::fallback_small;
    if (name == "fallback_undetermined") return EntrySource::fallback_undetermined;
    throw ContractError("unknown entry source '" + std::string(name) + "'");
}

bool on_simplex(const std::vector<double>& weights, double tol) {
    if (weights.empty()) return false;
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) return false;
        sum += w;
    }
    return std::abs(sum - 1.0) <= tol;
}

std::vector<double> uniform_weights(std::size_t num_models) {
    return std::vector<double>(num_models, 1.0 / static_cast<double>(num_models));
}

void WeightLut::validate() const {
    if (version != kFormatVersion) {
        throw ContractError("LUT version mismatch: expected " + std::to_string(kFormatVersion) +
                            ", got " + std::to_string(version));
    }
    if (num_models == 0) throw ContractError("LUT must have at least one model");
    const BinSpace bins(bin_width);
    if (bins.num_bins() != num_bins) {
        throw ContractError("LUT num_bins " + std::to_string(num_bins) + " inconsistent with bin_width " +
                            std::to_string(bin_width));
    }
    if (fallback_weights.size() != num_models || !on_simplex(fallback_weights)) {
        throw ContractError("LUT fallback weights: simplex violation");
    }
    for (const auto& [key, entry] : entries) {
        if (!(entry.key == key)) throw ContractError("LUT entry stored under a different key");
        if (key.arity() != num_models) throw ContractError("LUT entry key arity differs from num_models");
        for (int idx : key.indices) {
            if (idx < 0 || idx >= num_bins) throw ContractError("LUT entry key index out of range");
        }
        if (entry.weights.size() != num_models || !on_simplex(entry.weights)) {
            throw ContractError("LUT entry weights: simplex violation");
        }
    }
}

EntryCounts count_sources(const WeightLut& lut) {
    EntryCounts counts;
    for (const auto& [key, entry] : lut.entries) {
        switch (entry.source) {
            case EntrySource::em: ++counts.em; break;
            case EntrySource::fallback_small: ++counts.fallback_small; break;
            case EntrySource::fallback_undetermined: ++counts.fallback_undetermined; break;
        }
    }
    return counts;
}

WeightLut make_fallback_lut(std::size_t num_models, const BinSpace& space,
                            std::optional<std::vector<double>> fallback) {
    WeightLut lut;
    lut.num_models = num_models;
    lut.bin_width = space.bin_width();
    lut.num_bins = space.num_bins();
    lut.fallback_weights = fallback ? std::move(*fallback) : uniform_weights(num_models);
    lut.validate();
    return lut;
}

LutEntry estimate_entry(const BinGroup& group, const EmConfig& cfg, const std::vector<double>& fallback) {
    LutEntry entry;
    entry.key = group.key;
    entry.count = group.count();
    if (group.count() < cfg.min_pixels) {
        entry.weights = fallback;
        entry.source = EntrySource::fallback_small;
        return entry;
    }

    GmmBinModel model = run_mpem(group, cfg);
    entry.converged = model.converged;
    entry.steps = model.steps_taken;
    if (is_undetermined(model, cfg) || !on_simplex(model.weights)) {
        entry.weights = fallback;
        entry.source = EntrySource::fallback_undetermined;
    } else {
        entry.weights = std::move(model.weights);
        entry.source = EntrySource::em;
    }
    return entry;
}

WeightLut estimate_lut(const ReferenceBatch& batch, const BinSpace& space, const EmConfig& cfg,
                       int threads, std::optional<std::vector<double>> fallback) {
    cfg.validate();
    if (batch.num_samples() == 0 || batch.size() == 0) throw ContractError("empty reference set");

    WeightLut lut = make_fallback_lut(batch.num_models(), space, std::move(fallback));
    lut.min_pixels = cfg.min_pixels;

    const auto groups = partition_reference(batch, space, threads);
    std::vector<LutEntry> entries(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t g) {
        entries[g] = estimate_entry(groups[g], cfg, lut.fallback_weights);
    });
    for (auto& entry : entries) {
        BinSetKey key = entry.key;
        lut.entries.emplace(std::move(key), std::move(entry));
    }
    return lut;
}

const std::vector<double>& lut_lookup(const WeightLut& lut, const BinSetKey& key) {
    if (key.arity() != lut.num_models) {
        throw ContractError("key arity " + std::to_string(key.arity()) + " does not match " +
                            std::to_string(lut.num_models) + " models");
    }
    auto it = lut.entries.find(key);
    return it == lut.entries.end() ? lut.fallback_weights : it->second.weights;
}

std::string to_json(const WeightLut& lut) {
    std::string out = "{\n";
    out += "  \"version\": " + std::to_string(lut.version) + ",\n";
    out += "  \"num_models\": " + std::to_string(lut.num_models) + ",\n";
    out += "  \"bin_width\": " + std::to_string(lut.bin_width) + ",\n";
    out += "  \"num_bins\": " + std::to_string(lut.num_bins) + ",\n";
    out += "  \"value_range\": [0, 255],\n";
    out += "  \"min_pixels\": " + std::to_string(lut.min_pixels) + ",\n";
    out += "  \"fallback_weights\": ";
    append_reals(out, lut.fallback_weights);
    out += ",\n  \"entries\": [";
    bool first = true;
    for (const auto& [key, entry] : lut.entries) {
        out += first ? "\n" : ",\n";
        first = false;
        out += "    {\"key\": ";
        append_ints(out, key.indices);
        out += ", \"weights\": ";
        append_reals(out, entry.weights);
        out += ", \"count\": " + std::to_string(entry.count);
        out += ", \"converged\": ";
        out += entry.converged ? "true" : "false";
        out += ", \"steps\": " + std::to_string(entry.steps);
        out += ", \"source\": \"";
        out += to_string(entry.source);
        out += "\"}";
    }
    out += lut.entries.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return out;
}

WeightLut from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ContractError(std::string("malformed LUT JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ContractError("malformed LUT JSON: top level must be an object");

    WeightLut lut;
    lut.version = get_as<int>(doc, "version");
    if (lut.version != WeightLut::kFormatVersion) {
        throw ContractError("LUT version mismatch: expected " + std::to_string(WeightLut::kFormatVersion) +
                            ", got " + std::to_string(lut.version));
    }
    lut.num_models = get_as<std::size_t>(doc, "num_models");
    lut.bin_width = get_as<int>(doc, "bin_width");
    lut.num_bins = get_as<int>(doc, "num_bins");
    lut.min_pixels = get_as<std::size_t>(doc, "min_pixels");
    const auto range = get_reals(doc, "value_range");
    if (range.size() != 2 || range[0] != 0.0 || range[1] != kMaxValue) {
        throw ContractError("LUT value_range must be [0, 255]");
    }
    lut.fallback_weights = get_reals(doc, "fallback_weights");
    if (lut.bin_width < 1) throw ContractError("LUT bin_width must be >= 1");

    const json& entries = field(doc, "entries");
    if (!entries.is_array()) throw ContractError("LUT JSON: 'entries' must be an array");
    for (const auto& e : entries) {
        if (!e.is_object()) throw ContractError("LUT JSON: entry must be an object");
        LutEntry entry;
        entry.key.indices = get_as<std::vector<int>>(e, "key");
        entry.weights = get_reals(e, "weights");
        entry.count = get_as<std::size_t>(e, "count");
        entry.converged = get_as<bool>(e, "converged");
        entry.steps = get_as<int>(e, "steps");
        entry.source = parse_entry_source(get_as<std::string>(e, "source"));
        if (!on_simplex(entry.weights)) throw ContractError("LUT entry weights: simplex violation");
        BinSetKey key = entry.key;
        if (!lut.entries.emplace(std::move(key), std::move(entry)).second) {
            throw ContractError("LUT JSON: duplicate entry key");
        }
    }
    lut.validate();
    return lut;
}

void serialize_lut(const WeightLut& lut, const std::filesystem::path& path) {
    lut.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string text = to_json(lut);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

WeightLut deserialize_lut(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open LUT " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

}  // namespace rangefuse
