#include "rangefuse/synth.hpp"

#include "rangefuse/errors.hpp"
#include "rangefuse/lut.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace rangefuse {

namespace {

using nlohmann::json;

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::string image_name(std::size_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu.png", n);
    return buf;
}

double gt_sample(const SynthSpec& spec, Xoshiro256& rng, std::size_t h, std::size_t w, std::size_t c,
                 const double* phase) {
    if (spec.gt_pattern == GtPattern::uniform) {
        return std::floor(rng.uniform() * 256.0);
    }
    const double fx = 2.0 * std::numbers::pi * static_cast<double>(w) / static_cast<double>(spec.width);
    const double fy = 2.0 * std::numbers::pi * static_cast<double>(h) / static_cast<double>(spec.height);
    const double v = 127.5 + 100.0 * std::sin(fx + phase[c]) * std::cos(0.5 * fy + phase[c + 3]) +
                     20.0 * std::sin(3.0 * fx + 2.0 * fy + phase[c + 6]);
    return static_cast<double>(quantize(v));
}

SynthSplit gen_split(const SynthSpec& spec, std::size_t count, std::uint64_t split_id) {
    SynthSplit split;
    split.gt.reserve(count);
    split.preds.assign(spec.num_models, {});
    for (std::size_t n = 0; n < count; ++n) {
        Xoshiro256 rng = Xoshiro256::stream(spec.seed, (split_id << 32) | n);
        double phase[9];
        for (double& p : phase) p = 2.0 * std::numbers::pi * rng.uniform();

        ImageTensor gt(spec.height, spec.width);
        for (std::size_t h = 0; h < spec.height; ++h)
            for (std::size_t w = 0; w < spec.width; ++w)
                for (std::size_t c = 0; c < kChannels; ++c) gt.at(h, w, c) = gt_sample(spec, rng, h, w, c, phase);

        std::vector<ImageTensor> preds(spec.num_models, ImageTensor(spec.height, spec.width));
        for (std::size_t i = 0; i < gt.size(); ++i) {
            const RangeProfile& profile = spec.profile_for(gt.data[i]);
            for (std::size_t m = 0; m < spec.num_models; ++m) {
                const ModelError& err = profile.errors[m];
                const double noise = err.stddev > 0.0 ? err.stddev * rng.normal() : 0.0;
                preds[m].data[i] = quantize(gt.data[i] + err.bias + noise);
            }
        }
        split.gt.push_back(std::move(gt));
        for (std::size_t m = 0; m < spec.num_models; ++m) split.preds[m].push_back(std::move(preds[m]));
    }
    return split;
}

double number(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end() || !it->is_number()) {
        throw ContractError(std::string("synth spec: missing numeric field '") + name + "'");
    }
    return it->get<double>();
}

template <class T>
T integer(const json& obj, const char* name, T fallback) {
    auto it = obj.find(name);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer()) throw ContractError(std::string("synth spec: '") + name + "' must be an integer");
    return it->get<T>();
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Xoshiro256::Xoshiro256(std::uint64_t seed) {
    std::uint64_t state = seed;
    for (auto& s : s_) s = splitmix64(state);
}

Xoshiro256 Xoshiro256::stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Xoshiro256(seed ^ (stream_id * 0x9E3779B97F4A7C15ull));
}

std::uint64_t Xoshiro256::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Xoshiro256::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

void SynthSpec::validate() const {
    if (height == 0 || width == 0) throw ContractError("synth spec: image size must be positive");
    if (num_models == 0) throw ContractError("synth spec: num_models must be >= 1");
    if (range_profiles.empty()) throw ContractError("synth spec: at least one range profile is required");
    double expected_lo = 0.0;
    for (const auto& p : range_profiles) {
        if (p.lo != expected_lo || !(p.hi > p.lo)) {
            throw ContractError("synth spec: range profiles must tile [0, 255] without gaps");
        }
        if (p.errors.size() != num_models) throw ContractError("synth spec: profile error arity differs from num_models");
        for (const auto& e : p.errors) {
            if (!std::isfinite(e.bias) || !(e.stddev >= 0.0)) throw ContractError("synth spec: invalid model error");
        }
        if (p.true_weights.size() != num_models || !on_simplex(p.true_weights, 1e-9)) {
            throw ContractError("synth spec: true weights must lie on the simplex");
        }
        expected_lo = p.hi;
    }
    if (expected_lo < kMaxValue) throw ContractError("synth spec: range profiles stop before 255");
}

const RangeProfile& SynthSpec::profile_for(double gt_value) const {
    for (const auto& p : range_profiles) {
        if (gt_value < p.hi) return p;
    }
    return range_profiles.back();
}

std::string SynthSpec::to_json() const {
    json doc;
    doc["seed"] = seed;
    doc["height"] = height;
    doc["width"] = width;
    doc["num_ref"] = num_ref;
    doc["num_test"] = num_test;
    doc["num_models"] = num_models;
    doc["gt_pattern"] = gt_pattern == GtPattern::uniform ? "uniform" : "gradient";
    json profiles = json::array();
    for (const auto& p : range_profiles) {
        json jp;
        jp["lo"] = p.lo;
        jp["hi"] = p.hi;
        json bias = json::array(), stddev = json::array();
        for (const auto& e : p.errors) {
            bias.push_back(e.bias);
            stddev.push_back(e.stddev);
        }
        jp["bias"] = bias;
        jp["std"] = stddev;
        jp["weights"] = p.true_weights;
        profiles.push_back(jp);
    }
    doc["range_profiles"] = profiles;
    return doc.dump(2) + "\n";
}

SynthSpec SynthSpec::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ContractError(std::string("malformed synth spec: ") + e.what());
    }
    if (!doc.is_object()) throw ContractError("malformed synth spec: top level must be an object");
    SynthSpec spec;
    spec.seed = integer<std::uint64_t>(doc, "seed", spec.seed);
    spec.height = integer<std::size_t>(doc, "height", spec.height);
    spec.width = integer<std::size_t>(doc, "width", spec.width);
    spec.num_ref = integer<std::size_t>(doc, "num_ref", spec.num_ref);
    spec.num_test = integer<std::size_t>(doc, "num_test", spec.num_test);
    spec.num_models = integer<std::size_t>(doc, "num_models", spec.num_models);
    const std::string pattern = doc.value("gt_pattern", std::string("uniform"));
    if (pattern == "uniform") spec.gt_pattern = GtPattern::uniform;
    else if (pattern == "gradient") spec.gt_pattern = GtPattern::gradient;
    else throw ContractError("synth spec: unknown gt_pattern '" + pattern + "'");

    auto it = doc.find("range_profiles");
    if (it == doc.end() || !it->is_array()) throw ContractError("synth spec: 'range_profiles' array is required");
    for (const auto& jp : *it) {
        RangeProfile p;
        p.lo = number(jp, "lo");
        p.hi = number(jp, "hi");
        const auto bias = jp.value("bias", std::vector<double>{});
        const auto stddev = jp.value("std", std::vector<double>{});
        if (bias.size() != stddev.size()) throw ContractError("synth spec: 'bias' and 'std' lengths differ");
        for (std::size_t m = 0; m < bias.size(); ++m) p.errors.push_back({bias[m], stddev[m]});
        p.true_weights = jp.value("weights", std::vector<double>{});
        spec.range_profiles.push_back(std::move(p));
    }
    spec.validate();
    return spec;
}

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open synth spec " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

SynthSpec range_biased_spec(std::uint64_t seed, std::size_t size, std::size_t num_ref, std::size_t num_test) {
    SynthSpec spec;
    spec.seed = seed;
    spec.height = size;
    spec.width = size;
    spec.num_ref = num_ref;
    spec.num_test = num_test;
    spec.num_models = 2;
    // Model 0 is accurate on the two darker quarters, model 1 on the two
    // brighter ones; the off-model bias grows away from mid-gray.
    spec.range_profiles = {
        {0.0, 64.0, {{0.0, 2.0}, {14.0, 2.0}}, {1.0, 0.0}},
        {64.0, 128.0, {{0.0, 2.0}, {6.0, 2.0}}, {1.0, 0.0}},
        {128.0, 192.0, {{-6.0, 2.0}, {0.0, 2.0}}, {0.0, 1.0}},
        {192.0, 256.0, {{-14.0, 2.0}, {0.0, 2.0}}, {0.0, 1.0}},
    };
    spec.validate();
    return spec;
}

std::vector<ImageTensor> SynthSplit::predictions_for(std::size_t image) const {
    std::vector<ImageTensor> out;
    for (const auto& model : preds) out.push_back(model.at(image));
    return out;
}

SynthData gen_set(const SynthSpec& spec) {
    spec.validate();
    return {gen_split(spec, spec.num_ref, 0), gen_split(spec, spec.num_test, 1)};
}

void write_synth(const SynthSpec& spec, const SynthData& data, const std::filesystem::path& root) {
    std::error_code ec;
    const auto write_split = [&](const SynthSplit& split, const std::filesystem::path& dir) {
        std::filesystem::create_directories(dir / "gt", ec);
        if (ec) throw IoError("cannot create " + (dir / "gt").string() + ": " + ec.message());
        for (std::size_t n = 0; n < split.gt.size(); ++n) save_image(split.gt[n], dir / "gt" / image_name(n));
        for (std::size_t m = 0; m < split.preds.size(); ++m) {
            const auto model_dir = dir / ("model_" + std::to_string(m));
            std::filesystem::create_directories(model_dir, ec);
            if (ec) throw IoError("cannot create " + model_dir.string() + ": " + ec.message());
            for (std::size_t n = 0; n < split.preds[m].size(); ++n) {
                save_image(split.preds[m][n], model_dir / image_name(n));
            }
        }
    };
    write_split(data.ref, root / "ref");
    write_split(data.test, root / "test");
    std::ofstream out(root / "spec.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (root / "spec.json").string());
    out << spec.to_json();
}

OracleResult grid_search_oracle(const BinGroup& group, const std::vector<double>& variances,
                                double resolution) {
    const std::size_t m_count = group.num_models();
    if (m_count == 0 || m_count > 3) throw ContractError("grid search oracle supports 1 to 3 models");
    if (!(resolution > 0.0 && resolution <= 0.5)) throw ContractError("grid resolution must be in (0, 0.5]");
    if (variances.size() != m_count) throw ContractError("oracle needs one variance per model");
    const std::size_t n = group.count();
    if (n == 0) throw ContractError("oracle needs a non-empty group");

    std::vector<double> means(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        long double s = 0.0L;
        for (double v : group.pred_values[m]) s += v;
        means[m] = static_cast<double>(s / static_cast<long double>(n));
    }

    // Per pixel: shift = max_m log N(y; mu_m, var_m); scaled[m] = exp(log N - shift).
    std::vector<double> shift(n);
    std::vector<double> scaled(n * m_count);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = group.gt_values[i];
        double logd[3];
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < m_count; ++m) {
            const double d = y - means[m];
            logd[m] = -0.5 * std::log(2.0 * std::numbers::pi * variances[m]) - d * d / (2.0 * variances[m]);
            top = std::max(top, logd[m]);
        }
        shift[i] = top;
        for (std::size_t m = 0; m < m_count; ++m) scaled[i * m_count + m] = std::exp(logd[m] - top);
    }
    double base = 0.0;
    for (double s : shift) base += s;

    const auto steps = static_cast<long>(std::llround(1.0 / resolution));
    const double step = 1.0 / static_cast<double>(steps);
    auto evaluate = [&](const double* w) {
        double total = base;
        for (std::size_t i = 0; i < n; ++i) {
            double mix = 0.0;
            for (std::size_t m = 0; m < m_count; ++m) mix += w[m] * scaled[i * m_count + m];
            total += std::log(mix);
        }
        return total;
    };

    OracleResult best{std::vector<double>(m_count), -std::numeric_limits<double>::infinity()};
    bool found = false;
    auto consider = [&](const double* w) {
        const double ll = evaluate(w);
        if (!found || ll > best.loglik) {
            best.weights.assign(w, w + m_count);
            best.loglik = ll;
            found = true;
        }
    };

    if (m_count == 1) {
        const double w[1] = {1.0};
        consider(w);
    } else if (m_count == 2) {
        for (long a = 0; a <= steps; ++a) {
            const double w[2] = {a * step, (steps - a) * step};
            consider(w);
        }
    } else {
        for (long a = 0; a <= steps; ++a) {
            for (long b = 0; a + b <= steps; ++b) {
                const double w[3] = {a * step, b * step, (steps - a - b) * step};
                consider(w);
            }
        }
    }
    return best;
}

}  // namespace rangefuse
