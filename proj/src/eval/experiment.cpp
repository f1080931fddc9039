#include "rawmix/eval/experiment.hpp"

#include "rawmix/constancy.hpp"
#include "rawmix/descriptors/mlbp.hpp"
#include "rawmix/error.hpp"
#include "rawmix/eval/knn.hpp"
#include "rawmix/radiance.hpp"
#include "rawmix/tensor_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace rawmix {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    // splitmix64 finalizer over a combined word
    std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(name) + ": " + e.what());
    }
}

// Originals (optional) followed by one augmented copy per spec, all white
// balanced when enabled.
PatchSet expand(const PatchSet& src, const std::vector<AugmentSpec>& augs, bool include_original,
                bool wb, bool preserving, std::uint64_t seed)
{
    PatchSet out;
    out.role = src.role;
    out.illuminant = src.illuminant;
    out.patch_size = src.patch_size;
    auto push = [&](RawImage img, std::size_t i) {
        out.patches.push_back(wb ? white_balance(img) : std::move(img));
        out.labels.push_back(src.labels[i]);
        out.origins.push_back(src.origins[i]);
    };
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (include_original)
            push(src.patches[i], i);
        for (std::size_t a = 0; a < augs.size(); ++a) {
            AugmentSpec spec = augs[a];
            spec.seed = mix_seed(mix_seed(seed, spec.seed), i * 131 + a);
            if (!preserving)
                spec.preserving = false;
            push(apply_augment(spec, src.patches[i]).image, i);
        }
    }
    return out;
}

struct Scenes {
    MsfaPattern pattern;
    std::vector<SceneCube> cubes;
    std::vector<int> labels;
};

Scenes load_scenes(const ExperimentConfig& cfg)
{
    if (cfg.dataset.empty()) {
        MsfaPattern p = MsfaPattern::by_id(cfg.msfa);
        Scenes s{p, synth_textures(p, cfg.classes, cfg.resolved_scene_resolution(), cfg.scene_seed), {}};
        for (int c = 0; c < cfg.classes; ++c)
            s.labels.push_back(c);
        return s;
    }
    DatasetManifest m = DatasetManifest::load(cfg.dataset);
    Scenes s{MsfaPattern::by_id(m.msfa), {}, {}};
    for (const auto& sc : m.scenes) {
        PlaneCube cube = load_cube(sc.file);
        if (!(cube.pattern() == s.pattern))
            fail(ErrorKind::data, "scene '" + sc.file.string() + "' uses MSFA '" + cube.pattern().id() +
                                      "', manifest says '" + m.msfa + "'");
        s.cubes.emplace_back(std::move(cube));
        s.labels.push_back(sc.label);
    }
    return s;
}

PatchSet render_patches(const Scenes& scenes, const Illuminant& ill, int patch_size, Split split)
{
    PatchSet set;
    set.role = split == Split::top ? Role::train : Role::test;
    set.illuminant = ill.name();
    set.patch_size = patch_size;
    for (std::size_t i = 0; i < scenes.cubes.size(); ++i)
        set.append(extract_patches(render_raw(scenes.cubes[i], ill), patch_size, split, scenes.labels[i],
                                   ill.name()));
    return set;
}

std::vector<double> per_class_accuracy(const std::vector<std::vector<int>>& confusion)
{
    std::vector<double> out;
    for (std::size_t c = 0; c < confusion.size(); ++c) {
        int total = 0;
        for (int v : confusion[c])
            total += v;
        out.push_back(total ? 100.0 * confusion[c][c] / total : 0.0);
    }
    return out;
}

double trace_accuracy(const std::vector<std::vector<int>>& confusion)
{
    long diag = 0, total = 0;
    for (std::size_t i = 0; i < confusion.size(); ++i)
        for (std::size_t j = 0; j < confusion[i].size(); ++j) {
            total += confusion[i][j];
            if (i == j)
                diag += confusion[i][j];
        }
    return total ? 100.0 * static_cast<double>(diag) / static_cast<double>(total) : 0.0;
}

nlohmann::json history_json(const TrainResult& r)
{
    nlohmann::json h = nlohmann::json::array();
    for (const EpochStats& s : r.history)
        h.push_back({{"epoch", s.epoch},
                     {"train_loss", s.train_loss},
                     {"train_acc", s.train_acc},
                     {"val_loss", s.val_loss},
                     {"val_acc", s.val_acc}});
    return {{"history", h},
            {"best_epoch", r.best_epoch},
            {"best_val_acc", r.best_val_acc},
            {"train_count", r.train_count},
            {"val_count", r.val_count}};
}

} // namespace

std::vector<AugmentSpec> ExperimentConfig::default_train_augs(int n)
{
    const int a = std::max(1, static_cast<int>(std::floor(0.6 * n)));
    AugmentSpec h{.kind = AugmentKind::hflip};
    AugmentSpec v{.kind = AugmentKind::vflip};
    AugmentSpec t{.kind = AugmentKind::translate_y, .step = a};
    AugmentSpec r{.kind = AugmentKind::remodel, .fraction = 0.1, .seed = 1};
    return {h, v, t, r};
}

std::vector<AugmentSpec> ExperimentConfig::default_test_augs(int n)
{
    const int a = std::max(1, static_cast<int>(std::floor(0.6 * n)));
    AugmentSpec g{.kind = AugmentKind::gaussian_noise, .mu = 0.0, .sigma = 0.25, .seed = 2};
    AugmentSpec t{.kind = AugmentKind::translate_x, .step = a};
    AugmentSpec d{.kind = AugmentKind::optical_distortion, .k1 = 0.05};
    return {g, t, d};
}

void ExperimentConfig::validate() const
{
    const MsfaPattern p = MsfaPattern::by_id(msfa);
    if (patch_size <= 0 || patch_size % p.width() != 0)
        fail(ErrorKind::alignment, "patch size " + std::to_string(patch_size) +
                                       " is not a multiple of B = " + std::to_string(p.width()));
    if (classes < 2)
        fail(ErrorKind::config, "an experiment needs at least 2 classes");
    if (descriptor != "rawmixer" && descriptor != "mlbp")
        fail(ErrorKind::config, "unknown descriptor '" + descriptor + "' (expected rawmixer or mlbp)");
    if ((!wb_enabled || !preserving_aug) && !ablation)
        fail(ErrorKind::config, "wb_enabled = false and preserving_aug = false need ablation = true");
    if (illuminant_test.empty())
        fail(ErrorKind::config, "no test illuminants");
    Illuminant::by_name(illuminant_train);
    for (const auto& n : illuminant_test)
        Illuminant::by_name(n);
    if (extract_batch < 1)
        fail(ErrorKind::config, "extract_batch must be positive");
    const int res = resolved_scene_resolution();
    if (dataset.empty() && (res % p.width() != 0 || res / 2 < patch_size))
        fail(ErrorKind::config, "scene resolution " + std::to_string(res) +
                                    " cannot hold a patch of " + std::to_string(patch_size) +
                                    " in each half");
}

int ExperimentConfig::resolved_scene_resolution() const
{
    if (scene_resolution > 0)
        return scene_resolution;
    return 2 * patch_size;
}

nlohmann::json ExperimentConfig::to_json() const
{
    nlohmann::json tr = nlohmann::json::array(), te = nlohmann::json::array();
    for (const auto& a : train_augs)
        tr.push_back(a.to_json());
    for (const auto& a : test_augs)
        te.push_back(a.to_json());
    nlohmann::json m = model.to_json();
    for (const char* k : {"msfa", "band_grid", "wavelengths", "num_classes"})
        m.erase(k);
    nlohmann::json j = {{"name", name},
                        {"msfa", msfa},
                        {"patch_size", patch_size},
                        {"classes", classes},
                        {"scene_resolution", scene_resolution},
                        {"scene_seed", scene_seed},
                        {"seed", seed},
                        {"illuminant_train", illuminant_train},
                        {"illuminant_test", illuminant_test},
                        {"descriptor", descriptor},
                        {"wb_enabled", wb_enabled},
                        {"preserving_aug", preserving_aug},
                        {"ablation", ablation},
                        {"include_original", include_original},
                        {"train_augs", tr},
                        {"test_augs", te},
                        {"model", m},
                        {"training", training.to_json()},
                        {"extract_batch", extract_batch}};
    if (!dataset.empty())
        j["dataset"] = dataset.string();
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base)
{
    ExperimentConfig c;
    try {
        c.name = j.value("name", c.name);
        c.msfa = j.value("msfa", c.msfa);
        c.patch_size = j.value("patch_size", c.patch_size);
        c.classes = j.value("classes", c.classes);
        c.scene_resolution = j.value("scene_resolution", c.scene_resolution);
        c.scene_seed = j.value("scene_seed", c.scene_seed);
        c.seed = j.value("seed", c.seed);
        c.illuminant_train = j.value("illuminant_train", c.illuminant_train);
        if (j.contains("illuminant_test")) {
            const auto& t = j.at("illuminant_test");
            c.illuminant_test = t.is_string() ? std::vector<std::string>{t.get<std::string>()}
                                              : t.get<std::vector<std::string>>();
        }
        c.descriptor = j.value("descriptor", c.descriptor);
        c.wb_enabled = j.value("wb_enabled", c.wb_enabled);
        c.preserving_aug = j.value("preserving_aug", c.preserving_aug);
        c.ablation = j.value("ablation", c.ablation);
        c.include_original = j.value("include_original", c.include_original);
        c.extract_batch = j.value("extract_batch", c.extract_batch);
        if (j.contains("dataset")) {
            c.dataset = j.at("dataset").get<std::string>();
            if (c.dataset.is_relative() && !base.empty())
                c.dataset = base / c.dataset;
            c.msfa = DatasetManifest::load(c.dataset).msfa;
        }
        const MsfaPattern p = MsfaPattern::by_id(c.msfa);
        const int n = c.patch_size / p.width();
        if (j.contains("train_augs"))
            for (const auto& a : j.at("train_augs"))
                c.train_augs.push_back(AugmentSpec::from_json(a));
        else
            c.train_augs = default_train_augs(n);
        if (j.contains("test_augs"))
            for (const auto& a : j.at("test_augs"))
                c.test_augs.push_back(AugmentSpec::from_json(a));
        else
            c.test_augs = default_test_augs(n);
        nlohmann::json m = j.value("model", nlohmann::json::object());
        m.update(pattern_to_json(p));
        m["num_classes"] = c.classes;
        c.model = RawMixerConfig::from_json(m);
        c.training = TrainConfig::from_json(j.value("training", nlohmann::json::object()));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("bad experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

bool EvalReport::same_outcome(const EvalReport& other) const
{
    auto strip = [](EvalReport r) {
        r.train_seconds = r.gallery_extract_seconds = 0;
        for (auto& x : r.results)
            x.extract_seconds = 0;
        return r;
    };
    return strip(*this) == strip(other);
}

nlohmann::json EvalReport::to_json() const
{
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : results)
        res.push_back({{"illuminant", r.illuminant},
                       {"accuracy", r.accuracy},
                       {"per_class", r.per_class},
                       {"confusion", r.confusion},
                       {"test_patches", r.test_patches},
                       {"extract_seconds", r.extract_seconds}});
    return {{"name", name},
            {"descriptor", descriptor},
            {"msfa", msfa},
            {"patch_size", patch_size},
            {"classes", classes},
            {"accuracy", accuracy},
            {"per_class", per_class},
            {"confusion", confusion},
            {"results", res},
            {"train_patches", train_patches},
            {"feature_dim", feature_dim},
            {"train_seconds", train_seconds},
            {"gallery_extract_seconds", gallery_extract_seconds},
            {"training", training},
            {"config", config}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j)
{
    EvalReport r;
    try {
        r.name = j.at("name").get<std::string>();
        r.descriptor = j.at("descriptor").get<std::string>();
        r.msfa = j.at("msfa").get<std::string>();
        r.patch_size = j.at("patch_size").get<int>();
        r.classes = j.at("classes").get<int>();
        r.accuracy = j.at("accuracy").get<double>();
        r.per_class = j.at("per_class").get<std::vector<double>>();
        r.confusion = j.at("confusion").get<std::vector<std::vector<int>>>();
        for (const auto& x : j.at("results")) {
            IlluminantResult ir;
            ir.illuminant = x.at("illuminant").get<std::string>();
            ir.accuracy = x.at("accuracy").get<double>();
            ir.per_class = x.at("per_class").get<std::vector<double>>();
            ir.confusion = x.at("confusion").get<std::vector<std::vector<int>>>();
            ir.test_patches = x.at("test_patches").get<int>();
            ir.extract_seconds = x.at("extract_seconds").get<double>();
            r.results.push_back(std::move(ir));
        }
        r.train_patches = j.at("train_patches").get<int>();
        r.feature_dim = j.at("feature_dim").get<int>();
        r.train_seconds = j.at("train_seconds").get<double>();
        r.gallery_extract_seconds = j.at("gallery_extract_seconds").get<double>();
        r.training = j.at("training");
        r.config = j.at("config");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("bad report JSON: ") + e.what());
    }
    return r;
}

EvalReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress)
{
    cfg.validate();
    auto note = [&](const std::string& s) {
        if (progress)
            progress(s);
    };

    const Scenes scenes = stage("scenes", [&] { return load_scenes(cfg); });
    const int classes = *std::max_element(scenes.labels.begin(), scenes.labels.end()) + 1;

    PatchSet train_set = stage("train patches", [&] {
        PatchSet raw = render_patches(scenes, Illuminant::by_name(cfg.illuminant_train), cfg.patch_size,
                                      Split::top);
        return expand(raw, cfg.train_augs, cfg.include_original, cfg.wb_enabled, cfg.preserving_aug,
                      mix_seed(cfg.seed, 101));
    });
    note("train patches: " + std::to_string(train_set.size()));

    EvalReport report;
    report.name = cfg.name;
    report.descriptor = cfg.descriptor;
    report.msfa = scenes.pattern.id();
    report.patch_size = cfg.patch_size;
    report.classes = classes;
    report.train_patches = static_cast<int>(train_set.size());
    report.config = cfg.to_json();

    std::unique_ptr<Descriptor> desc;
    if (cfg.descriptor == "rawmixer") {
        RawMixerConfig mc = cfg.model;
        mc.pattern = scenes.pattern;
        mc.num_classes = classes;
        auto model = std::make_shared<RawMixer>(mc, mix_seed(cfg.seed, 202));
        TrainConfig tc = cfg.training;
        tc.seed = mix_seed(cfg.seed, 303);
        const auto t0 = Clock::now();
        TrainResult tr = stage("train", [&] {
            return train(*model, train_set, tc, [&](const EpochStats& s) {
                note("epoch " + std::to_string(s.epoch) + " loss " + std::to_string(s.train_loss) +
                     " acc " + std::to_string(s.train_acc) + " val " + std::to_string(s.val_acc));
            });
        });
        report.train_seconds = seconds_since(t0);
        report.training = history_json(tr);
        desc = std::make_unique<RawMixerDescriptor>(model);
    } else {
        desc = std::make_unique<MlbpDescriptor>(scenes.pattern);
    }
    report.feature_dim = desc->dim();

    auto t0 = Clock::now();
    const FeatureMatrix gallery = stage("extract", [&] { return desc->extract_batch(train_set.patches); });
    report.gallery_extract_seconds = seconds_since(t0);

    report.confusion.assign(classes, std::vector<int>(classes, 0));
    for (std::size_t ti = 0; ti < cfg.illuminant_test.size(); ++ti) {
        const std::string& name = cfg.illuminant_test[ti];
        PatchSet test_set = stage("test patches", [&] {
            PatchSet raw = render_patches(scenes, Illuminant::by_name(name), cfg.patch_size, Split::bottom);
            return expand(raw, cfg.test_augs, cfg.include_original, cfg.wb_enabled, true,
                          mix_seed(cfg.seed, 404 + ti));
        });
        t0 = Clock::now();
        const FeatureMatrix feats = stage("extract", [&] { return desc->extract_batch(test_set.patches); });
        IlluminantResult ir;
        ir.illuminant = name;
        ir.extract_seconds = seconds_since(t0);
        ir.test_patches = static_cast<int>(test_set.size());
        const std::vector<int> pred =
            stage("knn", [&] { return knn_classify(gallery, train_set.labels, feats); });
        ir.confusion.assign(classes, std::vector<int>(classes, 0));
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ++ir.confusion[test_set.labels[i]][pred[i]];
            ++report.confusion[test_set.labels[i]][pred[i]];
        }
        ir.accuracy = trace_accuracy(ir.confusion);
        ir.per_class = per_class_accuracy(ir.confusion);
        note("test " + name + ": " + std::to_string(ir.accuracy) + "%");
        report.results.push_back(std::move(ir));
    }
    report.accuracy = trace_accuracy(report.confusion);
    report.per_class = per_class_accuracy(report.confusion);
    return report;
}

double median(std::vector<double> values)
{
    if (values.empty())
        fail(ErrorKind::data, "median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

nlohmann::json BenchConfig::to_json() const
{
    return {{"experiment", base.to_json()},
            {"seeds", seeds},
            {"ablations", {{"wb", wb_ablation}, {"naive_aug", naive_ablation}, {"mlbp", mlbp_baseline}}},
            {"thresholds",
             {{"min_wb_gain", min_wb_gain},
              {"min_wb_accuracy", min_wb_accuracy},
              {"min_naive_drop", min_naive_drop},
              {"rawmixer_ge_mlbp", require_rawmixer_ge_mlbp}}}};
}

BenchConfig BenchConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base)
{
    BenchConfig c;
    try {
        c.base = ExperimentConfig::from_json(j.value("experiment", nlohmann::json::object()), base);
        c.seeds = j.value("seeds", c.seeds);
        const nlohmann::json ab = j.value("ablations", nlohmann::json::object());
        c.wb_ablation = ab.value("wb", c.wb_ablation);
        c.naive_ablation = ab.value("naive_aug", c.naive_ablation);
        c.mlbp_baseline = ab.value("mlbp", c.mlbp_baseline);
        const nlohmann::json th = j.value("thresholds", nlohmann::json::object());
        c.min_wb_gain = th.value("min_wb_gain", c.min_wb_gain);
        c.min_wb_accuracy = th.value("min_wb_accuracy", c.min_wb_accuracy);
        c.min_naive_drop = th.value("min_naive_drop", c.min_naive_drop);
        c.require_rawmixer_ge_mlbp = th.value("rawmixer_ge_mlbp", c.require_rawmixer_ge_mlbp);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("bad bench config: ") + e.what());
    }
    if (c.seeds.empty())
        fail(ErrorKind::config, "bench needs at least one seed");
    return c;
}

bool BenchResult::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const BenchCheck& c) { return c.passed; });
}

double BenchResult::median_accuracy(const std::string& variant) const
{
    std::vector<double> acc;
    for (const auto& r : runs)
        if (r.variant == variant)
            acc.push_back(r.report.accuracy);
    return median(acc);
}

nlohmann::json BenchResult::to_json() const
{
    nlohmann::json rs = nlohmann::json::array(), cs = nlohmann::json::array();
    for (const auto& r : runs)
        rs.push_back({{"variant", r.variant}, {"seed", r.seed}, {"accuracy", r.report.accuracy}});
    for (const auto& c : checks)
        cs.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
    return {{"runs", rs}, {"checks", cs}, {"passed", passed()}};
}

BenchResult run_bench(const BenchConfig& cfg, const ProgressFn& progress)
{
    BenchResult out;
    auto run = [&](const std::string& variant, ExperimentConfig ec, std::uint64_t seed) {
        ec.seed = seed;
        ec.name = cfg.base.name + "/" + variant + "/seed" + std::to_string(seed);
        if (progress)
            progress("running " + ec.name);
        out.runs.push_back({variant, seed, run_experiment(ec, progress)});
    };
    for (std::uint64_t s : cfg.seeds) {
        run("baseline", cfg.base, s);
        if (cfg.wb_ablation) {
            ExperimentConfig ec = cfg.base;
            ec.ablation = true;
            ec.wb_enabled = false;
            run("no_wb", ec, s);
        }
        if (cfg.naive_ablation) {
            ExperimentConfig ec = cfg.base;
            ec.ablation = true;
            ec.preserving_aug = false;
            run("naive_aug", ec, s);
        }
        if (cfg.mlbp_baseline && cfg.base.descriptor != "mlbp") {
            ExperimentConfig ec = cfg.base;
            ec.descriptor = "mlbp";
            run("mlbp", ec, s);
        }
    }

    const double base_acc = out.median_accuracy("baseline");
    out.checks.push_back({"baseline_accuracy", base_acc, cfg.min_wb_accuracy, base_acc >= cfg.min_wb_accuracy});
    if (cfg.wb_ablation) {
        const double gain = base_acc - out.median_accuracy("no_wb");
        out.checks.push_back({"wb_gain", gain, cfg.min_wb_gain, gain >= cfg.min_wb_gain});
    }
    if (cfg.naive_ablation) {
        const double drop = base_acc - out.median_accuracy("naive_aug");
        out.checks.push_back({"naive_drop", drop, cfg.min_naive_drop, drop >= cfg.min_naive_drop});
    }
    if (cfg.mlbp_baseline && cfg.require_rawmixer_ge_mlbp && cfg.base.descriptor != "mlbp") {
        const double margin = base_acc - out.median_accuracy("mlbp");
        out.checks.push_back({"rawmixer_minus_mlbp", margin, 0.0, margin >= 0.0});
    }
    return out;
}

} // namespace rawmix
