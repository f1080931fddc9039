// rawmix: one binary, one subcommand per pipeline stage.
//
// Exit codes: 0 ok, 1 usage or config error, 2 acceptance threshold not met,
// 3 I/O or data error.

#include "verify.hpp"

#include "rawmix/augment.hpp"
#include "rawmix/constancy.hpp"
#include "rawmix/descriptors/mlbp.hpp"
#include "rawmix/descriptors/rawmixer.hpp"
#include "rawmix/descriptors/train.hpp"
#include "rawmix/error.hpp"
#include "rawmix/eval/experiment.hpp"
#include "rawmix/eval/knn.hpp"
#include "rawmix/eval/report.hpp"
#include "rawmix/kernels/kernels.hpp"
#include "rawmix/radiance.hpp"
#include "rawmix/tensor_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rawmix;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAcceptance = 2;
constexpr int kExitData = 3;

struct Options {
    std::string msfa = "imec5x5";
    std::uint64_t seed = 0;
    std::string in, out, config;
    bool json_errors = false;
    bool quiet = false;
};

json read_json(const fs::path& path)
{
    std::ifstream f(path);
    if (!f)
        fail(ErrorKind::io, "cannot open '" + path.string() + "'");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text) || !f.flush())
        fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(ErrorKind::io, "cannot create directory '" + dir.string() + "': " + ec.message());
}

void require(const std::string& value, const char* flag)
{
    if (value.empty())
        fail(ErrorKind::usage, std::string("missing required option ") + flag);
}

// Patch listing written by `patches` and consumed by `train` / `extract`.
struct PatchEntry {
    std::string id;
    fs::path file;
    int label = 0;
    std::string illuminant;
    Role role = Role::train;
};

struct PatchListing {
    std::string msfa;
    int patch_size = 0;
    std::vector<PatchEntry> patches;

    static PatchListing load(const fs::path& path)
    {
        const json j = read_json(path);
        PatchListing l;
        try {
            l.msfa = j.at("msfa").get<std::string>();
            l.patch_size = j.at("patch_size").get<int>();
            for (const auto& p : j.at("patches")) {
                PatchEntry e;
                e.id = p.at("id").get<std::string>();
                e.file = p.at("file").get<std::string>();
                if (e.file.is_relative())
                    e.file = path.parent_path() / e.file;
                e.label = p.at("label").get<int>();
                e.illuminant = p.value("illuminant", "");
                e.role = role_from_string(p.value("role", "train"));
                l.patches.push_back(std::move(e));
            }
        } catch (const json::exception& e) {
            fail(ErrorKind::data, "bad patch listing '" + path.string() + "': " + e.what());
        }
        return l;
    }
};

std::vector<RawImage> load_patches(const PatchListing& l)
{
    std::vector<RawImage> out;
    for (const auto& e : l.patches)
        out.push_back(load_raw(e.file));
    return out;
}

void write_features_csv(const fs::path& path, const PatchListing& l, const FeatureMatrix& feats)
{
    std::ofstream f(path);
    if (!f)
        fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    const std::size_t dim = feats.empty() ? 0 : feats[0].size();
    f << "id,label,illuminant";
    for (std::size_t i = 0; i < dim; ++i)
        f << ",f" << i;
    f << '\n' << std::setprecision(17);
    for (std::size_t r = 0; r < feats.size(); ++r) {
        f << l.patches[r].id << ',' << l.patches[r].label << ',' << l.patches[r].illuminant;
        for (double v : feats[r])
            f << ',' << v;
        f << '\n';
    }
    if (!f.flush())
        fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::string> illuminants;
    FeatureMatrix features;
};

FeatureTable read_features_csv(const fs::path& path)
{
    std::ifstream f(path);
    if (!f)
        fail(ErrorKind::io, "cannot open '" + path.string() + "'");
    FeatureTable t;
    std::string line;
    std::getline(f, line); // header
    int row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() < 4)
            fail(ErrorKind::data, path.string() + ":" + std::to_string(row) + ": too few columns");
        try {
            t.ids.push_back(cells[0]);
            t.labels.push_back(std::stoi(cells[1]));
            t.illuminants.push_back(cells[2]);
            std::vector<double> v;
            for (std::size_t i = 3; i < cells.size(); ++i)
                v.push_back(std::stod(cells[i]));
            t.features.push_back(std::move(v));
        } catch (const std::logic_error&) {
            fail(ErrorKind::data, path.string() + ":" + std::to_string(row) + ": not a number");
        }
    }
    return t;
}

// Every regular file with the given extension, sorted by name.
std::vector<fs::path> files_in(const fs::path& dir, const std::string& ext)
{
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext)
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_mosaic(const Options& o, const std::string& pgm)
{
    require(o.in, "--in");
    require(o.out, "--out");
    RawImage raw = mosaic(load_cube(o.in));
    save_raw(raw, o.out);
    if (!pgm.empty())
        save_pgm16(raw, pgm);
    return kExitOk;
}

int cmd_unshuffle(const Options& o)
{
    require(o.in, "--in");
    require(o.out, "--out");
    save_cube(pixel_unshuffle(load_raw(o.in)), o.out);
    return kExitOk;
}

int cmd_shuffle(const Options& o)
{
    require(o.in, "--in");
    require(o.out, "--out");
    save_raw(pixel_shuffle(load_cube(o.in)), o.out);
    return kExitOk;
}

int cmd_wb(const Options& o, const std::string& dump)
{
    require(o.in, "--in");
    require(o.out, "--out");
    IlluminationEstimate est;
    RawImage img = load_raw(o.in);
    save_raw(white_balance(img, est), o.out);
    if (!dump.empty()) {
        json j = {{"msfa", img.pattern().id()}, {"per_band", est.per_band}};
        write_text(dump, j.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_augment(const Options& o, const std::string& spec_path, bool seed_set, const std::string& prov_path)
{
    require(o.in, "--in");
    require(o.out, "--out");
    require(spec_path, "--spec");
    AugmentSpec spec = AugmentSpec::from_json(read_json(spec_path));
    if (seed_set)
        spec.seed = o.seed;

    auto one = [&](const fs::path& in, const fs::path& out) {
        Augmented a = apply_augment(spec, load_raw(in));
        save_raw(a.image, out);
        return a;
    };
    if (fs::is_directory(o.in)) {
        ensure_dir(o.out);
        for (const auto& f : files_in(o.in, ".bin"))
            one(f, fs::path(o.out) / f.filename());
        return kExitOk;
    }
    Augmented a = one(o.in, o.out);
    if (!prov_path.empty()) {
        json j = {{"source_width", a.provenance.source_width},
                  {"source_height", a.provenance.source_height},
                  {"source", a.provenance.source},
                  {"pattern_preserved", verify_pattern(a.image, a.provenance)}};
        write_text(prov_path, j.dump() + "\n");
    }
    return kExitOk;
}

int cmd_synth(const Options& o, int classes, int resolution, int patch_size, const std::string& train_ill,
              const std::vector<std::string>& test_ill)
{
    require(o.out, "--out");
    const MsfaPattern p = MsfaPattern::by_id(o.msfa);
    ensure_dir(o.out);
    const auto scenes = synth_textures(p, classes, resolution, o.seed);
    json manifest = {{"msfa", p.id()}, {"patch_size", patch_size}, {"scenes", json::array()}};
    for (std::size_t c = 0; c < scenes.size(); ++c) {
        std::ostringstream name;
        name << "scene_" << std::setw(3) << std::setfill('0') << c << ".bin";
        save_cube(scenes[c].reflectance(), fs::path(o.out) / name.str());
        manifest["scenes"].push_back({{"file", name.str()}, {"label", c}});
    }
    json renders = json::array({{{"illuminant", train_ill}, {"split", "top"}, {"role", "train"}}});
    for (const auto& t : test_ill)
        renders.push_back({{"illuminant", t}, {"split", "bottom"}, {"role", "test"}});
    manifest["renders"] = renders;
    write_text(fs::path(o.out) / "dataset.json", manifest.dump(2) + "\n");
    return kExitOk;
}

int cmd_render(const Options& o, const std::string& illuminant)
{
    require(o.in, "--in");
    require(o.out, "--out");
    SceneCube scene(load_cube(o.in));
    save_raw(render_raw(scene, Illuminant::by_name(illuminant)), o.out);
    return kExitOk;
}

int cmd_patches(const Options& o, bool wb)
{
    require(o.in, "--in");
    require(o.out, "--out");
    const DatasetManifest m = DatasetManifest::load(o.in);
    const MsfaPattern p = MsfaPattern::by_id(m.msfa);
    ensure_dir(o.out);
    json listing = {{"msfa", p.id()}, {"patch_size", m.patch_size}, {"patches", json::array()}};
    for (std::size_t s = 0; s < m.scenes.size(); ++s) {
        SceneCube scene(load_cube(m.scenes[s].file));
        for (const auto& r : m.renders) {
            const Illuminant ill = Illuminant::by_name(r.illuminant);
            PatchSet set = extract_patches(render_raw(scene, ill), m.patch_size, r.split, m.scenes[s].label,
                                           ill.name());
            for (std::size_t k = 0; k < set.size(); ++k) {
                std::ostringstream id;
                id << 's' << s << '_' << ill.name() << '_' << (r.split == Split::top ? "top" : "bottom")
                   << '_' << k;
                const std::string file = id.str() + ".bin";
                save_raw(wb ? white_balance(set.patches[k]) : set.patches[k], fs::path(o.out) / file);
                listing["patches"].push_back({{"id", id.str()},
                                              {"file", file},
                                              {"label", set.labels[k]},
                                              {"illuminant", ill.name()},
                                              {"role", std::string(to_string(r.role))},
                                              {"origin", {set.origins[k].first, set.origins[k].second}}});
            }
        }
    }
    write_text(fs::path(o.out) / "patches.json", listing.dump(2) + "\n");
    return kExitOk;
}

int cmd_train(const Options& o, int epochs, int batch, double lr)
{
    require(o.in, "--in");
    require(o.out, "--out");
    const PatchListing l = PatchListing::load(o.in);
    json cfg = o.config.empty() ? json::object() : read_json(o.config);

    PatchSet set;
    set.patch_size = l.patch_size;
    int classes = 0;
    for (const auto& e : l.patches)
        if (e.role != Role::test) {
            set.patches.push_back(load_raw(e.file));
            set.labels.push_back(e.label);
            set.origins.emplace_back(0, 0);
            classes = std::max(classes, e.label + 1);
        }
    if (set.size() == 0)
        fail(ErrorKind::data, "no train patches in '" + o.in + "'");

    json mj = cfg.value("model", json::object());
    mj.update(pattern_to_json(MsfaPattern::by_id(l.msfa)));
    mj["num_classes"] = classes;
    RawMixerConfig mc = RawMixerConfig::from_json(mj);
    TrainConfig tc = TrainConfig::from_json(cfg.value("training", json::object()));
    tc.seed = o.seed;
    if (epochs >= 0)
        tc.epochs = epochs;
    if (batch > 0)
        tc.batch_size = batch;
    if (lr >= 0)
        tc.lr = lr;

    RawMixer model(mc, o.seed);
    if (!o.quiet)
        std::cerr << "RawMixer: " << model.parameter_count() << " parameters, " << set.size()
                  << " patches\n";
    TrainResult r = train(model, set, tc, [&](const EpochStats& s) {
        if (!o.quiet)
            std::cerr << "epoch " << s.epoch << " train_loss " << s.train_loss << " train_acc "
                      << s.train_acc << " val_loss " << s.val_loss << " val_acc " << s.val_acc << '\n';
    });
    model.save(o.out);
    json hist = json::array();
    for (const auto& s : r.history)
        hist.push_back({{"epoch", s.epoch},
                        {"train_loss", s.train_loss},
                        {"train_acc", s.train_acc},
                        {"val_loss", s.val_loss},
                        {"val_acc", s.val_acc}});
    write_text(o.out + ".history.json",
               json{{"best_epoch", r.best_epoch}, {"best_val_acc", r.best_val_acc}, {"history", hist}}.dump(2) +
                   "\n");
    return kExitOk;
}

int cmd_extract(const Options& o, const std::string& model_path, const std::string& descriptor)
{
    require(o.in, "--in");
    require(o.out, "--out");
    const PatchListing l = PatchListing::load(o.in);
    const std::vector<RawImage> imgs = load_patches(l);
    FeatureMatrix feats;
    if (descriptor == "mlbp") {
        feats = MlbpDescriptor(MsfaPattern::by_id(l.msfa)).extract_batch(imgs);
    } else if (descriptor == "rawmixer") {
        require(model_path, "--model");
        RawMixerDescriptor d(std::make_shared<RawMixer>(RawMixer::load(model_path)));
        feats = d.extract_batch(imgs);
    } else {
        fail(ErrorKind::usage, "unknown descriptor '" + descriptor + "'");
    }
    write_features_csv(o.out, l, feats);
    return kExitOk;
}

int cmd_knn(const std::string& train_csv, const std::string& test_csv, const std::string& out)
{
    require(train_csv, "--train");
    require(test_csv, "--test");
    const FeatureTable tr = read_features_csv(train_csv);
    const FeatureTable te = read_features_csv(test_csv);
    const std::vector<int> pred = knn_classify(tr.features, tr.labels, te.features);
    int correct = 0;
    std::ostringstream os;
    os << "id,label,predicted\n";
    for (std::size_t i = 0; i < pred.size(); ++i) {
        correct += pred[i] == te.labels[i];
        os << te.ids[i] << ',' << te.labels[i] << ',' << pred[i] << '\n';
    }
    if (!out.empty())
        write_text(out, os.str());
    const double acc = pred.empty() ? 0.0 : 100.0 * correct / pred.size();
    std::cout << json{{"test", pred.size()}, {"correct", correct}, {"accuracy", acc}}.dump() << '\n';
    return kExitOk;
}

void write_reports(const std::vector<EvalReport>& reports, const fs::path& dir)
{
    ensure_dir(dir);
    emit_report(reports, ReportFormat::json, dir / "report.json");
    emit_report(reports, ReportFormat::csv, dir / "report.csv");
    emit_report(reports, ReportFormat::svg, dir / "report.svg");
}

int cmd_bench(const Options& o)
{
    require(o.config, "--config");
    const fs::path out = o.out.empty() ? fs::path("report") : fs::path(o.out);
    const json j = read_json(o.config);
    const fs::path base = fs::path(o.config).parent_path();
    auto progress = [&](const std::string& s) {
        if (!o.quiet)
            std::cerr << s << '\n';
    };

    if (j.contains("experiment")) {
        const BenchConfig bc = BenchConfig::from_json(j, base);
        const BenchResult r = run_bench(bc, progress);
        std::vector<EvalReport> reports;
        for (const auto& run : r.runs)
            reports.push_back(run.report);
        write_reports(reports, out);
        write_text(out / "bench.json", r.to_json().dump(2) + "\n");
        for (const auto& c : r.checks)
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " = " << c.value << " (threshold "
                      << c.threshold << ")\n";
        return r.passed() ? kExitOk : kExitAcceptance;
    }

    const ExperimentConfig ec = ExperimentConfig::from_json(j, base);
    const EvalReport rep = run_experiment(ec, progress);
    write_reports({rep}, out);
    std::cout << "accuracy " << rep.accuracy << "%\n";
    if (j.contains("min_accuracy") && rep.accuracy < j.at("min_accuracy").get<double>())
        return kExitAcceptance;
    return kExitOk;
}

int cmd_verify(const Options& o, int cases)
{
    const MsfaPattern p = MsfaPattern::by_id(o.msfa);
    bool ok = true;
    for (const auto& r : cli::verify_pattern_properties(p, cases, o.seed)) {
        ok = ok && r.passed;
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty())
            std::cout << " (" << r.detail << ")";
        std::cout << '\n';
    }
    return ok ? kExitOk : kExitAcceptance;
}

int exit_code_for(ErrorKind k)
{
    switch (k) {
    case ErrorKind::usage:
    case ErrorKind::config:
        return kExitUsage;
    default:
        return kExitData;
    }
}

void report_error(const Options& o, std::string_view kind, const std::string& message)
{
    if (o.json_errors)
        std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    else
        std::cerr << "rawmix: " << kind << " error: " << message << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Raw MSFA image toolkit: simulation, white balance, augmentation, RawMixer features "
                 "and 1-NN evaluation"};
    app.require_subcommand(1);
    Options o;
    app.add_flag("--json", o.json_errors, "Print errors as single-line JSON on stderr");
    app.add_flag("-q,--quiet", o.quiet, "Suppress progress output");
    app.add_option("--kernels", "Force kernel variant: scalar or avx2")
        ->check(CLI::IsMember({"scalar", "avx2"}))
        ->each([](const std::string& v) {
            kernels::select(v == "avx2" ? kernels::Isa::avx2 : kernels::Isa::scalar);
        });

    auto common = [&](CLI::App* sub, bool msfa = false, bool seed = false, bool config = false) {
        sub->add_option("--in", o.in, "Input path");
        sub->add_option("--out", o.out, "Output path");
        if (msfa)
            sub->add_option("--msfa", o.msfa, "MSFA: imec2x2, imec4x4 or imec5x5")
                ->check(CLI::IsMember(MsfaPattern::builtin_ids()));
        if (seed)
            sub->add_option("--seed", o.seed, "Seed for every stochastic step");
        if (config)
            sub->add_option("--config", o.config, "JSON config file");
    };

    std::string pgm;
    auto* mosaic_cmd = app.add_subcommand("mosaic", "Sample a fully-defined scene cube through its MSFA");
    common(mosaic_cmd);
    mosaic_cmd->add_option("--pgm", pgm, "Also write a 16-bit PGM preview");

    auto* unshuffle_cmd = app.add_subcommand("unshuffle", "Raw mosaic -> B^2-channel plane cube");
    common(unshuffle_cmd);
    auto* shuffle_cmd = app.add_subcommand("shuffle", "Plane cube -> raw mosaic");
    common(shuffle_cmd);

    std::string dump;
    auto* wb_cmd = app.add_subcommand("wb", "Max-Raw white balance");
    common(wb_cmd);
    wb_cmd->add_option("--dump-estimate", dump, "Write the per-band illumination estimate as JSON");

    std::string spec, prov;
    auto* aug_cmd = app.add_subcommand("augment", "Apply one augmentation to a raw file or directory");
    common(aug_cmd, false, true);
    aug_cmd->add_option("--spec", spec, "Augmentation spec JSON {kind, params, seed, preserving}");
    aug_cmd->add_option("--provenance", prov, "Write source indices and the pattern check (file mode)");

    int classes = 8, resolution = 130, patch_size = 65;
    std::string train_ill = "daylight";
    std::vector<std::string> test_ill{"warm"};
    auto* synth_cmd = app.add_subcommand("synth", "Generate procedural texture scenes and a dataset manifest");
    common(synth_cmd, true, true);
    synth_cmd->add_option("--classes", classes, "Number of classes")->capture_default_str();
    synth_cmd->add_option("--resolution", resolution, "Scene side in pixels")->capture_default_str();
    synth_cmd->add_option("--patch-size", patch_size, "Patch size recorded in the manifest")
        ->capture_default_str();
    synth_cmd->add_option("--train-illuminant", train_ill)->capture_default_str();
    synth_cmd->add_option("--test-illuminant", test_ill)->capture_default_str();

    std::string illuminant = "flat-white";
    auto* render_cmd = app.add_subcommand("render", "Render a scene cube to a raw image under an illuminant");
    common(render_cmd);
    render_cmd->add_option("--illuminant", illuminant, "flat-white, warm or daylight")->capture_default_str();

    bool patches_wb = false;
    auto* patches_cmd = app.add_subcommand("patches", "Render a dataset manifest and cut aligned patches");
    common(patches_cmd);
    patches_cmd->add_flag("--wb", patches_wb, "White balance every patch");

    int epochs = -1, batch = 0;
    double lr = -1;
    auto* train_cmd = app.add_subcommand("train", "Train RawMixer on the train patches of a patch listing");
    common(train_cmd, false, true, true);
    train_cmd->add_option("--epochs", epochs, "Override training.epochs");
    train_cmd->add_option("--batch-size", batch, "Override training.batch_size");
    train_cmd->add_option("--lr", lr, "Override training.lr");

    std::string model_path, descriptor = "rawmixer";
    auto* extract_cmd = app.add_subcommand("extract", "Write descriptor features of a patch listing as CSV");
    common(extract_cmd);
    extract_cmd->add_option("--model", model_path, "RawMixer checkpoint");
    extract_cmd->add_option("--descriptor", descriptor, "rawmixer or mlbp")->capture_default_str();

    std::string train_csv, test_csv, pred_out;
    auto* knn_cmd = app.add_subcommand("knn", "1-NN classification of feature CSVs");
    knn_cmd->add_option("--train", train_csv, "Gallery features CSV");
    knn_cmd->add_option("--test", test_csv, "Query features CSV");
    knn_cmd->add_option("--out", pred_out, "Predictions CSV");

    auto* bench_cmd = app.add_subcommand("bench", "Run an experiment or an ablation bench and write reports");
    common(bench_cmd, false, false, true);

    int cases = 20;
    auto* verify_cmd = app.add_subcommand("verify", "Randomized property checks for one MSFA");
    common(verify_cmd, true, true);
    verify_cmd->add_option("--cases", cases, "Random cases per property")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error(o, "usage", e.what());
        if (!o.json_errors)
            std::cerr << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        report_error(o, to_string(e.kind()), e.what());
        return exit_code_for(e.kind());
    }

    try {
        if (*mosaic_cmd)
            return cmd_mosaic(o, pgm);
        if (*unshuffle_cmd)
            return cmd_unshuffle(o);
        if (*shuffle_cmd)
            return cmd_shuffle(o);
        if (*wb_cmd)
            return cmd_wb(o, dump);
        if (*aug_cmd)
            return cmd_augment(o, spec, aug_cmd->count("--seed") > 0, prov);
        if (*synth_cmd)
            return cmd_synth(o, classes, resolution, patch_size, train_ill, test_ill);
        if (*render_cmd)
            return cmd_render(o, illuminant);
        if (*patches_cmd)
            return cmd_patches(o, patches_wb);
        if (*train_cmd)
            return cmd_train(o, epochs, batch, lr);
        if (*extract_cmd)
            return cmd_extract(o, model_path, descriptor);
        if (*knn_cmd)
            return cmd_knn(train_csv, test_csv, pred_out);
        if (*bench_cmd)
            return cmd_bench(o);
        if (*verify_cmd)
            return cmd_verify(o, cases);
    } catch (const Error& e) {
        report_error(o, to_string(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        report_error(o, "io", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        report_error(o, "internal", e.what());
        return kExitData;
    }
    return kExitUsage;
}
