// gazelab: warp-based gaze redirection and few-shot estimator adaptation.
//
// Subcommands cover the full pipeline: synthetic data generation, redirector
// pre-training, estimator training, self-supervised domain adaptation,
// single-image redirection, person-specific fine-tuning and the adaptation
// benchmark. Every run leaves a resolved_config.json next to its outputs and
// reruns with the same resolved config are byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gazelab/benchmark.hpp"
#include "gazelab/domain_adapt.hpp"
#include "gazelab/errors.hpp"
#include "gazelab/pgm.hpp"
#include "gazelab/serialize.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gazelab;

namespace {

constexpr const char* kVersion = "gazelab 1.0.0";

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void write_resolved_config(const fs::path& dir, const std::string& subcommand, json flags) {
    fs::create_directories(dir);
    flags["tool"] = kVersion;
    flags["subcommand"] = subcommand;
    std::ofstream os(dir / "resolved_config.json", std::ios::binary);
    if (!os) throw DataError((dir / "resolved_config.json").string() + ": cannot open for writing");
    os << flags.dump(1) << "\n";
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path.string() + ": cannot open for writing");
    os << text;
}

Redirector load_redirector(const std::string& path) {
    Redirector r = init_redirector(RedirectorConfig{}, 0);
    load_params_into(r.params, path);
    return r;
}

Estimator load_estimator(const std::string& path) {
    Estimator e = init_estimator(EstimatorConfig{}, 0);
    load_params_into(e.params, path);
    return e;
}

std::vector<EyeSample> flatten_person_dataset(const PersonDataset& ds) {
    std::vector<EyeSample> all;
    for (const PersonData& p : ds.persons) {
        all.insert(all.end(), p.pool.begin(), p.pool.end());
        all.insert(all.end(), p.test.begin(), p.test.end());
    }
    return all;
}

// ---- synth-gen -----------------------------------------------------------

struct SynthGenArgs {
    std::string kind = "pairs";
    std::string out;
    std::uint64_t seed = 1;
    int groups = 200, k = 10, pairs_per_group = 20;
    int persons = 15, samples_per_person = 120, pool_size = 20;
    int person_id_base = 0;
    bool kappa = true;
    std::string domain = "synthetic";
};

int run_synth_gen(const SynthGenArgs& a) {
    const Domain domain = a.domain == "pseudo-real" ? Domain::PseudoReal : Domain::Synthetic;
    json cfg = {{"kind", a.kind},   {"seed", a.seed},     {"domain", a.domain},
                {"groups", a.groups}, {"k", a.k},
                {"pairs_per_group", a.pairs_per_group},   {"persons", a.persons},
                {"samples_per_person", a.samples_per_person}, {"pool_size", a.pool_size},
                {"kappa", a.kappa}, {"person_id_base", a.person_id_base}};
    if (a.kind == "pairs") {
        PairDatasetConfig c;
        c.group_count = a.groups;
        c.k = a.k;
        c.pairs_per_group = a.pairs_per_group;
        c.domain = domain;
        save_pair_dataset(build_pair_dataset(c, a.seed), a.out, a.seed);
    } else if (a.kind == "persons") {
        PersonDatasetConfig c;
        c.persons = a.persons;
        c.samples_per_person = a.samples_per_person;
        c.pool_size = a.pool_size;
        c.with_kappa = a.kappa;
        c.person_id_base = a.person_id_base;
        c.domain = domain;
        save_person_dataset(build_person_dataset(c, a.seed), a.out, a.seed);
    } else {
        throw std::invalid_argument("synth-gen: --kind must be 'pairs' or 'persons'");
    }
    write_resolved_config(a.out, "synth-gen", cfg);
    std::printf("wrote %s dataset to %s\n", a.kind.c_str(), a.out.c_str());
    return 0;
}

// ---- train-redirector ----------------------------------------------------

struct TrainRedirectorArgs {
    std::string pairs, out;
    RedirectorTrainConfig cfg;
    std::uint64_t seed = 1;
};

int run_train_redirector(const TrainRedirectorArgs& a) {
    const PairDataset ds = load_pair_dataset(a.pairs);
    const RedirectorTrainResult res = train_redirector(ds, a.cfg, a.seed);
    fs::create_directories(a.out);
    save_params(res.model.params, (fs::path(a.out) / "redirector.gzr").string());
    std::string csv = "epoch,train_LR,heldout_LR\n";
    char line[128];
    std::snprintf(line, sizeof line, "0,%.17g,%.17g\n", res.heldout_initial, res.heldout_initial);
    csv += line;
    for (const EpochLog& l : res.log) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", l.epoch, l.train_loss, l.heldout_loss);
        csv += line;
    }
    write_text_file(fs::path(a.out) / "epochs.csv", csv);
    write_resolved_config(a.out, "train-redirector",
                          {{"pairs", a.pairs},
                           {"epochs", a.cfg.epochs},
                           {"lr", a.cfg.lr},
                           {"batch", a.cfg.batch},
                           {"seg_weight", a.cfg.seg_weight},
                           {"heldout_fraction", a.cfg.heldout_fraction},
                           {"seed", a.seed}});
    std::printf("held-out loss %.6f (identity baseline %.6f)\n", res.heldout_final,
                res.heldout_initial);
    return 0;
}

// ---- train-estimator -----------------------------------------------------

struct TrainEstimatorArgs {
    std::string dataset, out_prefix;
    EstimatorTrainConfig cfg;
    std::uint64_t seed = 1;
};

int run_train_estimator(const TrainEstimatorArgs& a) {
    const PersonDataset ds = load_person_dataset(a.dataset);
    const auto folds = train_estimator(ds, a.cfg, a.seed);
    const fs::path prefix(a.out_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    std::string csv = "fold,test_persons,error_deg\n";
    for (const FoldResult& f : folds) {
        save_params(f.model.params,
                    a.out_prefix + "_fold" + std::to_string(f.fold) + ".gzr");
        std::string persons;
        for (int p : f.test_persons) persons += (persons.empty() ? "" : " ") + std::to_string(p);
        char line[256];
        std::snprintf(line, sizeof line, "%d,%s,%.17g\n", f.fold, persons.c_str(), f.test_error_deg);
        csv += line;
    }
    write_text_file(a.out_prefix + "_folds.csv", csv);
    const fs::path cfg_dir = prefix.has_parent_path() ? prefix.parent_path() : fs::path(".");
    write_resolved_config(cfg_dir, "train-estimator",
                          {{"dataset", a.dataset},
                           {"folds", a.cfg.folds},
                           {"epochs", a.cfg.epochs},
                           {"lr", a.cfg.lr},
                           {"batch", a.cfg.batch},
                           {"seed", a.seed}});
    double mean = 0;
    for (const FoldResult& f : folds) mean += f.test_error_deg;
    std::printf("cross-person error %.4f deg over %zu folds\n", mean / folds.size(), folds.size());
    return 0;
}

// ---- adapt-domain --------------------------------------------------------

struct AdaptArgs {
    std::string redirector, estimator, realset, out;
    AdaptSchedule schedule;
    std::uint64_t seed = 1;
};

int run_adapt_domain(const AdaptArgs& a) {
    const Redirector r = load_redirector(a.redirector);
    const Estimator e = load_estimator(a.estimator);
    const PersonDataset ds = load_person_dataset(a.realset);
    const std::vector<EyeSample> realset = flatten_person_dataset(ds);
    const AdaptResult res = adapt_redirector(r, e, realset, a.schedule, a.seed);
    fs::create_directories(a.out);
    save_params(res.model.params, (fs::path(a.out) / "adapted.gzr").string());
    std::string csv = "step,loss_kind,value\n";
    char line[128];
    for (const AdaptLogEntry& l : res.log) {
        std::snprintf(line, sizeof line, "%d,%s,%.17g\n", l.step, l.kind == 'c' ? "cycle" : "gaze",
                      l.loss);
        csv += line;
    }
    write_text_file(fs::path(a.out) / "steps.csv", csv);
    write_resolved_config(a.out, "adapt-domain",
                          {{"redirector", a.redirector},
                           {"estimator", a.estimator},
                           {"realset", a.realset},
                           {"steps", a.schedule.steps},
                           {"batch", a.schedule.batch},
                           {"lr_cycle", a.schedule.lr_cycle},
                           {"lr_gaze", a.schedule.lr_gaze},
                           {"seed", a.seed}});
    std::printf("adapted over %d steps\n", a.schedule.steps);
    return 0;
}

// ---- redirect ------------------------------------------------------------

struct RedirectArgs {
    std::string image, weights, out, dump_field;
    double dpitch = 0, dyaw = 0, hpitch = 0, hyaw = 0;
};

int run_redirect(const RedirectArgs& a) {
    const Redirector r = load_redirector(a.weights);
    const Tensor img = read_pgm(a.image);
    const GazeOffset dg{deg_to_rad(a.dpitch), deg_to_rad(a.dyaw)};
    const HeadPose head{deg_to_rad(a.hpitch), deg_to_rad(a.hyaw)};
    if (std::fabs(dg.pitch) > deg_to_rad(10.0) + 1e-12 || std::fabs(dg.yaw) > deg_to_rad(15.0) + 1e-12)
        std::fprintf(stderr,
                     "warning: redirection angle outside the trained range "
                     "(|pitch| <= 10 deg, |yaw| <= 15 deg)\n");
    const WarpField field = predict_field(r, img, dg, head);
    write_pgm(a.out, sample_bilinear(img, field));
    if (!a.dump_field.empty()) {
        ParamSet fieldset;
        Branch b;
        b.name = "warpfield";
        Layer holder;  // parameter-free carrier for the two field planes
        holder.kind = LayerKind::ConcatBroadcast;
        holder.params = {field.mx, field.my};
        b.layers.push_back(std::move(holder));
        fieldset.branches.push_back(std::move(b));
        save_params(fieldset, a.dump_field);
    }
    const fs::path out_dir = fs::path(a.out).has_parent_path() ? fs::path(a.out).parent_path()
                                                               : fs::path(".");
    write_resolved_config(out_dir, "redirect",
                          {{"image", a.image},
                           {"weights", a.weights},
                           {"dpitch_deg", a.dpitch},
                           {"dyaw_deg", a.dyaw},
                           {"hpitch_deg", a.hpitch},
                           {"hyaw_deg", a.hyaw}});
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

// ---- finetune ------------------------------------------------------------

struct FinetuneArgs {
    std::string dataset, generic, redirector, out;
    int person = 0, n = 9, t = 10;
    double dg_pitch_deg = 10, dg_yaw_deg = 15;
    FinetuneConfig cfg;
    std::uint64_t seed = 1;
};

int run_finetune(const FinetuneArgs& a) {
    const PersonDataset ds = load_person_dataset(a.dataset);
    if (a.person < 0 || a.person >= static_cast<int>(ds.persons.size()))
        throw DataError("finetune: person index out of range");
    const PersonData& pd = ds.persons[a.person];
    const Estimator generic = load_estimator(a.generic);

    Rng refs_rng = stream_rng(a.seed, {hash_str("refs"), static_cast<std::uint64_t>(a.n),
                                       static_cast<std::uint64_t>(a.person), 0});
    Rng dg_rng = stream_rng(a.seed, {hash_str("dg"), static_cast<std::uint64_t>(a.n),
                                     static_cast<std::uint64_t>(a.person), 0});
    const auto ids = draw_references(static_cast<int>(pd.pool.size()), a.n, refs_rng);
    std::vector<EyeSample> refs;
    for (int id : ids) refs.push_back(pd.pool[id]);

    std::vector<AugSample> aug;
    if (a.t > 0) {
        if (a.redirector.empty())
            throw std::invalid_argument("finetune: --redirector is required when t > 0");
        OffsetRange range;
        range.pitch = deg_to_rad(a.dg_pitch_deg);
        range.yaw = deg_to_rad(a.dg_yaw_deg);
        aug = augment(load_redirector(a.redirector), refs, a.t, range, dg_rng);
    }
    const Estimator tuned = finetune_estimator(generic, refs, aug, a.cfg);
    const double before = evaluate(generic, nullptr, pd.test);
    const double after = evaluate(tuned, nullptr, pd.test);
    fs::create_directories(a.out);
    save_params(tuned.params, (fs::path(a.out) / "finetuned.gzr").string());
    char line[256];
    std::snprintf(line, sizeof line, "person,n,t,generic_error_deg,tuned_error_deg\n%d,%d,%d,%.17g,%.17g\n",
                  a.person, a.n, a.t, before, after);
    write_text_file(fs::path(a.out) / "result.csv", line);
    write_resolved_config(a.out, "finetune",
                          {{"dataset", a.dataset},
                           {"generic", a.generic},
                           {"redirector", a.redirector},
                           {"person", a.person},
                           {"n", a.n},
                           {"t", a.t},
                           {"dg_pitch_deg", a.dg_pitch_deg},
                           {"dg_yaw_deg", a.dg_yaw_deg},
                           {"epochs", a.cfg.epochs},
                           {"mixed_epochs", a.cfg.mixed_epochs},
                           {"lr", a.cfg.lr},
                           {"seed", a.seed}});
    std::printf("person %d: generic %.4f deg -> tuned %.4f deg\n", a.person, before, after);
    return 0;
}

// ---- benchmark -----------------------------------------------------------

struct BenchmarkArgs {
    std::string config, out;
    int threads = 1;
    int rounds = -1;  // flag-level defaults; the JSON config overrides flags
    int t = -1;
};

int run_benchmark_cmd(const BenchmarkArgs& a) {
    std::ifstream is(a.config);
    if (!is) throw DataError(a.config + ": cannot open");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError(a.config + std::string(": ") + e.what());
    }

    BenchmarkConfig cfg;
    if (a.rounds > 0) cfg.rounds = a.rounds;
    if (a.t >= 0) cfg.t = a.t;
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j["methods"]) cfg.methods.push_back(method_from_string(m));
    }
    if (j.contains("n_values")) cfg.n_values = j["n_values"].get<std::vector<int>>();
    if (j.contains("t")) cfg.t = j["t"].get<int>();
    if (j.contains("rounds")) cfg.rounds = j["rounds"].get<int>();
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("dg_pitch_deg")) cfg.range.pitch = deg_to_rad(j["dg_pitch_deg"].get<double>());
    if (j.contains("dg_yaw_deg")) cfg.range.yaw = deg_to_rad(j["dg_yaw_deg"].get<double>());
    if (j.contains("discrete_dg")) cfg.range.discrete = j["discrete_dg"].get<bool>();
    if (j.contains("finetune")) {
        const auto& f = j["finetune"];
        if (f.contains("epochs")) cfg.finetune.epochs = f["epochs"].get<int>();
        if (f.contains("mixed_epochs")) cfg.finetune.mixed_epochs = f["mixed_epochs"].get<int>();
        if (f.contains("lr")) cfg.finetune.lr = f["lr"].get<double>();
    }

    if (!j.contains("dataset")) throw DataError("benchmark config: missing 'dataset'");
    if (!j.contains("estimators")) throw DataError("benchmark config: missing 'estimators'");
    const PersonDataset ds = load_person_dataset(j["dataset"].get<std::string>());
    std::vector<Estimator> folds;
    for (const auto& f : j["estimators"]) folds.push_back(load_estimator(f.get<std::string>()));

    Redirector plain, adapted;
    BenchmarkAssets assets;
    assets.dataset = &ds;
    assets.fold_models = &folds;
    for (std::size_t p = 0; p < ds.persons.size(); ++p)
        assets.person_fold.push_back(static_cast<int>(p % folds.size()));
    if (j.contains("redirector")) {
        plain = load_redirector(j["redirector"].get<std::string>());
        assets.redirector = &plain;
    }
    if (j.contains("redirector_da")) {
        adapted = load_redirector(j["redirector_da"].get<std::string>());
        assets.redirector_da = &adapted;
    }

    const BenchmarkReport report = run_benchmark(cfg, assets, a.threads);
    fs::create_directories(a.out);
    write_report_csv(report, (fs::path(a.out) / "report.csv").string());
    write_summary_csv(report, (fs::path(a.out) / "summary.csv").string());
    write_trend_svg(report, (fs::path(a.out) / "trend.svg").string());
    json resolved = j;
    resolved["threads_note"] = "thread count affects wall time only";
    write_resolved_config(a.out, "benchmark", resolved);
    for (const auto& agg : report.aggregates())
        std::printf("%-16s n=%d mean %.4f deg (std %.4f, %d cells)\n", method_name(agg.method),
                    agg.n, agg.mean_deg, agg.std_deg, agg.count);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) + " - gaze redirection and few-shot gaze adaptation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads (wall time only, never results)");

    SynthGenArgs sg;
    auto* c_sg = app.add_subcommand("synth-gen", "generate a synthetic dataset");
    c_sg->add_option("--kind", sg.kind, "pairs | persons")->check(CLI::IsMember({"pairs", "persons"}));
    c_sg->add_option("--out", sg.out)->required();
    c_sg->add_option("--seed", sg.seed);
    c_sg->add_option("--groups", sg.groups);
    c_sg->add_option("--k", sg.k);
    c_sg->add_option("--pairs-per-group", sg.pairs_per_group);
    c_sg->add_option("--persons", sg.persons);
    c_sg->add_option("--samples-per-person", sg.samples_per_person);
    c_sg->add_option("--pool-size", sg.pool_size);
    c_sg->add_option("--person-id-base", sg.person_id_base);
    c_sg->add_flag("--kappa,!--no-kappa", sg.kappa, "person-specific axis offset on labels");
    c_sg->add_option("--domain", sg.domain)->check(CLI::IsMember({"synthetic", "pseudo-real"}));

    TrainRedirectorArgs tr;
    auto* c_tr = app.add_subcommand("train-redirector", "pre-train the redirection network");
    c_tr->add_option("--pairs", tr.pairs, "pair dataset directory")->required();
    c_tr->add_option("--out", tr.out)->required();
    c_tr->add_option("--epochs", tr.cfg.epochs);
    c_tr->add_option("--lr", tr.cfg.lr);
    c_tr->add_option("--batch", tr.cfg.batch);
    c_tr->add_option("--seg-weight", tr.cfg.seg_weight);
    c_tr->add_option("--heldout-fraction", tr.cfg.heldout_fraction);
    c_tr->add_option("--seed", tr.seed);

    TrainEstimatorArgs te;
    auto* c_te = app.add_subcommand("train-estimator", "train the gaze estimator cross-person");
    c_te->add_option("--dataset", te.dataset, "person dataset directory")->required();
    c_te->add_option("--out-prefix", te.out_prefix)->required();
    c_te->add_option("--folds", te.cfg.folds);
    c_te->add_option("--epochs", te.cfg.epochs);
    c_te->add_option("--lr", te.cfg.lr);
    c_te->add_option("--batch", te.cfg.batch);
    c_te->add_option("--seed", te.seed);

    AdaptArgs ad;
    auto* c_ad = app.add_subcommand("adapt-domain", "self-supervised domain adaptation");
    c_ad->add_option("--redirector", ad.redirector)->required();
    c_ad->add_option("--estimator", ad.estimator)->required();
    c_ad->add_option("--realset", ad.realset, "person dataset directory")->required();
    c_ad->add_option("--out", ad.out)->required();
    c_ad->add_option("--steps", ad.schedule.steps);
    c_ad->add_option("--batch", ad.schedule.batch);
    c_ad->add_option("--lr-cycle", ad.schedule.lr_cycle);
    c_ad->add_option("--lr-gaze", ad.schedule.lr_gaze);
    c_ad->add_option("--seed", ad.seed);

    RedirectArgs rd;
    auto* c_rd = app.add_subcommand("redirect", "redirect the gaze of one image");
    c_rd->add_option("--image", rd.image)->required();
    c_rd->add_option("--weights", rd.weights)->required();
    c_rd->add_option("--out", rd.out)->required();
    c_rd->add_option("--dpitch", rd.dpitch, "redirection pitch, degrees");
    c_rd->add_option("--dyaw", rd.dyaw, "redirection yaw, degrees");
    c_rd->add_option("--hpitch", rd.hpitch, "head pitch, degrees");
    c_rd->add_option("--hyaw", rd.hyaw, "head yaw, degrees");
    c_rd->add_option("--dump-field", rd.dump_field, "write the warp field to this file");

    FinetuneArgs ft;
    auto* c_ft = app.add_subcommand("finetune", "few-shot person-specific fine-tune");
    c_ft->add_option("--dataset", ft.dataset)->required();
    c_ft->add_option("--generic", ft.generic, "generic estimator weights")->required();
    c_ft->add_option("--out", ft.out)->required();
    c_ft->add_option("--person", ft.person);
    c_ft->add_option("--n", ft.n);
    c_ft->add_option("--t", ft.t);
    c_ft->add_option("--redirector", ft.redirector);
    c_ft->add_option("--dg-pitch", ft.dg_pitch_deg);
    c_ft->add_option("--dg-yaw", ft.dg_yaw_deg);
    c_ft->add_option("--epochs", ft.cfg.epochs);
    c_ft->add_option("--mixed-epochs", ft.cfg.mixed_epochs);
    c_ft->add_option("--lr", ft.cfg.lr);
    c_ft->add_option("--seed", ft.seed);

    BenchmarkArgs bm;
    auto* c_bm = app.add_subcommand("benchmark", "person-specific adaptation benchmark");
    c_bm->add_option("--config", bm.config, "JSON config (overrides flags)")->required();
    c_bm->add_option("--out", bm.out)->required();
    c_bm->add_option("--rounds", bm.rounds);
    c_bm->add_option("--t", bm.t);

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*c_sg) return run_synth_gen(sg);
        if (*c_tr) return run_train_redirector(tr);
        if (*c_te) return run_train_estimator(te);
        if (*c_ad) return run_adapt_domain(ad);
        if (*c_rd) return run_redirect(rd);
        if (*c_ft) return run_finetune(ft);
        if (*c_bm) {
            bm.threads = threads;
            return run_benchmark_cmd(bm);
        }
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
