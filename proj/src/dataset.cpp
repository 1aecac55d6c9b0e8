#include "gazelab/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "gazelab/errors.hpp"
#include "gazelab/pgm.hpp"
#include "gazelab/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace gazelab {

namespace {

GazeAngles draw_gaze(const SampleRanges& r, Rng& rng) {
    return {rng.uniform(-r.gaze_pitch, r.gaze_pitch), rng.uniform(-r.gaze_yaw, r.gaze_yaw)};
}

HeadPose draw_head(const SampleRanges& r, Rng& rng) {
    return {rng.uniform(-r.head_pitch, r.head_pitch), rng.uniform(-r.head_yaw, r.head_yaw)};
}

// Draws a gaze that renders with a visible iris. Deterministic rejection
// sampling; the throwaway render only exercises the geometry.
GazeAngles draw_valid_gaze(const PersonProfile& prof, HeadPose head, const IllumParams& illum,
                           const SampleRanges& ranges, Rng& rng) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const GazeAngles g = draw_gaze(ranges, rng);
        try {
            (void)render(prof, head, g, illum, Domain::Synthetic, 0);
            return g;
        } catch (const DataError&) {
        }
    }
    throw DataError("dataset: could not draw a renderable gaze after 200 attempts");
}

// Partial Fisher-Yates pick of n out of [0,total), returned sorted.
std::vector<int> pick_indices(int total, int n, Rng& rng) {
    std::vector<int> idx(total);
    for (int i = 0; i < total; ++i) idx[i] = i;
    for (int i = 0; i < n; ++i) {
        const int j = i + rng.uniform_int(total - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

json sample_to_json(const EyeSample& s, const std::string& image_file, const std::string& seg_file) {
    return json{{"image", image_file},
                {"seg", seg_file},
                {"gaze", {s.gaze.pitch, s.gaze.yaw}},
                {"head", {s.head.pitch, s.head.yaw}}};
}

void fill_sample_meta(EyeSample& s, const json& j, const fs::path& dir, int person_id, int illum_id,
                      Domain domain, GazeOffset kappa) {
    s.image = read_pgm((dir / j.at("image").get<std::string>()).string());
    s.seg = read_seg_pgm((dir / j.at("seg").get<std::string>()).string());
    s.gaze = {j.at("gaze")[0].get<double>(), j.at("gaze")[1].get<double>()};
    s.head = {j.at("head")[0].get<double>(), j.at("head")[1].get<double>()};
    s.optical = {s.gaze.pitch - kappa.pitch, s.gaze.yaw - kappa.yaw};
    s.person_id = person_id;
    s.illum_id = illum_id;
    s.domain = domain;
}

json profile_to_json(const PersonProfile& p) {
    return json{{"id", p.id},
                {"skin_albedo", p.skin_albedo},
                {"sclera_albedo", p.sclera_albedo},
                {"iris_albedo", p.iris_albedo},
                {"eyeball_radius_px", p.eyeball_radius_px},
                {"aperture", p.aperture},
                {"kappa", {p.kappa.pitch, p.kappa.yaw}}};
}

PersonProfile profile_from_json(const json& j) {
    PersonProfile p;
    p.id = j.at("id").get<int>();
    p.skin_albedo = j.at("skin_albedo").get<double>();
    p.sclera_albedo = j.at("sclera_albedo").get<double>();
    p.iris_albedo = j.at("iris_albedo").get<double>();
    p.eyeball_radius_px = j.at("eyeball_radius_px").get<double>();
    p.aperture = j.at("aperture").get<double>();
    p.kappa = {j.at("kappa")[0].get<double>(), j.at("kappa")[1].get<double>()};
    return p;
}

json illum_to_json(const IllumParams& il) {
    return json{{"id", il.id}, {"gain", il.gain}, {"grad_x", il.grad_x}, {"grad_y", il.grad_y}};
}

IllumParams illum_from_json(const json& j) {
    IllumParams il;
    il.id = j.at("id").get<int>();
    il.gain = j.at("gain").get<double>();
    il.grad_x = j.at("grad_x").get<double>();
    il.grad_y = j.at("grad_y").get<double>();
    return il;
}

Domain domain_from_string(const std::string& s) {
    if (s == "synthetic") return Domain::Synthetic;
    if (s == "pseudo-real") return Domain::PseudoReal;
    throw DataError("manifest: unknown domain '" + s + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path.string() + ": cannot open for writing");
    os << text;
}

json read_manifest(const std::string& dir, const char* expected_kind) {
    const fs::path p = fs::path(dir) / "manifest.json";
    std::ifstream is(p);
    if (!is) throw DataError(p.string() + ": cannot open");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError(p.string() + ": " + e.what());
    }
    if (j.value("kind", "") != expected_kind)
        throw DataError(p.string() + ": expected kind '" + expected_kind + "'");
    return j;
}

}  // namespace

PairDataset build_pair_dataset(const PairDatasetConfig& cfg, std::uint64_t seed) {
    if (cfg.group_count < 1) throw std::invalid_argument("build_pair_dataset: group count >= 1");
    if (cfg.k < 2) throw std::invalid_argument("build_pair_dataset: k >= 2");
    const int max_pairs = cfg.k * (cfg.k - 1);
    if (cfg.pairs_per_group < 1 || cfg.pairs_per_group > max_pairs)
        throw std::invalid_argument("build_pair_dataset: pairs_per_group must be in [1, k*(k-1)]");

    PairDataset ds;
    ds.domain = cfg.domain;
    ds.k = cfg.k;
    ds.groups.reserve(cfg.group_count);
    for (int g = 0; g < cfg.group_count; ++g) {
        const auto gi = static_cast<std::uint64_t>(g);
        // aligned training pairs carry no person-specific axis offset
        const PersonProfile prof = sample_profile(g, seed, /*with_kappa=*/false);
        const IllumParams illum = make_illum(g, seed);
        Rng rng = stream_rng(seed, {hash_str("group"), gi});
        const HeadPose head = draw_head(cfg.ranges, rng);
        std::vector<GazeAngles> gazes(cfg.k);
        for (auto& gz : gazes) gz = draw_valid_gaze(prof, head, illum, cfg.ranges, rng);
        ds.groups.push_back(make_group(prof, head, illum, gazes, cfg.domain,
                                       stream_rng(seed, {hash_str("render"), gi}).next()));

        Rng pair_rng = stream_rng(seed, {hash_str("pairs"), gi});
        const std::vector<int> chosen = pick_indices(max_pairs, cfg.pairs_per_group, pair_rng);
        for (int flat : chosen) {
            const int src = flat / (cfg.k - 1);
            int dst = flat % (cfg.k - 1);
            if (dst >= src) ++dst;
            const AlignedGroup& grp = ds.groups.back();
            ds.pairs.push_back(
                {g, src, dst, grp.samples[dst].gaze - grp.samples[src].gaze});
        }
    }
    return ds;
}

PersonDataset build_person_dataset(const PersonDatasetConfig& cfg, std::uint64_t seed) {
    if (cfg.persons < 2) throw std::invalid_argument("build_person_dataset: persons >= 2");
    if (cfg.samples_per_person < 10)
        throw std::invalid_argument("build_person_dataset: need >= 10 samples per person");
    if (cfg.pool_size < 9 || cfg.pool_size >= cfg.samples_per_person)
        throw std::invalid_argument("build_person_dataset: pool_size must be in [9, samples_per_person)");

    PersonDataset ds;
    ds.domain = cfg.domain;
    ds.persons.reserve(cfg.persons);
    for (int p = 0; p < cfg.persons; ++p) {
        const int pid = cfg.person_id_base + p;
        PersonData pd;
        pd.profile = sample_profile(pid, seed, cfg.with_kappa);
        for (int s = 0; s < cfg.samples_per_person; ++s) {
            const auto tag = static_cast<std::uint64_t>(pid) * 100000 + static_cast<std::uint64_t>(s);
            Rng rng = stream_rng(seed, {hash_str("person-sample"), tag});
            const HeadPose head = draw_head(cfg.ranges, rng);
            const IllumParams illum = make_illum(static_cast<int>(tag % 1000000), seed);
            const GazeAngles gaze = draw_valid_gaze(pd.profile, head, illum, cfg.ranges, rng);
            EyeSample sample = render(pd.profile, head, gaze, illum, cfg.domain,
                                      stream_rng(seed, {hash_str("person-render"), tag}).next());
            if (s < cfg.pool_size)
                pd.pool.push_back(std::move(sample));
            else
                pd.test.push_back(std::move(sample));
        }
        ds.persons.push_back(std::move(pd));
    }
    return ds;
}

void save_pair_dataset(const PairDataset& ds, const std::string& dir, std::uint64_t seed) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "segs");
    json groups = json::array();
    char name[64];
    for (std::size_t g = 0; g < ds.groups.size(); ++g) {
        const AlignedGroup& grp = ds.groups[g];
        json samples = json::array();
        for (std::size_t s = 0; s < grp.samples.size(); ++s) {
            std::snprintf(name, sizeof name, "g%04zu_s%02zu.pgm", g, s);
            const std::string img = std::string("images/") + name;
            const std::string seg = std::string("segs/") + name;
            write_pgm((fs::path(dir) / img).string(), grp.samples[s].image);
            write_seg_pgm((fs::path(dir) / seg).string(), grp.samples[s].seg);
            samples.push_back(sample_to_json(grp.samples[s], img, seg));
        }
        groups.push_back(json{{"person", profile_to_json(grp.profile)},
                              {"head", {grp.head.pitch, grp.head.yaw}},
                              {"illum", illum_to_json(grp.illum)},
                              {"samples", samples}});
    }
    json pairs = json::array();
    for (const TrainPair& p : ds.pairs)
        pairs.push_back(json::array({p.group, p.src, p.dst, p.dg.pitch, p.dg.yaw}));
    const json manifest = {{"kind", "pairs"},   {"seed", seed},   {"domain", domain_name(ds.domain)},
                           {"k", ds.k},         {"groups", groups}, {"pairs", pairs}};
    write_text(fs::path(dir) / "manifest.json", manifest.dump(1) + "\n");
}

PairDataset load_pair_dataset(const std::string& dir) {
    const json j = read_manifest(dir, "pairs");
    PairDataset ds;
    ds.domain = domain_from_string(j.at("domain").get<std::string>());
    ds.k = j.at("k").get<int>();
    for (const json& gj : j.at("groups")) {
        AlignedGroup grp;
        grp.profile = profile_from_json(gj.at("person"));
        grp.head = {gj.at("head")[0].get<double>(), gj.at("head")[1].get<double>()};
        grp.illum = illum_from_json(gj.at("illum"));
        grp.domain = ds.domain;
        for (const json& sj : gj.at("samples")) {
            EyeSample s;
            fill_sample_meta(s, sj, dir, grp.profile.id, grp.illum.id, ds.domain, grp.profile.kappa);
            grp.samples.push_back(std::move(s));
        }
        ds.groups.push_back(std::move(grp));
    }
    for (const json& pj : j.at("pairs")) {
        TrainPair p;
        p.group = pj[0].get<int>();
        p.src = pj[1].get<int>();
        p.dst = pj[2].get<int>();
        p.dg = {pj[3].get<double>(), pj[4].get<double>()};
        if (p.group < 0 || p.group >= static_cast<int>(ds.groups.size()))
            throw DataError(dir + ": pair references group " + std::to_string(p.group));
        ds.pairs.push_back(p);
    }
    return ds;
}

void save_person_dataset(const PersonDataset& ds, const std::string& dir, std::uint64_t seed) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "segs");
    json persons = json::array();
    char name[64];
    for (std::size_t p = 0; p < ds.persons.size(); ++p) {
        const PersonData& pd = ds.persons[p];
        const auto dump_split = [&](const std::vector<EyeSample>& split, const char* tag) {
            json arr = json::array();
            for (std::size_t s = 0; s < split.size(); ++s) {
                std::snprintf(name, sizeof name, "p%03zu_%s%03zu.pgm", p, tag, s);
                const std::string img = std::string("images/") + name;
                const std::string seg = std::string("segs/") + name;
                write_pgm((fs::path(dir) / img).string(), split[s].image);
                write_seg_pgm((fs::path(dir) / seg).string(), split[s].seg);
                json sj = sample_to_json(split[s], img, seg);
                sj["illum"] = split[s].illum_id;
                arr.push_back(std::move(sj));
            }
            return arr;
        };
        persons.push_back(json{{"profile", profile_to_json(pd.profile)},
                               {"pool", dump_split(pd.pool, "a")},
                               {"test", dump_split(pd.test, "t")}});
    }
    const json manifest = {
        {"kind", "persons"}, {"seed", seed}, {"domain", domain_name(ds.domain)}, {"persons", persons}};
    write_text(fs::path(dir) / "manifest.json", manifest.dump(1) + "\n");
}

PersonDataset load_person_dataset(const std::string& dir) {
    const json j = read_manifest(dir, "persons");
    PersonDataset ds;
    ds.domain = domain_from_string(j.at("domain").get<std::string>());
    for (const json& pj : j.at("persons")) {
        PersonData pd;
        pd.profile = profile_from_json(pj.at("profile"));
        const auto load_split = [&](const json& arr, std::vector<EyeSample>& out) {
            for (const json& sj : arr) {
                EyeSample s;
                fill_sample_meta(s, sj, dir, pd.profile.id, sj.value("illum", 0), ds.domain,
                                 pd.profile.kappa);
                out.push_back(std::move(s));
            }
        };
        load_split(pj.at("pool"), pd.pool);
        load_split(pj.at("test"), pd.test);
        ds.persons.push_back(std::move(pd));
    }
    return ds;
}

}  // namespace gazelab
