#include "gazelab/benchmark.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include "gazelab/errors.hpp"

namespace gazelab {

const char* method_name(Method m) {
    switch (m) {
        case Method::FTAdap: return "FTAdap";
        case Method::RedFTAdap: return "RedFTAdap";
        case Method::RedFTAdapNoDA: return "RedFTAdap-noDA";
        case Method::LinAdap: return "LinAdap";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "FTAdap") return Method::FTAdap;
    if (s == "RedFTAdap") return Method::RedFTAdap;
    if (s == "RedFTAdap-noDA") return Method::RedFTAdapNoDA;
    if (s == "LinAdap") return Method::LinAdap;
    throw DataError("benchmark: unknown method '" + s + "'");
}

namespace {

void validate_assets(const BenchmarkConfig& cfg, const BenchmarkAssets& a) {
    if (!a.dataset) throw DataError("benchmark: missing asset 'dataset'");
    if (!a.fold_models || a.fold_models->empty())
        throw DataError("benchmark: missing asset 'fold estimators'");
    if (a.person_fold.size() != a.dataset->persons.size())
        throw DataError("benchmark: person-to-fold map does not cover the dataset");
    for (int f : a.person_fold)
        if (f < 0 || f >= static_cast<int>(a.fold_models->size()))
            throw DataError("benchmark: person-to-fold map references a missing fold model");
    const bool needs_plain =
        std::count(cfg.methods.begin(), cfg.methods.end(), Method::RedFTAdapNoDA) > 0;
    const bool needs_da = std::count(cfg.methods.begin(), cfg.methods.end(), Method::RedFTAdap) > 0;
    if (needs_plain && !a.redirector) throw DataError("benchmark: missing asset 'redirector'");
    if (needs_da && !a.redirector_da)
        throw DataError("benchmark: missing asset 'adapted redirector'");
    for (const PersonData& p : a.dataset->persons) {
        int max_n = 0;
        for (int n : cfg.n_values) max_n = std::max(max_n, n);
        if (static_cast<int>(p.pool.size()) < max_n)
            throw DataError("benchmark: adaptation pool smaller than the largest n");
        if (p.test.empty()) throw DataError("benchmark: empty test split");
    }
}

CellResult run_cell(const BenchmarkConfig& cfg, const BenchmarkAssets& assets, Method method,
                    int n, int person, int round, std::uint64_t seed) {
    const PersonData& pd = assets.dataset->persons[person];
    const Estimator& generic = (*assets.fold_models)[assets.person_fold[person]];

    // method-independent streams keep the comparison paired across methods
    const auto pu = static_cast<std::uint64_t>(person);
    const auto ru = static_cast<std::uint64_t>(round);
    const auto nu = static_cast<std::uint64_t>(n);
    Rng refs_rng = stream_rng(seed, {hash_str("refs"), nu, pu, ru});
    Rng dg_rng = stream_rng(seed, {hash_str("dg"), nu, pu, ru});

    const std::vector<int> ref_ids = draw_references(static_cast<int>(pd.pool.size()), n, refs_rng);
    std::vector<EyeSample> refs;
    refs.reserve(ref_ids.size());
    for (int id : ref_ids) refs.push_back(pd.pool[id]);

    CellResult cell;
    cell.method = method;
    cell.n = n;
    cell.person = person;
    cell.round = round;
    cell.seed = seed;
    switch (method) {
        case Method::FTAdap: {
            const Estimator tuned = finetune_estimator(generic, refs, {}, cfg.finetune);
            cell.error_deg = evaluate(tuned, nullptr, pd.test);
            break;
        }
        case Method::RedFTAdap:
        case Method::RedFTAdapNoDA: {
            const Redirector& r =
                method == Method::RedFTAdap ? *assets.redirector_da : *assets.redirector;
            const std::vector<AugSample> aug = augment(r, refs, cfg.t, cfg.range, dg_rng);
            const Estimator tuned = finetune_estimator(generic, refs, aug, cfg.finetune);
            cell.error_deg = evaluate(tuned, nullptr, pd.test);
            break;
        }
        case Method::LinAdap: {
            const AffineCorrection corr = lin_adapt(generic, refs);
            cell.lin_bias_only = corr.bias_only;
            cell.error_deg = evaluate(generic, &corr, pd.test);
            break;
        }
    }
    return cell;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const BenchmarkAssets& assets,
                              int threads) {
    if (cfg.rounds < 1 || cfg.t < 0 || cfg.n_values.empty() || cfg.methods.empty() ||
        cfg.seeds.empty())
        throw std::invalid_argument("benchmark: invalid configuration");
    validate_assets(cfg, assets);

    struct CellKey {
        Method method;
        int n, person, round;
        std::uint64_t seed;
    };
    std::vector<CellKey> keys;
    for (std::uint64_t seed : cfg.seeds)
        for (Method m : cfg.methods)
            for (int n : cfg.n_values)
                for (std::size_t p = 0; p < assets.dataset->persons.size(); ++p)
                    for (int round = 0; round < cfg.rounds; ++round)
                        keys.push_back({m, n, static_cast<int>(p), round, seed});

    BenchmarkReport report;
    report.cells.resize(keys.size());
    std::atomic<std::size_t> next{0};
    const int nthreads = std::max(1, threads);
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= keys.size()) return;
            const CellKey& k = keys[i];
            report.cells[i] = run_cell(cfg, assets, k.method, k.n, k.person, k.round, k.seed);
        }
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return report;
}

std::vector<BenchmarkReport::Aggregate> BenchmarkReport::aggregates() const {
    std::vector<Aggregate> out;
    for (const CellResult& c : cells) {
        Aggregate* slot = nullptr;
        for (Aggregate& a : out)
            if (a.method == c.method && a.n == c.n) slot = &a;
        if (!slot) {
            out.push_back({c.method, c.n, 0, 0, 0});
            slot = &out.back();
        }
        slot->mean_deg += c.error_deg;
        slot->std_deg += c.error_deg * c.error_deg;
        slot->count += 1;
    }
    for (Aggregate& a : out) {
        a.mean_deg /= a.count;
        const double var = std::max(0.0, a.std_deg / a.count - a.mean_deg * a.mean_deg);
        a.std_deg = std::sqrt(var);
    }
    return out;
}

double BenchmarkReport::mean_of(Method m, int n) const {
    double acc = 0;
    int count = 0;
    for (const CellResult& c : cells)
        if (c.method == m && c.n == n) {
            acc += c.error_deg;
            ++count;
        }
    return count ? acc / count : 0.0;
}

void write_report_csv(const BenchmarkReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    os << "method,n,person,round,seed,error_deg\n";
    char line[256];
    for (const CellResult& c : report.cells) {
        std::snprintf(line, sizeof line, "%s,%d,%d,%d,%llu,%.17g\n", method_name(c.method), c.n,
                      c.person, c.round, static_cast<unsigned long long>(c.seed), c.error_deg);
        os << line;
    }
}

void write_summary_csv(const BenchmarkReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    os << "method,n,mean_deg,std_deg,cells\n";
    char line[256];
    for (const auto& a : report.aggregates()) {
        std::snprintf(line, sizeof line, "%s,%d,%.6f,%.6f,%d\n", method_name(a.method), a.n,
                      a.mean_deg, a.std_deg, a.count);
        os << line;
    }
}

void write_trend_svg(const BenchmarkReport& report, const std::string& path) {
    const auto aggs = report.aggregates();
    std::set<int> ns;
    std::vector<Method> methods;
    double max_err = 0.1;
    for (const auto& a : aggs) {
        ns.insert(a.n);
        if (std::find(methods.begin(), methods.end(), a.method) == methods.end())
            methods.push_back(a.method);
        max_err = std::max(max_err, a.mean_deg);
    }
    const double W = 480, H = 320, ml = 56, mr = 16, mt = 24, mb = 40;
    const double px = W - ml - mr, py = H - mt - mb;
    const std::vector<int> xs(ns.begin(), ns.end());
    const auto x_of = [&](int n) {
        if (xs.size() == 1) return ml + px / 2;
        const auto it = std::find(xs.begin(), xs.end(), n);
        return ml + px * static_cast<double>(it - xs.begin()) / (xs.size() - 1);
    };
    const auto y_of = [&](double err) { return mt + py * (1.0 - err / (max_err * 1.1)); };
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    char buf[512];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\" "
          "font-family=\"sans-serif\" font-size=\"11\">\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"#444\"/>\n",
                  ml, mt, px, py);
    os << buf;
    for (int n : xs) {
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%d</text>\n", x_of(n),
                      H - mb + 16, n);
        os << buf;
    }
    os << "<text x=\"" << (ml + px / 2) << "\" y=\"" << (H - 6)
       << "\" text-anchor=\"middle\">references per person (n)</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double e = max_err * 1.1 * tick / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", ml - 6,
                      y_of(e) + 4, e);
        os << buf;
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        std::string pts;
        for (int n : xs) {
            for (const auto& a : aggs)
                if (a.method == methods[mi] && a.n == n) {
                    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x_of(n), y_of(a.mean_deg));
                    pts += buf;
                }
        }
        std::snprintf(buf, sizeof buf,
                      "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                      pts.c_str(), kColors[mi % 4]);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">%s</text>\n",
                      ml + 8, mt + 16 + 14.0 * mi, kColors[mi % 4], method_name(methods[mi]));
        os << buf;
    }
    os << "<text x=\"14\" y=\"" << (mt + py / 2)
       << "\" transform=\"rotate(-90 14 " << (mt + py / 2)
       << ")\" text-anchor=\"middle\">mean angular error (deg)</text>\n";
    os << "</svg>\n";
}

}  // namespace gazelab
