#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazelab/fewshot.hpp"

namespace gazelab {

enum class Method { FTAdap, RedFTAdap, RedFTAdapNoDA, LinAdap };

const char* method_name(Method m);
Method method_from_string(const std::string& s);

struct BenchmarkConfig {
    std::vector<Method> methods = {Method::FTAdap, Method::RedFTAdap, Method::RedFTAdapNoDA,
                                   Method::LinAdap};
    std::vector<int> n_values = {1, 5, 9};
    int t = 10;
    OffsetRange range;
    int rounds = 10;
    std::vector<std::uint64_t> seeds = {1};
    FinetuneConfig finetune;
};

struct BenchmarkAssets {
    const PersonDataset* dataset = nullptr;
    const std::vector<Estimator>* fold_models = nullptr;
    std::vector<int> person_fold;  // person index -> fold whose test set holds it
    const Redirector* redirector = nullptr;     // pre-trained
    const Redirector* redirector_da = nullptr;  // domain-adapted
};

struct CellResult {
    Method method = Method::FTAdap;
    int n = 0;
    int person = 0;
    int round = 0;
    std::uint64_t seed = 0;
    double error_deg = 0;
    bool lin_bias_only = false;
};

struct BenchmarkReport {
    std::vector<CellResult> cells;  // canonical order: seed, method, n, person, round

    struct Aggregate {
        Method method;
        int n;
        double mean_deg;
        double std_deg;
        int count;
    };
    std::vector<Aggregate> aggregates() const;
    double mean_of(Method m, int n) const;
};

// Runs every (seed, method, n, person, round) cell. Reference draws and
// redirection offsets come from per-cell streams that exclude the method, so
// methods see identical randomness and RedFTAdap with t=0 reproduces FTAdap
// exactly. Cells are independent; `threads` only changes wall time.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const BenchmarkAssets& assets,
                              int threads);

void write_report_csv(const BenchmarkReport& report, const std::string& path);
void write_summary_csv(const BenchmarkReport& report, const std::string& path);
void write_trend_svg(const BenchmarkReport& report, const std::string& path);

}  // namespace gazelab
