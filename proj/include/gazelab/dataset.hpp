#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazelab/eyesim.hpp"

namespace gazelab {

// Sampling windows for dataset generation, chosen so the renderer keeps the
// iris at least partially visible at the extremes.
struct SampleRanges {
    double gaze_pitch = deg_to_rad(20.0);
    double gaze_yaw = deg_to_rad(25.0);
    double head_pitch = deg_to_rad(10.0);
    double head_yaw = deg_to_rad(10.0);
};

struct TrainPair {
    int group = 0;
    int src = 0;
    int dst = 0;
    GazeOffset dg;  // dst label minus src label, stored exactly
};

struct PairDataset {
    Domain domain = Domain::Synthetic;
    int k = 0;
    std::vector<AlignedGroup> groups;
    std::vector<TrainPair> pairs;

    const EyeSample& src_of(const TrainPair& p) const { return groups[p.group].samples[p.src]; }
    const EyeSample& dst_of(const TrainPair& p) const { return groups[p.group].samples[p.dst]; }
};

struct PairDatasetConfig {
    int group_count = 200;
    int k = 10;
    int pairs_per_group = 20;
    SampleRanges ranges;
    Domain domain = Domain::Synthetic;
};

PairDataset build_pair_dataset(const PairDatasetConfig& cfg, std::uint64_t seed);

struct PersonData {
    PersonProfile profile;
    std::vector<EyeSample> pool;  // adaptation pool, disjoint from test
    std::vector<EyeSample> test;
};

struct PersonDataset {
    Domain domain = Domain::PseudoReal;
    std::vector<PersonData> persons;
};

struct PersonDatasetConfig {
    int persons = 15;
    int samples_per_person = 120;
    int pool_size = 20;
    bool with_kappa = true;
    int person_id_base = 0;
    SampleRanges ranges;
    Domain domain = Domain::PseudoReal;
};

PersonDataset build_person_dataset(const PersonDatasetConfig& cfg, std::uint64_t seed);

// Directory layout: manifest.json + images/*.pgm + segs/*.pgm. Loaded
// samples carry quantized images and no landmarks.
void save_pair_dataset(const PairDataset& ds, const std::string& dir, std::uint64_t seed);
PairDataset load_pair_dataset(const std::string& dir);

void save_person_dataset(const PersonDataset& ds, const std::string& dir, std::uint64_t seed);
PersonDataset load_person_dataset(const std::string& dir);

}  // namespace gazelab
