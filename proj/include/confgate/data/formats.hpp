#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "confgate/data/records.hpp"

namespace confgate::data {

// .hsr.jsonl
//   line 1: {"format_version":1,"model_id":..,"dim":..,"layer_position":..,
//            "token_position":..,"created_at":..}
//   then:   {"qid":..,"cid":null|"..","label":0|1|null,"vec":[f32,...]}
//   optional trailing marker written by extractors:
//           {"complete":true,"n_records":N}
void write_hidden_states(const std::filesystem::path& path, const HiddenStateMeta& meta,
                         std::span<const HiddenStateRecord> records);
HiddenStates read_hidden_states(const std::filesystem::path& path);

std::string hidden_state_meta_line(const HiddenStateMeta& meta);
std::string hidden_state_record_line(const HiddenStateRecord& record);

// .corpus.jsonl
//   line 1: {"format_version":1,"kind":"corpus","query_dim":..,"context_dim":..}
//   then:   {"qid":..,"parametric_known":0|1,"query_features":[..],
//            "contexts":[{"cid":..,"gold_helpful":0|1,"context_features":[..]},..]}
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& path);

// .prefs.jsonl
//   line 1: {"format_version":1,"kind":"preferences","k":K}
//   then:   {"qid":..,"positives":[..],"negatives":[..],"inc_scores":{cid:f32,..}}
struct PreferenceFile {
    std::size_t k = 5;
    std::vector<PreferenceExample> examples;
};

void write_preferences(const std::filesystem::path& path,
                       std::span<const PreferenceExample> examples, std::size_t k);
PreferenceFile read_preferences(const std::filesystem::path& path);

} // namespace confgate::data
