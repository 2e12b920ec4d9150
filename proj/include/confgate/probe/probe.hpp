#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "confgate/data/records.hpp"
#include "confgate/numeric/checkpoint.hpp"
#include "confgate/numeric/mlp.hpp"
#include "confgate/parallel.hpp"

namespace confgate::probe {

struct ProbeTrainConfig {
    double learning_rate = 5e-5;
    int epochs = 30;
    double dropout = 0.5;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    // 0 picks max(64, input_dim / 8).
    std::size_t hidden_width = 0;
    int patience = 5;
    numeric::Activation activation = numeric::Activation::relu;
};

std::size_t default_hidden_width(std::size_t input_dim);

/// Confidence detector over hidden states. Conf(h) is the softmax
/// probability of label 1 from a two-logit head.
struct ProbeModel {
    numeric::Mlp2 net;
    std::string meta_fingerprint;
    ProbeTrainConfig train_config;

    std::size_t input_dim() const noexcept { return net.input_dim(); }
};

struct ProbeTrainLog {
    std::vector<double> epoch_train_loss;    // mean minibatch loss, dropout on
    std::vector<double> epoch_dev_accuracy;  // empty when dev is empty
    int best_epoch = -1;                     // 0-based; -1 without dev
    int epochs_run = 0;
};

struct ProbeTrainResult {
    ProbeModel model;
    ProbeTrainLog log;
};

// Minimises cross-entropy over softmax2 with AdamW, batch_size samples per
// step, reshuffled every epoch from the seed. With a non-empty dev set the
// best dev-accuracy snapshot is returned and training stops after
// `patience` epochs without improvement.
ProbeTrainResult train_probe(std::span<const data::HiddenStateRecord> train,
                             std::span<const data::HiddenStateRecord> dev,
                             const ProbeTrainConfig& config, const std::string& meta_fingerprint);

double conf(const ProbeModel& model, std::span<const double> h);

// 1 iff conf > threshold. threshold must lie in (0, 1).
int classify(const ProbeModel& model, std::span<const double> h, double threshold = 0.5);

struct ProbeEvalReport {
    double accuracy = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    // confusion[actual][predicted]
    std::size_t confusion[2][2] = {{0, 0}, {0, 0}};
    double mean_conf_pos = 0.0;
    double mean_conf_neg = 0.0;
};

ProbeEvalReport evaluate_probe(const ProbeModel& model,
                               std::span<const data::HiddenStateRecord> test,
                               const Parallelism& par = {});

// Conf for every record: OpenMP kernel and the plain-loop reference.
std::vector<double> batch_conf(const ProbeModel& model,
                               std::span<const data::HiddenStateRecord> records,
                               const Parallelism& par);
std::vector<double> batch_conf_serial(const ProbeModel& model,
                                      std::span<const data::HiddenStateRecord> records);

numeric::Checkpoint to_checkpoint(const ProbeModel& model);
ProbeModel probe_from_checkpoint(const numeric::Checkpoint& checkpoint);

// Deterministic train/dev/test partition of labelled query-only records by
// seeded qid hash. Fractions are of the total; the rest is train.
struct ProbeSplits {
    std::vector<data::HiddenStateRecord> train;
    std::vector<data::HiddenStateRecord> dev;
    std::vector<data::HiddenStateRecord> test;
};

ProbeSplits split_probe_records(std::span<const data::HiddenStateRecord> records,
                                double dev_fraction, double test_fraction, std::uint64_t seed);

} // namespace confgate::probe
