#include "confgate/probe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confgate/errors.hpp"
#include "confgate/numeric/optimizer.hpp"
#include "confgate/numeric/rng.hpp"
#include "confgate/numeric/softmax.hpp"

namespace confgate::probe {

using data::HiddenStateRecord;
using numeric::Mlp2;
using numeric::Rng;

std::size_t default_hidden_width(std::size_t input_dim) {
    return std::max<std::size_t>(64, input_dim / 8);
}

namespace {

void require_dim(const ProbeModel& model, std::span<const double> h) {
    if (h.size() != model.input_dim()) {
        throw DataError("probe expects dimension " + std::to_string(model.input_dim()) + ", got " +
                        std::to_string(h.size()));
    }
}

void validate_training_set(std::span<const HiddenStateRecord> records, const char* name,
                           std::size_t dim) {
    for (const auto& r : records) {
        if (!r.label) {
            throw DataError(std::string(name) + " record " + r.qid + " has no label");
        }
        if (r.vec.size() != dim) {
            throw DataError(std::string(name) + " record " + r.qid +
                            " has a different dimension from the first training record");
        }
    }
}

double accuracy_of(const ProbeModel& model, std::span<const HiddenStateRecord> records) {
    std::size_t correct = 0;
    for (const auto& r : records) {
        correct += classify(model, r.vec.view()) == *r.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

} // namespace

ProbeTrainResult train_probe(std::span<const HiddenStateRecord> train,
                             std::span<const HiddenStateRecord> dev,
                             const ProbeTrainConfig& config, const std::string& meta_fingerprint) {
    if (train.empty()) {
        throw DataError("train_probe: empty training set");
    }
    if (config.epochs < 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) ||
        !(config.dropout >= 0.0 && config.dropout <= 1.0) || config.patience < 1) {
        throw DataError("train_probe: invalid hyperparameters");
    }
    const std::size_t dim = train.front().vec.size();
    validate_training_set(train, "training", dim);
    validate_training_set(dev, "dev", dim);
    const auto positives = std::count_if(train.begin(), train.end(),
                                         [](const HiddenStateRecord& r) { return *r.label == 1; });
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(train.size())) {
        throw DataError("train_probe: training set contains a single class");
    }

    const std::size_t hidden = config.hidden_width ? config.hidden_width : default_hidden_width(dim);
    Rng init_rng(numeric::derive_seed(config.seed, "probe.init"));
    Rng order_rng(numeric::derive_seed(config.seed, "probe.order"));
    Rng dropout_rng(numeric::derive_seed(config.seed, "probe.dropout"));

    ProbeTrainResult result;
    result.model.net = Mlp2::random_init(dim, hidden, config.dropout, config.activation, init_rng);
    result.model.meta_fingerprint = meta_fingerprint;
    result.model.train_config = config;
    result.model.train_config.hidden_width = hidden;

    ProbeModel& model = result.model;
    auto params = model.net.parameters();
    const auto sizes = numeric::block_sizes(params);
    numeric::AdamW optimizer({.learning_rate = config.learning_rate}, sizes);
    numeric::Mlp2Gradients grads(model.net);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    ProbeModel best = model;
    double best_accuracy = -1.0;
    int since_best = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double weight = 1.0 / static_cast<double>(end - start);
            grads.clear();
            for (std::size_t i = start; i < end; ++i) {
                const auto& r = train[order[i]];
                loss_sum += numeric::accumulate_cross_entropy_gradient(
                    model.net, r.vec.view(), *r.label, true, dropout_rng, grads, weight);
            }
            const auto g = std::as_const(grads).parameters();
            optimizer.step(params, g);
        }
        result.log.epoch_train_loss.push_back(loss_sum / static_cast<double>(train.size()));
        result.log.epochs_run = epoch + 1;

        if (!dev.empty()) {
            const double acc = accuracy_of(model, dev);
            result.log.epoch_dev_accuracy.push_back(acc);
            if (acc > best_accuracy) {
                best_accuracy = acc;
                best = model;
                result.log.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
    }

    if (!dev.empty() && result.log.best_epoch >= 0) {
        result.model = std::move(best);
    }
    return result;
}

double conf(const ProbeModel& model, std::span<const double> h) {
    require_dim(model, h);
    const numeric::Logits2 z = numeric::mlp_infer(model.net, h);
    return numeric::softmax2(z.z0, z.z1).p1;
}

int classify(const ProbeModel& model, std::span<const double> h, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw DataError("classify: threshold must lie in (0, 1)");
    }
    return conf(model, h) > threshold ? 1 : 0;
}

std::vector<double> batch_conf(const ProbeModel& model, std::span<const HiddenStateRecord> records,
                               const Parallelism& par) {
    std::vector<double> out(records.size());
    parallel_for(records.size(), par, [&](std::size_t i) { out[i] = conf(model, records[i].vec.view()); });
    return out;
}

std::vector<double> batch_conf_serial(const ProbeModel& model,
                                      std::span<const HiddenStateRecord> records) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(conf(model, r.vec.view()));
    }
    return out;
}

ProbeEvalReport evaluate_probe(const ProbeModel& model, std::span<const HiddenStateRecord> test,
                               const Parallelism& par) {
    if (test.empty()) {
        throw DataError("evaluate_probe: empty test set");
    }
    for (const auto& r : test) {
        if (!r.label) {
            throw DataError("evaluate_probe: record " + r.qid + " has no label");
        }
    }
    const std::vector<double> confs = batch_conf(model, test, par);

    ProbeEvalReport report;
    double sum_pos = 0.0;
    double sum_neg = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int actual = *test[i].label;
        const int predicted = confs[i] > 0.5 ? 1 : 0;
        report.confusion[actual][predicted] += 1;
        if (actual == 1) {
            report.n_pos += 1;
            sum_pos += confs[i];
        } else {
            report.n_neg += 1;
            sum_neg += confs[i];
        }
    }
    const std::size_t correct = report.confusion[0][0] + report.confusion[1][1];
    report.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    report.mean_conf_pos = report.n_pos ? sum_pos / static_cast<double>(report.n_pos) : 0.0;
    report.mean_conf_neg = report.n_neg ? sum_neg / static_cast<double>(report.n_neg) : 0.0;
    return report;
}

numeric::Checkpoint to_checkpoint(const ProbeModel& model) {
    numeric::Checkpoint cp;
    cp.kind = "mlp2";
    cp.shapes["input_dim"] = model.net.input_dim();
    cp.shapes["hidden_dim"] = model.net.hidden_dim();
    cp.shapes["output_dim"] = 2;
    const auto blocks = model.net.parameters();
    const char* names[] = {"w1", "b1", "w2", "b2"};
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        cp.params.emplace_back(names[i], std::vector<double>(blocks[i].begin(), blocks[i].end()));
    }
    cp.seed = model.train_config.seed;
    const auto& c = model.train_config;
    cp.hyperparams["meta_fingerprint"] = model.meta_fingerprint;
    cp.hyperparams["learning_rate"] = c.learning_rate;
    cp.hyperparams["epochs"] = c.epochs;
    cp.hyperparams["dropout"] = c.dropout;
    cp.hyperparams["batch_size"] = c.batch_size;
    cp.hyperparams["hidden_width"] = model.net.hidden_dim();
    cp.hyperparams["patience"] = c.patience;
    cp.hyperparams["activation"] = std::string(numeric::to_string(c.activation));
    return cp;
}

ProbeModel probe_from_checkpoint(const numeric::Checkpoint& cp) {
    if (cp.kind != "mlp2") {
        throw DataError("probe checkpoint must have kind \"mlp2\", got \"" + cp.kind + "\"");
    }
    const auto input = static_cast<std::size_t>(require_int(cp.shapes, "input_dim"));
    const auto hidden = static_cast<std::size_t>(require_int(cp.shapes, "hidden_dim"));
    const auto& hp = cp.hyperparams;

    ProbeModel model;
    model.meta_fingerprint = require_string(hp, "meta_fingerprint");
    auto& c = model.train_config;
    c.learning_rate = require_field(hp, "learning_rate").get<double>();
    c.epochs = static_cast<int>(require_int(hp, "epochs"));
    c.dropout = require_field(hp, "dropout").get<double>();
    c.batch_size = static_cast<std::size_t>(require_int(hp, "batch_size"));
    c.hidden_width = hidden;
    c.patience = static_cast<int>(require_int(hp, "patience"));
    c.activation = numeric::activation_from_string(require_string(hp, "activation"));
    c.seed = cp.seed;

    model.net = Mlp2::zeros(input, hidden, static_cast<double>(static_cast<float>(c.dropout)),
                            c.activation);
    const auto blocks = model.net.parameters();
    const char* names[] = {"w1", "b1", "w2", "b2"};
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& values = cp.param(names[i]);
        if (values.size() != blocks[i].size()) {
            throw DataError(std::string("probe checkpoint: parameter ") + names[i] +
                            " has the wrong length");
        }
        std::copy(values.begin(), values.end(), blocks[i].begin());
    }
    model.net.validate();
    return model;
}

ProbeSplits split_probe_records(std::span<const HiddenStateRecord> records, double dev_fraction,
                                double test_fraction, std::uint64_t seed) {
    if (!(dev_fraction >= 0.0 && test_fraction >= 0.0 && dev_fraction + test_fraction < 1.0)) {
        throw DataError("split_probe_records: fractions must be non-negative and sum below 1");
    }
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].is_query_only() && records[i].label) {
            eligible.push_back(i);
        }
    }
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(eligible.size());
    for (const std::size_t i : eligible) {
        keyed.emplace_back(numeric::stable_hash(records[i].qid, seed), i);
    }
    std::sort(keyed.begin(), keyed.end());

    const auto n = static_cast<double>(keyed.size());
    const auto n_test = static_cast<std::size_t>(std::llround(n * test_fraction));
    const auto n_dev = static_cast<std::size_t>(std::llround(n * dev_fraction));
    std::vector<int> bucket(records.size(), -1);
    for (std::size_t j = 0; j < keyed.size(); ++j) {
        bucket[keyed[j].second] = j < n_test ? 2 : (j < n_test + n_dev ? 1 : 0);
    }

    ProbeSplits splits;
    for (const std::size_t i : eligible) {
        switch (bucket[i]) {
        case 0:
            splits.train.push_back(records[i]);
            break;
        case 1:
            splits.dev.push_back(records[i]);
            break;
        default:
            splits.test.push_back(records[i]);
            break;
        }
    }
    return splits;
}

} // namespace confgate::probe
